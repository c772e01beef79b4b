"""Squeezing structure of the Gaussian unitary.

Joint singular value decomposition of the Bogoliubov matrices, polar-form
squeezer parameters, the pump-side decomposition of the three-index coupling
seen by the supermodes, and temporal alignment of all of these.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg

from .gaussian import GaussianState, relative_residual


class DecompositionError(RuntimeError):
    """Input matrices do not form a valid Bogoliubov transformation."""


@dataclass
class JointSvd:
    """``V_SS = F_S cosh(r) G_S``, ``V_II = F_I* cosh(r) G_I*``,
    ``W_SI = F_S sinh(r) G_I``, ``W_IS = F_I* sinh(r) G_S*``."""

    f_s: np.ndarray
    f_i: np.ndarray
    g_s: np.ndarray
    g_i: np.ndarray
    r: np.ndarray
    t: float = 0.0

    def matrices(self):
        c = np.cosh(self.r)
        s = np.sinh(self.r)
        fi = np.conj(self.f_i)
        return ((self.f_s * c) @ self.g_s, (fi * c) @ np.conj(self.g_i),
                (self.f_s * s) @ self.g_i, (fi * s) @ np.conj(self.g_s))

    def residual(self, state: GaussianState) -> float:
        ref = (state.v_ss, state.v_ii, state.w_si, state.w_is)
        return max(float(np.max(np.abs(a - b))) for a, b in zip(self.matrices(), ref))

    def rephase(self, theta: np.ndarray) -> "JointSvd":
        """Apply the per-mode gauge freedom ``F -> F e^{i theta}``."""
        ph = np.exp(1j * theta)
        return replace(self, f_s=self.f_s * ph, f_i=self.f_i * ph,
                       g_s=np.conj(ph)[:, None] * self.g_s,
                       g_i=np.conj(ph)[:, None] * self.g_i)

    def truncate(self, keep: int) -> "JointSvd":
        """Leading ``keep`` modes only (columns of F, rows of G)."""
        return JointSvd(self.f_s[:, :keep].copy(), self.f_i[:, :keep].copy(),
                        self.g_s[:keep].copy(), self.g_i[:keep].copy(), self.r[:keep].copy(), self.t)

    def permute(self, order: np.ndarray) -> "JointSvd":
        return replace(self, f_s=self.f_s[:, order], f_i=self.f_i[:, order],
                       g_s=self.g_s[order], g_i=self.g_i[order], r=self.r[order])


def _leading_phase(cols: np.ndarray) -> np.ndarray:
    """Phase that makes the largest-magnitude entry of each column real positive."""
    idx = np.argmax(np.abs(cols), axis=0)
    lead = cols[idx, np.arange(cols.shape[1])]
    return np.where(np.abs(lead) > 0, -np.angle(lead), 0.0)


def joint_svd(state: GaussianState, check: float = 1e-6) -> JointSvd:
    """Joint decomposition built from the SVD of ``W_SI``.

    Args:
        state: Gaussian state.
        check: maximal allowed relative Bogoliubov identity violation of the
            input; ``None`` disables the check.

    Returns:
        JointSvd with ``r`` descending and a deterministic column phase.
    """
    if state.w_si.shape[0] != state.w_si.shape[1]:
        raise DecompositionError("signal and idler grids must have the same size")
    if check is not None:
        res = relative_residual(state)
        if res > check:
            raise DecompositionError(f"Bogoliubov identities violated by {res:.2e}")
    p, s, qh = np.linalg.svd(state.w_si)
    r = np.arcsinh(s)
    c = np.cosh(r)
    g_s = (np.conj(p).T @ state.v_ss) / c[:, None]
    fi_conj = (state.v_ii @ qh.T) / c[None, :]
    out = JointSvd(p, np.conj(fi_conj), g_s, qh, r, state.t)
    return out.rephase(_leading_phase(out.f_s))


@dataclass
class SqueezerParams:
    """Squeezing matrix and rotations of ``U = D(x) S(J) R(phi)``.

    ``j`` is indexed (signal, idler). ``u`` and ``alpha`` are the Hermitian
    polar factors ``J = u exp(i alpha)``.
    """

    j: np.ndarray
    phi_s: np.ndarray
    phi_i: np.ndarray
    u: np.ndarray
    alpha: np.ndarray


def _hermitian_log_unitary(w: np.ndarray) -> np.ndarray:
    """Hermitian ``h`` with ``exp(i h) = w`` for unitary ``w``."""
    h = -1j * linalg.logm(w)
    return 0.5 * (h + h.conj().T)


def _sinhc_inverse(p: np.ndarray):
    """From Hermitian ``P = cosh(u)`` return ``u`` and ``u / sinh(u)``."""
    ev, f = np.linalg.eigh(0.5 * (p + p.conj().T))
    sig = np.arccosh(np.clip(ev, 1.0, None))
    ratio = np.ones_like(sig)
    big = sig > 1e-8
    ratio[big] = sig[big] / np.sinh(sig[big])
    return (f * sig) @ f.conj().T, (f * ratio) @ f.conj().T


def extract_squeezer(state: GaussianState) -> SqueezerParams:
    """Squeezing matrix and rotations from the Bogoliubov matrices.

    The signal-side relation ``W_SI = K J exp(-i phi_I*)`` is used, with
    ``K = sinh(u)/u`` built from the polar factor of ``V_SS``.
    """
    p_s_unit, p_s = linalg.polar(state.v_ss, side="left")
    p_i_unit, _ = linalg.polar(state.v_ii, side="left")
    phi_s = _hermitian_log_unitary(p_s_unit)
    phi_i = _hermitian_log_unitary(p_i_unit)
    _, k_inv = _sinhc_inverse(p_s)
    j = k_inv @ state.w_si @ p_i_unit.T
    u_abs, unit = linalg.polar(j, side="left")
    alpha = _hermitian_log_unitary(unit) if np.all(np.isfinite(unit)) else np.zeros_like(j)
    return SqueezerParams(j, phi_s, phi_i, 0.5 * (u_abs + u_abs.conj().T), alpha)


def squeezer_transpose_route(state: GaussianState) -> np.ndarray:
    """``J^T`` from the idler-side relation ``W_IS = K_I J^T exp(-i phi_S*)``."""
    p_s_unit, _ = linalg.polar(state.v_ss, side="left")
    _, p_i = linalg.polar(state.v_ii, side="left")
    _, k_inv = _sinhc_inverse(p_i)
    return k_inv @ state.w_is @ p_s_unit.T


def bogoliubov_from_squeezer(sq: SqueezerParams):
    """Forward map ``(J, phi_S, phi_I) -> (V_SS, V_II, W_SI, W_IS)``."""
    es = linalg.expm(1j * sq.phi_s)
    ei = linalg.expm(1j * sq.phi_i)

    def funcs(m):
        ev, f = np.linalg.eigh(m @ m.conj().T)
        sig = np.sqrt(np.clip(ev, 0, None))
        ratio = np.ones_like(sig)
        big = sig > 1e-12
        ratio[big] = np.sinh(sig[big]) / sig[big]
        return (f * np.cosh(sig)) @ f.conj().T, (f * ratio) @ f.conj().T

    ch_s, k_s = funcs(sq.j)
    ch_i, k_i = funcs(sq.j.T)
    v_ss = ch_s @ es
    v_ii = ch_i @ ei
    w_si = k_s @ sq.j @ np.conj(ei)
    w_is = k_i @ sq.j.T @ np.conj(es)
    return v_ss, v_ii, w_si, w_is


@dataclass
class PumpSvd:
    """``L[k, (u, u')] = sum_l X[k, l] D[l] Qh[l, (u, u')]`` (leading terms).

    ``x`` holds the retained pump columns, ``qh`` the matching rows of
    ``Q^dagger`` reshaped to ``(n_modes, n_s, n_i)``.
    """

    x: np.ndarray
    d: np.ndarray
    qh: np.ndarray
    t: float = 0.0

    def reconstruct(self) -> np.ndarray:
        return np.einsum("kl,l,luv->kuv", self.x, self.d, self.qh)

    def rephase(self, theta: np.ndarray) -> "PumpSvd":
        ph = np.exp(1j * theta)
        return replace(self, x=self.x * ph, qh=np.conj(ph)[:, None, None] * self.qh)


def build_L(joint: JointSvd, coupling, t: float) -> np.ndarray:
    """Dense ``L[k, u, u'] = sum Lambda*[i, j, k] F_S[i, u] F_I*[j, u']``."""
    lam = np.conj(coupling.tensor(t))
    return np.einsum("ijk,iu,jv->kuv", lam, joint.f_s, np.conj(joint.f_i), optimize=True)


def pump_svd(lmat: np.ndarray, n_keep: Optional[int] = None, t: float = 0.0) -> PumpSvd:
    """SVD of the reshaped ``L`` tensor, keeping ``n_keep`` pump modes."""
    n_p, n_s, n_i = lmat.shape
    x, d, qh = np.linalg.svd(lmat.reshape(n_p, n_s * n_i), full_matrices=False)
    n_keep = len(d) if n_keep is None else n_keep
    x, d, qh = x[:, :n_keep], d[:n_keep], qh[:n_keep]
    out = PumpSvd(x, d, qh.reshape(n_keep, n_s, n_i), t)
    return out.rephase(_leading_phase(out.x))


def pump_svd_factored(joint: JointSvd, coupling, t: float, n_keep: int = 1) -> PumpSvd:
    """Closed-form pump SVD for a rank-one coupling.

    Only one singular value is nonzero; further columns of ``X`` complete an
    orthonormal set deterministically and carry ``D = 0``.
    """
    a, b, c = coupling.factors(t)
    alpha = np.conj(a) @ joint.f_s
    beta = np.conj(b) @ np.conj(joint.f_i)
    cc = np.conj(c)
    # norms of the full factors; alpha and beta may be truncated to leading modes
    na, nb, nc = (np.linalg.norm(v) for v in (a, b, cc))
    d1 = coupling.scale * na * nb * nc
    n_s, n_i = alpha.size, beta.size
    x = np.zeros((cc.size, n_keep), complex)
    qh = np.zeros((n_keep, n_s, n_i), complex)
    d = np.zeros(n_keep)
    if d1 > 0:
        x[:, 0] = cc / nc
        qh[0] = np.outer(alpha, beta) / (na * nb)
        d[0] = d1
    else:
        x[0, 0] = 1.0
    if n_keep > 1:
        basis = np.eye(cc.size, dtype=complex)
        q, _ = np.linalg.qr(np.column_stack([x[:, :1], basis]))
        x[:, 1:] = q[:, 1:n_keep]
    out = PumpSvd(x, d, qh, t)
    return out.rephase(_leading_phase(out.x))


@dataclass
class AlignedSeries:
    """Joint and pump decompositions aligned in time.

    ``events`` lists ``(index, mode, overlap)`` where the best overlap with
    the previous sample fell below the threshold.
    """

    times: np.ndarray
    joints: List[JointSvd]
    pumps: List[PumpSvd]
    events: list = field(default_factory=list)


def _match(overlap: np.ndarray) -> np.ndarray:
    """Greedy assignment of previous modes (rows) to current modes (columns)."""
    mag = np.abs(overlap).copy()
    n = mag.shape[0]
    order = np.full(n, -1)
    for _ in range(n):
        i, j = np.unravel_index(np.argmax(mag), mag.shape)
        order[i] = j
        mag[i, :] = -1
        mag[:, j] = -1
    return order


def smooth_phases(joints: Sequence[JointSvd], pumps: Sequence[PumpSvd] = None,
                  track: Optional[int] = None, threshold: float = 0.99) -> AlignedSeries:
    """Align mode orderings and phases of consecutive decompositions.

    Args:
        joints: decompositions at increasing times.
        pumps: matching pump decompositions (optional).
        track: number of leading modes followed through crossings.
        threshold: overlap below which a matching event is recorded.

    Returns:
        AlignedSeries whose columns vary continuously in time.
    """
    joints = list(joints)
    n = joints[0].r.size
    track = n if track is None else min(track, n)
    out_j = [joints[0]]
    events = []
    for k in range(1, len(joints)):
        prev, cur = out_j[-1], joints[k]
        ov = 0.5 * (np.conj(prev.g_s[:track]) @ cur.g_s[:track].T
                    + np.conj(prev.g_i[:track]) @ cur.g_i[:track].T)
        order = _match(ov)
        perm = np.arange(n)
        perm[:track] = order
        cur = cur.permute(perm)
        ov_d = ov[np.arange(track), order]
        for m in np.nonzero(np.abs(ov_d) < threshold)[0]:
            events.append((k, int(m), float(abs(ov_d[m]))))
        theta = np.zeros(n)
        theta[:track] = np.angle(ov_d)
        out_j.append(cur.rephase(theta))
    out_p = None
    if pumps is not None:
        pumps = list(pumps)
        out_p = [pumps[0]]
        for k in range(1, len(pumps)):
            prev, cur = out_p[-1], pumps[k]
            ov = np.conj(prev.x).T @ cur.x
            nl = ov.shape[0]
            order = _match(ov)
            cur = PumpSvd(cur.x[:, order], cur.d[order], cur.qh[order], cur.t)
            ov_d = ov[np.arange(nl), order]
            out_p.append(cur.rephase(-np.angle(ov_d) * (np.abs(ov_d) > 0)))
    times = np.array([j.t for j in out_j])
    return AlignedSeries(times, out_j, out_p, events)
