"""Homodyne squeezing and Wigner functions of the residual ket.

Quadratures use the convention in which vacuum noise is 1. Wigner functions
follow ``W(q, p) = (1/pi^2) int dx dy chi(x + iy) exp(2i(px - qy))`` with
``chi(gamma) = <D(gamma)>`` so that the vacuum peak is ``2/pi``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special

from . import decomp
from .gaussian import GaussianState, moments
from .nongauss import FockKet


class WignerError(RuntimeError):
    """The characteristic function did not decay inside the widest grid."""


def to_db(noise):
    return 10.0 * np.log10(noise)


# ----------------------------------------------------------------------------
# homodyne detection in the actual channel

@dataclass
class ActualMoments:
    """Second moments restricted to the actual output channel.

    ``n_ss[j, k] = <a_Sj^+ a_Sk>``, ``n_ii`` likewise and
    ``m_si[j, k] = <a_Sj a_Ik>``.
    """

    n_ss: np.ndarray
    n_ii: np.ndarray
    m_si: np.ndarray

    @classmethod
    def from_state(cls, state: GaussianState, n_ac: Optional[int] = None) -> "ActualMoments":
        mom = moments(state)
        n_ac = state.v_ss.shape[0] // 2 if n_ac is None else n_ac
        ac = slice(0, n_ac)
        return cls(mom.n_ss[ac, ac], mom.n_ii[ac, ac], mom.m_si[ac, ac])

    @classmethod
    def vacuum(cls, n: int) -> "ActualMoments":
        z = np.zeros((n, n), complex)
        return cls(z, z.copy(), z.copy())

    def combined(self):
        """Block matrices ``N`` and ``M`` over the signal-then-idler vector."""
        ns, ni = self.n_ss.shape[0], self.n_ii.shape[0]
        n = np.zeros((ns + ni, ns + ni), complex)
        m = np.zeros_like(n)
        n[:ns, :ns] = self.n_ss
        n[ns:, ns:] = self.n_ii
        m[:ns, ns:] = self.m_si
        m[ns:, :ns] = self.m_si.T
        return n, m


@dataclass
class LocalOscillator:
    """Signal and idler profiles with ``(|f_S|^2 + |f_I|^2) / 2 = 1``."""

    f_s: np.ndarray
    f_i: np.ndarray

    @property
    def norm(self) -> float:
        return 0.5 * float(np.vdot(self.f_s, self.f_s).real + np.vdot(self.f_i, self.f_i).real)

    def normalized(self) -> "LocalOscillator":
        k = 1.0 / np.sqrt(self.norm)
        return LocalOscillator(self.f_s * k, self.f_i * k)

    @classmethod
    def random(cls, n_s: int, n_i: int, rng: np.random.Generator) -> "LocalOscillator":
        z = rng.normal(size=n_s + n_i) + 1j * rng.normal(size=n_s + n_i)
        return cls(z[:n_s], z[n_s:]).normalized()


def quadrature_noise(lo: LocalOscillator, mom: ActualMoments, tol: float = 1e-10) -> float:
    """Variance of the quadrature selected by ``lo`` (vacuum level 1).

    Raises:
        ValueError: if ``lo`` is not normalized.
    """
    if abs(lo.norm - 1.0) > tol:
        raise ValueError(f"local oscillator norm {lo.norm:.12f} differs from 1")
    fs, fi = lo.f_s, lo.f_i
    val = (np.vdot(fs, mom.n_ss @ fs) + np.vdot(fi, mom.n_ii @ fi)
           + 2 * (fs @ mom.m_si @ fi).real + 1.0)
    return float(val.real)


def homodyne_matrix(mom: ActualMoments) -> np.ndarray:
    """Real symmetric form ``Q`` with noise ``1 + 2 z^T Q z`` for ``f = sqrt2 (sigma + i s)``."""
    n, m = mom.combined()
    a, b = n + m, n - m
    return np.block([[a.real, -a.imag], [b.imag, b.real]])


@dataclass
class HomodyneResult:
    min_noise: float
    max_noise: float
    lo: LocalOscillator
    squeezed: bool

    @property
    def squeezing_db(self) -> float:
        return float(to_db(self.min_noise))

    @property
    def antisqueezing_db(self) -> float:
        return float(to_db(self.max_noise))


def optimal_homodyne(mom: ActualMoments) -> HomodyneResult:
    """Minimum-noise local oscillator from the symmetric eigenproblem.

    The largest eigenvalue of the same problem gives the anti-squeezed
    quadrature. ``squeezed`` is False when no quadrature beats vacuum.
    """
    q = homodyne_matrix(mom)
    q = 0.5 * (q + q.T)
    evals, evecs = np.linalg.eigh(q)
    ns = mom.n_ss.shape[0]
    n = q.shape[0] // 2
    z = evecs[:, 0]
    f = np.sqrt(2) * (z[:n] + 1j * z[n:])
    lo = LocalOscillator(f[:ns], f[ns:])
    lo_min = 1 + 2 * float(evals[0])
    return HomodyneResult(lo_min, 1 + 2 * float(evals[-1]), lo, bool(lo_min < 1.0))


def analytic_min_noise(r1: float, eta_s: float, eta_i: float) -> float:
    """Approximate minimum noise from the leading squeezing parameter."""
    if r1 < 0:
        raise ValueError("r1 must be non-negative")
    avg = 0.5 * (eta_s + eta_i)
    geo = np.sqrt(eta_s * eta_i)
    return float(np.exp(-2 * r1) / 2 * (avg + geo) + np.exp(2 * r1) / 2 * (avg - geo) + 1 - avg)


# ----------------------------------------------------------------------------
# displacement operators and characteristic functions

def displacement_matrices(alpha: np.ndarray, dim: int) -> np.ndarray:
    """Exact ``<m|D(alpha)|n>`` for ``m, n < dim``.

    Args:
        alpha: complex amplitudes, any shape ``S``.
        dim: number of Fock levels kept.

    Returns:
        Array of shape ``S + (dim, dim)``.
    """
    alpha = np.asarray(alpha, complex)
    x = np.abs(alpha) ** 2
    out = np.empty(alpha.shape + (dim, dim), complex)
    lf = special.gammaln(np.arange(dim) + 1.0)
    env = np.exp(-0.5 * x)
    for m in range(dim):
        for n in range(dim):
            lo, k = min(m, n), abs(m - n)
            lag = special.eval_genlaguerre(lo, k, x)
            pref = np.exp(0.5 * (lf[lo] - lf[lo + k]))
            base = alpha if m >= n else -np.conj(alpha)
            out[..., m, n] = pref * base ** k * env * lag
    return out


class ReducedKet:
    """Purification of the reduced state of a few modes of a :class:`FockKet`.

    The ket tensor is reshaped into (kept modes) x (rest) and compressed by
    an SVD; local cutoffs are lowered to the highest occupation that carries
    probability above ``tol``.
    """

    def __init__(self, ket: FockKet, modes: Sequence[int], tol: float = 1e-14):
        tensor = ket.tensor()
        n_modes = tensor.ndim
        modes = list(modes)
        rest = [k for k in range(n_modes) if k not in modes]
        prob = np.abs(tensor) ** 2
        dims = []
        for k in modes:
            marg = prob.sum(axis=tuple(j for j in range(n_modes) if j != k))
            occ = np.nonzero(marg > tol * max(marg.sum(), 1e-300))[0]
            dims.append(int(occ[-1]) + 1 if occ.size else 1)
        t = np.transpose(tensor, modes + rest)
        t = t[tuple(slice(0, d) for d in dims)]
        mat = t.reshape(int(np.prod(dims)), -1)
        u, s, _ = np.linalg.svd(mat, full_matrices=False)
        keep = s > 1e-9 * max(s[0], 1e-300)
        self.phi = (u[:, keep] * s[keep]).reshape(tuple(dims) + (int(keep.sum()),))
        self.dims = dims
        self.modes = modes

    @property
    def rank(self) -> int:
        return self.phi.shape[-1]

    def density(self) -> np.ndarray:
        flat = self.phi.reshape(-1, self.rank)
        return flat @ flat.conj().T

    def expect_displacement(self, alphas: np.ndarray, block: Optional[int] = None) -> np.ndarray:
        """``<prod_k D(alpha_k)>`` for each row of ``alphas`` (points x modes)."""
        alphas = np.atleast_2d(alphas)
        if block is None:
            block = int(np.clip(4_000_000 // self.phi.size, 1, 512))
        out = np.empty(len(alphas), complex)
        k = len(self.modes)
        letters = "abcdefgh"[:k]
        for i0 in range(0, len(alphas), block):
            sl = slice(i0, i0 + block)
            cur = np.broadcast_to(self.phi, (min(block, len(alphas) - i0),) + self.phi.shape)
            for j in range(k):
                mats = displacement_matrices(alphas[sl, j], self.dims[j])
                src = "P" + letters + "r"
                dst = src.replace(letters[j], "z")
                cur = np.einsum(f"Pz{letters[j]},{src}->{dst}", mats, cur)
            out[sl] = np.einsum(f"{letters}r,P{letters}r->P", np.conj(self.phi), cur)
        return out


# ----------------------------------------------------------------------------
# Wigner grids

@dataclass
class WignerGrid:
    """``w[a, b] = W(q[a], p[b])`` plus the characteristic-function grid used."""

    q: np.ndarray
    p: np.ndarray
    w: np.ndarray
    chi_extent: float
    chi_points: int
    imag_residue: float = 0.0
    meta: dict = field(default_factory=dict)

    def integral(self, values: Optional[np.ndarray] = None) -> float:
        v = self.w if values is None else values
        return float(np.trapezoid(np.trapezoid(v, self.p, axis=1), self.q))

    @property
    def norm(self) -> float:
        return self.integral()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["q", "p", "W"])
            for a, qa in enumerate(self.q):
                for b, pb in enumerate(self.p):
                    wr.writerow([f"{qa:.10g}", f"{pb:.10g}", f"{self.w[a, b]:.10e}"])


@dataclass(frozen=True)
class GridSpec:
    """Characteristic-function and output grids.

    ``chi_extent`` bounds ``|x|, |y|``; when ``|chi|`` at the border exceeds
    ``decay_tol`` the extent grows by ``widen`` (points scale with it) up to
    ``max_extent``.
    """

    chi_points: int = 64
    chi_extent: float = 6.0
    out_points: int = 121
    out_extent: float = 3.0
    decay_tol: float = 1e-6
    widen: float = 1.5
    max_extent: float = 40.0


def _fourier(chi: np.ndarray, x: np.ndarray, q: np.ndarray, p: np.ndarray):
    """Direct quadrature of the Wigner transform; ``chi[i, j] = chi(x_i + i x_j)``."""
    h = x[1] - x[0]
    ep = np.exp(2j * np.outer(p, x))  # (p, x)
    eq = np.exp(-2j * np.outer(q, x))  # (q, y)
    w = eq @ chi.T @ ep.T * (h * h / np.pi ** 2)
    return w


def wigner_from_chi(chi_fn: Callable[[np.ndarray], np.ndarray], spec: GridSpec = GridSpec(),
                    label: str = "") -> WignerGrid:
    """Sample ``chi`` on a square grid, check its decay and transform.

    Args:
        chi_fn: maps complex ``gamma`` values (1-D) to ``chi(gamma)``.
        spec: grid settings.
        label: included in error messages.
    """
    extent, n = spec.chi_extent, spec.chi_points
    while True:
        x = np.linspace(-extent, extent, n)
        gam = (x[:, None] + 1j * x[None, :]).ravel()
        chi = np.asarray(chi_fn(gam)).reshape(n, n)
        border = max(np.abs(chi[0]).max(), np.abs(chi[-1]).max(),
                     np.abs(chi[:, 0]).max(), np.abs(chi[:, -1]).max())
        if border < spec.decay_tol:
            break
        if extent * spec.widen > spec.max_extent:
            raise WignerError(f"characteristic function {label} still {border:.1e} at |x|={extent:.1f}")
        extent *= spec.widen
        n = int(np.ceil(n * spec.widen))
    q = np.linspace(-spec.out_extent, spec.out_extent, spec.out_points)
    w = _fourier(chi, x, q, q)
    scale = max(np.abs(w).max(), 1e-300)
    return WignerGrid(q, q.copy(), w.real, extent, n, float(np.abs(w.imag).max() / scale))


def negativity_volume(grid: WignerGrid) -> float:
    """Volume of the negative part, ``int |W| - int W``, clamped at zero.

    Equal to ``int |W| - 1`` for a normalized grid, but insensitive to the
    small normalization error of a finite window.
    """
    return max(0.0, grid.integral(np.abs(grid.w)) - grid.integral())


def fock_wigner(n: int, q: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Closed-form Wigner function of the Fock state ``|n>`` in this convention."""
    r2 = 4 * (q[:, None] ** 2 + p[None, :] ** 2)
    return (2 / np.pi) * (-1) ** n * np.exp(-0.5 * r2) * special.eval_laguerre(n, r2)


def wigner_parity(rho: np.ndarray, q: np.ndarray, p: np.ndarray, pad: int = 60) -> np.ndarray:
    """Single-mode Wigner function from displaced parity.

    Independent of the characteristic-function route: ``W(alpha) =
    (2/pi) Tr[rho D(alpha) Pi D(alpha)^+]`` with ``alpha = q + ip``.
    """
    d = rho.shape[0] + pad
    big = np.zeros((d, d), complex)
    big[: rho.shape[0], : rho.shape[0]] = rho
    parity = (-1.0) ** np.arange(d)
    out = np.empty((len(q), len(p)))
    for a, qa in enumerate(q):
        dm = displacement_matrices(-(qa + 1j * p), d)
        diag = np.einsum("bmn,nk,bmk->bm", dm, big, np.conj(dm)).real
        out[a] = (2 / np.pi) * diag @ parity
    return out


# ----------------------------------------------------------------------------
# hybrid modes of the residual ket

@dataclass(frozen=True)
class HybridModeSpec:
    """``C = cos(phi) (A_S1 + A_I1)/sqrt2 + sin(phi) e^{i theta} B_P1``."""

    theta: float
    phi: float

    def coefficients(self) -> np.ndarray:
        c = np.cos(self.phi) / np.sqrt(2)
        return np.array([c, c, np.sin(self.phi) * np.exp(1j * self.theta)])


def leading_modes(ket: FockKet) -> list:
    """Indices of S1, I1 and P1 in the ket."""
    m = ket.basis.trunc.m
    return [0, m, 2 * m]


def mode_wigner(ket: FockKet, modes: Sequence[int], coeffs: Sequence[complex],
                spec: GridSpec = GridSpec(), noise: float = 0.0,
                reduced: Optional[ReducedKet] = None) -> WignerGrid:
    """Wigner function of the mode ``C = sum_k c_k A_{modes[k]}``.

    Args:
        ket: residual ket.
        modes: ket mode indices entering ``C``.
        coeffs: coefficients ``c_k``; ``sum |c_k|^2 + noise`` should be 1.
        spec: grid settings.
        noise: weight of unoccupied modes, giving ``exp(-noise |gamma|^2 / 2)``.
        reduced: reuse a prepared :class:`ReducedKet` over ``modes``.
    """
    red = reduced if reduced is not None else ReducedKet(ket, modes)
    cc = np.conj(np.asarray(coeffs, complex))

    def chi(gam):
        vals = red.expect_displacement(gam[:, None] * cc[None, :])
        return vals * np.exp(-0.5 * noise * np.abs(gam) ** 2)

    return wigner_from_chi(chi, spec, label=str(list(modes)))


def hybrid_wigner(ket: FockKet, mode: HybridModeSpec, spec: GridSpec = GridSpec(),
                  reduced: Optional[ReducedKet] = None) -> WignerGrid:
    grid = mode_wigner(ket, leading_modes(ket), mode.coefficients(), spec, reduced=reduced)
    grid.meta.update(theta=mode.theta, phi=mode.phi)
    return grid


@dataclass
class AngleScan:
    theta: float
    phi: float
    negativity: float
    table: np.ndarray  # (theta, phi, negativity) rows


def angle_scan(ket: FockKet, thetas: Sequence[float], phis: Sequence[float],
               spec: GridSpec = GridSpec(chi_points=48)) -> AngleScan:
    """Exhaustive search of the hybrid-mode angles maximizing the negativity."""
    red = ReducedKet(ket, leading_modes(ket))
    rows = []
    for th in thetas:
        for ph in phis:
            g = hybrid_wigner(ket, HybridModeSpec(th, ph), spec, reduced=red)
            rows.append((th, ph, negativity_volume(g)))
    table = np.array(rows)
    k = int(np.argmax(table[:, 2]))
    return AngleScan(float(table[k, 0]), float(table[k, 1]), float(table[k, 2]), table)


# ----------------------------------------------------------------------------
# reduced Wigner function in the actual channel

@dataclass
class ActualChannelWeights:
    """Optimal actual-channel mode weights on the first supermodes.

    ``w_s`` and ``w_i`` are ``beta^T G`` for the first signal and idler
    supermodes; ``noise`` is the remaining weight spread over the others.
    """

    beta_s: np.ndarray
    beta_i: np.ndarray
    w_s: complex
    w_i: complex
    rank_ok: bool

    @property
    def noise(self) -> float:
        return 2.0 - abs(self.w_s) ** 2 - abs(self.w_i) ** 2


def _optimal_beta(proj: np.ndarray, complete: bool):
    """``beta^T = e_1^T proj^+`` normalized.

    ``proj`` is the actual-channel part of a unitary restricted to the kept
    supermode columns. With all columns present the pseudo-inverse is taken
    literally. Otherwise the rows of the full unitary are orthonormal, so
    ``proj^+ = proj^dagger`` and only the first column is needed.
    """
    if complete:
        pinv = np.linalg.pinv(proj)
        sv = np.linalg.svd(proj, compute_uv=False)
        rank_ok = bool(sv[-1] > 1e-10 * sv[0])
        beta = pinv[0]
    else:
        beta = np.conj(proj[:, 0])
        rank_ok = True
    nrm = np.linalg.norm(beta)
    if nrm < 1e-14:
        return beta, False
    return beta / nrm, rank_ok


def actual_channel_weights(joint: decomp.JointSvd, n_ac: Optional[int] = None) -> ActualChannelWeights:
    """Weights of the optimal actual-channel hybrid mode.

    Signal supermodes relate to channel modes through ``a_S = G_S^+ A_S`` and
    idler ones through ``a_I = G_I^T A_I``.
    """
    n_ac = joint.g_s.shape[1] // 2 if n_ac is None else n_ac
    proj_s = joint.g_s.conj().T[:n_ac]
    proj_i = joint.g_i.T[:n_ac]
    complete = joint.g_s.shape[0] == joint.g_s.shape[1]
    beta_s, ok_s = _optimal_beta(proj_s, complete)
    beta_i, ok_i = _optimal_beta(proj_i, complete)
    return ActualChannelWeights(beta_s, beta_i, complex(beta_s @ proj_s[:, 0]),
                                complex(beta_i @ proj_i[:, 0]), ok_s and ok_i)


def reduced_wigner_actual(ket: FockKet, joint: Optional[decomp.JointSvd] = None,
                          eta: Optional[float] = None, spec: GridSpec = GridSpec(),
                          approximate: bool = False) -> WignerGrid:
    """Wigner function of ``(d_S + d_I)/sqrt2`` in the actual channel.

    Args:
        ket: residual ket.
        joint: final joint decomposition (exact path).
        eta: common escape efficiency (approximate path).
        spec: grid settings.
        approximate: use the ``sqrt(eta)`` scaling with ``1 - eta`` noise.
    """
    modes = leading_modes(ket)[:2]
    if approximate:
        if eta is None:
            raise ValueError("the approximate path needs eta")
        c = np.sqrt(eta / 2) * np.ones(2)
        grid = mode_wigner(ket, modes, c, spec, noise=1.0 - eta)
        grid.meta.update(path="approximate", eta=eta)
        return grid
    if joint is None:
        raise ValueError("the exact path needs the final joint decomposition")
    wts = actual_channel_weights(joint)
    c = np.array([wts.w_s, wts.w_i]) / np.sqrt(2)
    grid = mode_wigner(ket, modes, c, spec, noise=0.5 * wts.noise)
    grid.meta.update(path="exact", w_s=abs(wts.w_s), w_i=abs(wts.w_i), rank_ok=wts.rank_ok)
    return grid
