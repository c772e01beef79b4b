"""Removing the Gaussian squeezing from the actual output channel.

A Gaussian unitary acting only on the actual channel is taken from a run
without scattering loss. Composed with the lossy Gaussian unitary it maps a
chosen actual-channel mode onto a combination of supermode operators
``C A + D A^+``, whose Wigner function is then evaluated on the residual ket.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import optimize

from . import decomp, gaussian, measure
from .model import SystemParams, build_coupling, initial_pump
from .nongauss import FockKet


@dataclass
class StretchUnitary:
    """Actual-channel Bogoliubov matrices over the signal-then-idler vector."""

    v_bar: np.ndarray
    w_bar: np.ndarray
    ref_id: str = ""

    @classmethod
    def from_state(cls, state: gaussian.GaussianState, ref_id: str = "") -> "StretchUnitary":
        n = state.v_ss.shape[0] // 2
        ac = slice(0, n)
        z = np.zeros((n, n), complex)
        v = np.block([[state.v_ss[ac, ac], z], [z, state.v_ii[ac, ac]]])
        w = np.block([[z, state.w_si[ac, ac]], [state.w_is[ac, ac], z]])
        return cls(v, w, ref_id)

    def constraint_residuals(self):
        v, w = self.v_bar, self.w_bar
        r1 = np.abs(v.conj().T @ v - w.T @ w.conj() - np.eye(v.shape[0])).max()
        r2 = np.abs(w.T @ v.conj() - v.conj().T @ w).max()
        return float(r1), float(r2)


def lossless_params(p: SystemParams) -> SystemParams:
    """Same device and pump with the signal and idler scattering loss removed.

    The loaded quality factors are kept so that the resonances and grids are
    unchanged; only the escape efficiency becomes one.
    """
    def clean(res):
        return replace(res, escape_efficiency=1.0, q_load=res.loaded_q)

    return replace(p, signal=clean(p.signal), idler=clean(p.idler))


def lossless_reference(p: SystemParams, dt: float = 0.02):
    """Integrate the lossless reference run.

    Returns:
        ``(StretchUnitary, final GaussianState)``.
    """
    ref = lossless_params(p)
    coupling = build_coupling(ref)
    n = 2 * ref.signal.n_k
    s0 = gaussian.GaussianState.initial(ref.t0_time, initial_pump(ref), n, n)
    final = gaussian.integrate(s0, coupling, ref.t1_time, dt).final
    return StretchUnitary.from_state(final, ref_id="lossless"), final


def actual_rows(state: gaussian.GaussianState):
    """``V_ac`` and ``W_ac``: actual-channel rows over all signal and idler columns."""
    n = state.v_ss.shape[0] // 2
    ac = slice(0, n)
    zs = np.zeros((n, state.v_ss.shape[1]), complex)
    zi = np.zeros((n, state.v_ii.shape[1]), complex)
    v_ac = np.block([[state.v_ss[ac], zi], [zs, state.v_ii[ac]]])
    w_ac = np.block([[zs, state.w_si[ac]], [state.w_is[ac], zi]])
    return v_ac, w_ac


def extend_joint(kept: decomp.JointSvd, full: decomp.JointSvd) -> decomp.JointSvd:
    """Complete a truncated decomposition with the trailing modes of ``full``.

    The leading rows keep the gauge and ordering used by the residual ket.
    """
    k = kept.g_s.shape[0]
    return decomp.JointSvd(
        np.hstack([kept.f_s, full.f_s[:, k:]]), np.hstack([kept.f_i, full.f_i[:, k:]]),
        np.vstack([kept.g_s, full.g_s[k:]]), np.vstack([kept.g_i, full.g_i[k:]]),
        np.concatenate([kept.r, full.r[k:]]), kept.t)


def supermode_map(joint: decomp.JointSvd) -> np.ndarray:
    """``G`` with ``a = G A``: block-diagonal of ``G_S^+`` and ``G_I^T``."""
    gs, gi = joint.g_s.conj().T, joint.g_i.T
    out = np.zeros((gs.shape[0] + gi.shape[0], gs.shape[1] + gi.shape[1]), complex)
    out[: gs.shape[0], : gs.shape[1]] = gs
    out[gs.shape[0]:, gs.shape[1]:] = gi
    return out


def composed_maps(stretch: StretchUnitary, state: gaussian.GaussianState):
    """Annihilation and creation parts of the composed map on ``a``."""
    v_ac, w_ac = actual_rows(state)
    vb, wb = stretch.v_bar, stretch.w_bar
    m_c = vb.conj().T @ v_ac - wb.T @ w_ac.conj()
    m_d = vb.conj().T @ w_ac - wb.T @ v_ac.conj()
    return m_c, m_d


@dataclass
class StretchCoefficients:
    """``C`` and ``D`` over the supermodes (signal block then idler block)."""

    c: np.ndarray
    d: np.ndarray
    beta: np.ndarray
    n_signal: int
    singular_values: np.ndarray = field(default=None, repr=False)
    rank_ok: bool = True

    def target_error(self, target: Optional[np.ndarray] = None) -> float:
        if target is None:
            target = np.zeros_like(self.c)
            target[0] = 1.0
        return float(np.abs(self.c - target).max())

    @property
    def d_max(self) -> float:
        return float(np.abs(self.d).max())


def stretch_coefficients(stretch: StretchUnitary, state: gaussian.GaussianState,
                         joint: decomp.JointSvd, beta: np.ndarray) -> StretchCoefficients:
    """``C = beta^T M_C G`` and ``D = beta^T M_D G*``."""
    m_c, m_d = composed_maps(stretch, state)
    g = supermode_map(joint)
    return StretchCoefficients(beta @ m_c @ g, beta @ m_d @ np.conj(g), beta, joint.g_s.shape[0])


def optimal_stretch_lo(stretch: StretchUnitary, state: gaussian.GaussianState,
                       joint: decomp.JointSvd, target: Optional[np.ndarray] = None,
                       rank_tol: float = 1e-10) -> StretchCoefficients:
    """Local oscillator ``beta^T = target^T (M_C G)^+``, normalized to a unit mode.

    Args:
        target: desired ``C``; defaults to the first signal supermode.
        rank_tol: relative singular-value threshold for the rank flag.
    """
    m_c, _ = composed_maps(stretch, state)
    a = m_c @ supermode_map(joint)
    if target is None:
        target = np.zeros(a.shape[1], complex)
        target[0] = 1.0
    sv = np.linalg.svd(a, compute_uv=False)
    beta = target @ np.linalg.pinv(a)
    nrm = np.linalg.norm(beta)
    ok = bool(sv.size and sv[0] > 0 and nrm > 0)
    if ok:
        beta = beta / nrm
    out = stretch_coefficients(stretch, state, joint, beta)
    out.singular_values = sv
    out.rank_ok = ok and bool(sv[-1] > rank_tol * sv[0])
    return out


def retained_indices(ket: FockKet, n_signal: int):
    """Ket mode indices and matching supermode indices for signal and idler."""
    m = ket.basis.trunc.m
    modes = list(range(2 * m))
    sup = list(range(m)) + [n_signal + u for u in range(m)]
    return modes, sup


def stretched_wigner(ket: FockKet, coeffs: StretchCoefficients,
                     spec: measure.GridSpec = measure.GridSpec(),
                     reduced: Optional[measure.ReducedKet] = None) -> measure.WignerGrid:
    """Wigner function of the stretched actual-channel mode.

    Retained supermodes enter through the residual ket; every other supermode
    is in vacuum and contributes ``exp(-|gamma C_l^* - gamma^* D_l|^2 / 2)``.
    """
    modes, sup = retained_indices(ket, coeffs.n_signal)
    red = reduced if reduced is not None else measure.ReducedKet(ket, modes)
    c, d = coeffs.c, coeffs.d
    rest = np.setdiff1d(np.arange(c.size), sup)

    def chi(gam):
        g = gam[:, None]
        alpha = g * np.conj(c[sup])[None, :] - np.conj(g) * d[sup][None, :]
        other = g * np.conj(c[rest])[None, :] - np.conj(g) * d[rest][None, :]
        return red.expect_displacement(alpha) * np.exp(-0.5 * np.sum(np.abs(other) ** 2, axis=1))

    grid = measure.wigner_from_chi(chi, spec, label="stretched")
    grid.meta.update(c_error=coeffs.target_error(), d_max=coeffs.d_max)
    return grid


@dataclass
class GaussianFit:
    sigma_major: float
    sigma_minor: float
    angle: float
    r_eff: float


def effective_squeezing(grid: measure.WignerGrid) -> GaussianFit:
    """Fit a centered 2-D Gaussian and report half the log of its axis ratio."""
    qq, pp = np.meshgrid(grid.q, grid.p, indexing="ij")
    w = grid.w
    pos = np.clip(w, 0, None)
    tot = pos.sum()
    cov0 = np.array([[np.sum(pos * qq * qq), np.sum(pos * qq * pp)],
                     [np.sum(pos * qq * pp), np.sum(pos * pp * pp)]]) / tot
    ev, vec = np.linalg.eigh(cov0)
    ev = np.clip(ev, 1e-6, None)
    x0 = [np.log(np.sqrt(ev[1])), np.log(np.sqrt(ev[0])), np.arctan2(vec[1, 1], vec[0, 1]),
          float(w.max())]

    def model(xy, log_a, log_b, ang, amp):
        q, p = xy
        c, s = np.cos(ang), np.sin(ang)
        u = c * q + s * p
        v = -s * q + c * p
        return amp * np.exp(-0.5 * (u / np.exp(log_a)) ** 2 - 0.5 * (v / np.exp(log_b)) ** 2)

    xy = np.vstack([qq.ravel(), pp.ravel()])
    popt, _ = optimize.curve_fit(model, xy, w.ravel(), p0=x0, maxfev=20000)
    a, b = np.exp(popt[0]), np.exp(popt[1])
    major, minor = max(a, b), min(a, b)
    ang = popt[2] if a >= b else popt[2] + np.pi / 2
    return GaussianFit(float(major), float(minor), float(np.mod(ang, np.pi)),
                       float(0.5 * np.log(major / minor)))
