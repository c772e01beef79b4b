"""Gaussian part of the evolution: pump displacement plus Bogoliubov matrices.

The state is ``(x, V_SS, V_II, W_SI, W_IS)``; the equations of motion are
integrated with the classical fourth-order Runge-Kutta scheme on a fixed step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np


class ConvergenceError(RuntimeError):
    """Raised when an integration produces non-finite numbers or drifts."""


@dataclass
class GaussianState:
    """Gaussian unitary parameters at one instant (scaled time)."""

    t: float
    x: np.ndarray
    v_ss: np.ndarray
    v_ii: np.ndarray
    w_si: np.ndarray
    w_is: np.ndarray

    @classmethod
    def initial(cls, t0: float, x0: np.ndarray, n_s: int, n_i: int) -> "GaussianState":
        return cls(t0, np.asarray(x0, dtype=complex).copy(),
                   np.eye(n_s, dtype=complex), np.eye(n_i, dtype=complex),
                   np.zeros((n_s, n_i), complex), np.zeros((n_i, n_s), complex))

    def arrays(self):
        return (self.x, self.v_ss, self.v_ii, self.w_si, self.w_is)

    def copy(self) -> "GaussianState":
        return GaussianState(self.t, *(a.copy() for a in self.arrays()))


def rhs(state: GaussianState, coupling, t: Optional[float] = None):
    """Time derivatives of ``(x, V_SS, V_II, W_SI, W_IS)``."""
    t = state.t if t is None else t
    x, v_ss, v_ii, w_si, w_is = state.arrays()
    factors = getattr(coupling, "factors", None)
    if factors is None:
        dx = -1j * coupling.delta(w_si, v_ii, t)
        dv_ss = -1j * coupling.z_times(x, t, np.conj(w_is))
        dv_ii = -1j * coupling.zt_times(x, t, np.conj(w_si))
        dw_si = -1j * coupling.z_times(x, t, np.conj(v_ii))
        dw_is = -1j * coupling.zt_times(x, t, np.conj(v_ss))
        return dx, dv_ss, dv_ii, dw_si, dw_is
    # rank-one coupling: every update is an outer product
    a, b, c = factors(t)
    drive = -1j * coupling.scale * (c @ x)
    ua = drive * a
    ub = drive * b
    dv_ss = np.outer(ua, b @ np.conj(w_is))
    dv_ii = np.outer(ub, a @ np.conj(w_si))
    dw_si = np.outer(ua, b @ np.conj(v_ii))
    dw_is = np.outer(ub, a @ np.conj(v_ss))
    m = (np.conj(a) @ w_si) @ (v_ii.T @ np.conj(b))
    dx = -1j * coupling.scale * np.conj(c) * m
    return dx, dv_ss, dv_ii, dw_si, dw_is


def rk4_step(state: GaussianState, coupling, dt: float) -> GaussianState:
    """Advance one classical Runge-Kutta step."""
    t = state.t
    y = state.arrays()

    def shifted(k, h):
        return GaussianState(t + h, *(a + h * b for a, b in zip(y, k)))

    k1 = rhs(state, coupling, t)
    k2 = rhs(shifted(k1, dt / 2), coupling)
    k3 = rhs(shifted(k2, dt / 2), coupling)
    k4 = rhs(shifted(k3, dt), coupling)
    new = [a + dt / 6 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
    return GaussianState(t + dt, *new)


@dataclass
class GaussianRun:
    """Saved states of one Gaussian integration.

    ``dyson`` holds, at every integration step, the vectors needed for the
    first-order non-Gaussian norm (see :func:`perturbative_norm`).
    """

    states: list
    dt: float
    n_pump0: float
    dyson: Optional[dict] = field(default=None, repr=False)
    last: Optional[GaussianState] = field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def final(self) -> GaussianState:
        return self.last if self.last is not None else self.states[-1]


def _dyson_vectors(state: GaussianState, coupling):
    a, b, c = coupling.factors(state.t)
    p = np.conj(a) @ state.w_si
    q = np.conj(b) @ state.w_is
    return np.conj(c), p, q


def integrate(state0: GaussianState, coupling, t1: float, dt: float,
              save_every: float = None, record_dyson: bool = False,
              scale_hint: float = None, on_save: Callable = None,
              save_from: float = None, identity_tol: float = 1e-6) -> GaussianRun:
    """Integrate from ``state0.t`` to ``t1`` with step ``dt``.

    Args:
        state0: initial state.
        coupling: object with ``z_times``, ``zt_times`` and ``delta``.
        t1: final time (scaled units).
        dt: largest Runge-Kutta step; shortened so that it divides
            ``save_every`` (or the span when nothing is saved).
        save_every: exact spacing of saved states, counted back from ``t1``;
            ``None`` keeps only the two ends.
        record_dyson: keep the vectors for the perturbative norm.
        scale_hint: initial pump photon number, used for drift checks.
        on_save: optional map applied to each saved state; its result is
            stored instead of the state (the final state is always kept).
        save_from: skip saving before this time.
        identity_tol: Bogoliubov identity violation, relative to the squared
            largest entry of ``V_SS``, that aborts the run.

    Returns:
        GaussianRun with the saved states (always including both ends).
    """
    span = t1 - state0.t
    if save_every is None:
        n_steps = max(1, int(np.ceil(span / dt - 1e-9)))
        h = span / n_steps
        stride = n_steps
    else:
        # saves sit exactly on t1 - k * save_every; the first step absorbs the rest
        stride = max(1, int(np.ceil(save_every / dt - 1e-9)))
        h = save_every / stride
        n_steps = max(1, int(np.ceil(span / h - 1e-9)))
    grid = t1 - h * np.arange(n_steps, -1, -1)
    grid[0] = state0.t
    n_p0 = float(np.vdot(state0.x, state0.x).real) if scale_hint is None else scale_hint
    state = state0.copy()
    keep = (lambda st: st.copy()) if on_save is None else on_save
    start = -np.inf if save_from is None else save_from - 1e-9 * max(1.0, abs(save_from))
    saved = [keep(state)] if state.t >= start else []
    dys = {"t": [], "c": [], "p": [], "q": []} if record_dyson else None
    for step in range(n_steps):
        if dys is not None:
            c, p, q = _dyson_vectors(state, coupling)
            dys["t"].append(state.t)
            dys["c"].append(c)
            dys["p"].append(p)
            dys["q"].append(q)
        state = rk4_step(state, coupling, grid[step + 1] - grid[step])
        state.t = grid[step + 1]
        if (n_steps - step - 1) % stride == 0:
            if not all(np.all(np.isfinite(a)) for a in state.arrays()):
                raise ConvergenceError(f"non-finite Gaussian state at t={state.t:.3f}")
            res = relative_residual(state)
            if res > identity_tol:
                raise ConvergenceError(
                    f"Bogoliubov identities drift by {res:.1e} at t={state.t:.3f}; reduce dt")
            if state.t >= start:
                saved.append(keep(state))
    if dys is not None:
        c, p, q = _dyson_vectors(state, coupling)
        dys["t"].append(state.t)
        dys["c"].append(c)
        dys["p"].append(p)
        dys["q"].append(q)
        dys = {k: np.array(v) for k, v in dys.items()}
        dys["scale"] = getattr(coupling, "scale", None)
    return GaussianRun(saved, h, n_p0, dys, state.copy())


@dataclass
class Moments:
    """Second moments of the Gaussian ket."""

    m_si: np.ndarray
    n_ss: np.ndarray
    n_ii: np.ndarray


def moments(state: GaussianState) -> Moments:
    return Moments(state.w_si @ state.v_ii.T,
                   np.conj(state.w_si) @ state.w_si.T,
                   np.conj(state.w_is) @ state.w_is.T)


def pump_photons(state: GaussianState) -> float:
    return float(np.vdot(state.x, state.x).real)


def depletion(state: GaussianState, n_pump0: float) -> float:
    if n_pump0 <= 0:
        return 0.0
    return 1.0 - pump_photons(state) / n_pump0


def conversion_efficiency(state: GaussianState, n_pump0: float) -> float:
    """Generated signal photons (both channels) per incident pump photon."""
    if n_pump0 <= 0:
        return 0.0
    return float(np.trace(moments(state).n_ss).real) / n_pump0


def bogoliubov_residuals(state: GaussianState):
    """Max-abs violations of the two symplectic identities."""
    v, w = state.v_ss, state.w_si
    r1 = np.max(np.abs(v @ v.conj().T - w @ w.conj().T - np.eye(v.shape[0])))
    r2 = np.max(np.abs(v @ state.w_is.T - w @ state.v_ii.T))
    return float(r1), float(r2)


def relative_residual(state: GaussianState) -> float:
    """Identity violation over the squared largest entry of ``V_SS`` (at least one).

    Roundoff in the identities grows with the squared size of the matrices.
    """
    return max(bogoliubov_residuals(state)) / max(1.0, float(np.abs(state.v_ss).max()) ** 2)


@dataclass
class PerturbativeCheck:
    """First-order non-Gaussian correction to the vacuum residual ket.

    ``norm1`` is the squared norm at the final time and ``series`` the same
    quantity accumulated up to each integration step.
    """

    norm1: float
    times: np.ndarray
    series: np.ndarray


def _gram(rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return np.conj(rows) @ cols.T


def perturbative_norm(run: GaussianRun, block: int = 256) -> PerturbativeCheck:
    """Squared norm of the first-order residual ket, accumulated in time.

    The first-order amplitude is a time integral of a product of three
    vectors (pump, signal, idler); its norm is evaluated through Gram
    matrices of those vectors so that the full three-index amplitude is
    never formed.
    """
    if run.dyson is None:
        raise ValueError("integrate(..., record_dyson=True) is required")
    d = run.dyson
    c, p, q = d["c"], d["p"], d["q"]
    n = len(d["t"])
    gaps = np.diff(d["t"])
    w = np.zeros(n)
    w[:-1] += 0.5 * gaps
    w[1:] += 0.5 * gaps
    scale = d["scale"] if d["scale"] is not None else 1.0
    lower = np.zeros(n, complex)  # sum_{i<k} K_ik
    diag = np.zeros(n)
    for i0 in range(0, n, block):
        i1 = min(n, i0 + block)
        kb = _gram(c[i0:i1], c) * _gram(p[i0:i1], p) * _gram(q[i0:i1], q)
        kb *= (w[i0:i1, None] * w[None, :]) * scale ** 2
        rows = np.arange(i0, i1)[:, None]
        mask = rows < np.arange(n)[None, :]
        lower += np.where(mask, kb, 0).sum(axis=0)
        diag[i0:i1] = kb[np.arange(i1 - i0), np.arange(i0, i1)].real
    series = np.cumsum(diag + 2 * lower.real)
    return PerturbativeCheck(float(series[-1]), d["t"], series)


def perturbative_norm_dense(states, coupling) -> float:
    """Reference evaluation forming the full first-order amplitude.

    Trapezoid rule over the given states; only practical for small grids.
    """
    ts = np.array([s.t for s in states])
    amp = 0
    for k, s in enumerate(states):
        if k == 0:
            h = 0.5 * (ts[1] - ts[0])
        elif k == len(states) - 1:
            h = 0.5 * (ts[-1] - ts[-2])
        else:
            h = 0.5 * (ts[k + 1] - ts[k - 1])
        lam = np.conj(coupling.tensor(s.t))
        amp = amp + h * np.einsum("ijk,ia,jb->abk", lam, s.w_si, s.w_is)
    return float(np.sum(np.abs(amp) ** 2))
