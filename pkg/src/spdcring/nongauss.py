"""Residual non-Gaussian ket in a truncated supermode Fock basis.

The ket is expanded over a few leading signal, idler and pump supermodes.
Its Hamiltonian is the trilinear supermode interaction plus the
number-conserving term generated by the time dependence of the supermodes.
Each step applies the exact exponential of the frozen sparse Hamiltonian.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import expm_multiply

from . import decomp
from .gaussian import GaussianRun


class TruncationError(RuntimeError):
    """Requested truncation exceeds the memory budget."""


class EvolutionError(RuntimeError):
    """The propagated ket lost normalization."""


@dataclass(frozen=True)
class Truncation:
    """``m`` signal and idler supermodes, ``l`` pump supermodes, cutoff ``n``."""

    m: int = 2
    l: int = 1
    n: int = 16
    budget: int = 2_000_000

    def __post_init__(self):
        if min(self.m, self.l, self.n) < 1:
            raise ValueError("m, l and n must all be at least 1")

    @property
    def n_modes(self) -> int:
        return 2 * self.m + self.l

    def labels(self) -> List[str]:
        return ([f"S{u + 1}" for u in range(self.m)] + [f"I{u + 1}" for u in range(self.m)]
                + [f"P{u + 1}" for u in range(self.l)])


class FockBasis:
    """Occupation-number basis, optionally restricted to equal signal and idler totals.

    The restriction is exact for kets starting in vacuum because every term of
    the Hamiltonian changes the total signal and idler numbers together.
    """

    def __init__(self, trunc: Truncation, sector: bool = True):
        self.trunc = trunc
        self.sector = sector
        m, n = trunc.m, trunc.n
        size = self.count(trunc, sector)
        if size > trunc.budget:
            raise TruncationError(f"{size} basis states exceed the budget {trunc.budget}")
        if sector:
            side = np.array(list(itertools.product(range(n + 1), repeat=m)), dtype=np.int64)
            tot = side.sum(axis=1)
            pumps = np.array(list(itertools.product(range(n + 1), repeat=trunc.l)), dtype=np.int64)
            blocks = []
            for k in np.unique(tot):
                s = side[tot == k]
                si = np.array([np.concatenate([a, b]) for a in s for b in s])
                blocks.append(np.hstack([np.repeat(si, len(pumps), axis=0),
                                         np.tile(pumps, (len(si), 1))]))
            occ = np.vstack(blocks)
        else:
            occ = np.array(list(itertools.product(range(n + 1), repeat=trunc.n_modes)), dtype=np.int64)
        self.radix = (n + 1) ** np.arange(trunc.n_modes)[::-1]
        keys = occ @ self.radix
        order = np.argsort(keys)
        self.occ = occ[order]
        self.keys = keys[order]

    @staticmethod
    def count(trunc: Truncation, sector: bool = True) -> int:
        """Basis size without enumerating it."""
        n = trunc.n
        if not sector:
            return (n + 1) ** trunc.n_modes
        # ways[k]: number of m-mode occupations with total k
        ways = np.ones(1, dtype=object)
        for _ in range(trunc.m):
            ways = np.convolve(ways, np.ones(n + 1, dtype=object))
        return int(np.sum(ways * ways)) * (n + 1) ** trunc.l

    @property
    def dim(self) -> int:
        return len(self.occ)

    def index(self, occ: np.ndarray) -> np.ndarray:
        """Row indices of occupation vectors, ``-1`` where absent."""
        occ = np.atleast_2d(occ)
        bad = np.any((occ < 0) | (occ > self.trunc.n), axis=1)
        keys = np.where(bad, -1, occ @ self.radix)
        pos = np.clip(np.searchsorted(self.keys, keys), 0, self.dim - 1)
        found = (self.keys[pos] == keys) & ~bad
        return np.where(found, pos, -1)

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, complex)
        v[self.index(np.zeros(self.trunc.n_modes, dtype=np.int64))[0]] = 1.0
        return v

    def ladder(self, ops: Sequence) -> tuple:
        """Matrix entries of a product of ladder operators.

        Args:
            ops: ``(mode, dagger)`` pairs, applied right to left.

        Returns:
            ``(rows, cols, amplitudes)`` of the nonzero entries.
        """
        occ = self.occ.copy()
        amp = np.ones(self.dim)
        for mode, dag in reversed(list(ops)):
            if dag:
                occ[:, mode] += 1
                amp *= np.sqrt(occ[:, mode])
            else:
                amp *= np.sqrt(occ[:, mode])
                occ[:, mode] -= 1
        rows = self.index(occ)
        keep = (rows >= 0) & (amp != 0)
        return rows[keep], np.nonzero(keep)[0], amp[keep]


@dataclass
class FockKet:
    """Coefficients of the residual ket in a :class:`FockBasis`."""

    coeffs: np.ndarray
    basis: FockBasis
    t: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.vdot(self.coeffs, self.coeffs).real)

    def tensor(self) -> np.ndarray:
        """Dense coefficient tensor with one axis per mode (S..., I..., P...)."""
        tr = self.basis.trunc
        out = np.zeros((tr.n + 1) ** tr.n_modes, complex)
        out[self.basis.keys] = self.coeffs
        return out.reshape((tr.n + 1,) * tr.n_modes)

    def populations(self) -> np.ndarray:
        return supermode_populations(self)

    def boundary_weight(self) -> float:
        """Probability of any mode sitting at the cutoff."""
        edge = np.any(self.basis.occ == self.basis.trunc.n, axis=1)
        return float(np.sum(np.abs(self.coeffs[edge]) ** 2))


def supermode_populations(ket: FockKet) -> np.ndarray:
    """Mean photon number in each retained mode."""
    prob = np.abs(ket.coeffs) ** 2
    return prob @ ket.basis.occ


class HamiltonianBuilder:
    """Sparse supermode Hamiltonian with a fixed sparsity pattern.

    Coefficients are collected in one vector; the matrix data follow from a
    precomputed scatter so that rebuilding per step costs one ``bincount``.
    """

    def __init__(self, basis: FockBasis):
        self.basis = basis
        tr = basis.trunc
        m, l = tr.m, tr.l
        s = lambda u: u
        i = lambda u: m + u
        p = lambda lam: 2 * m + lam
        self.families = {}
        terms = []
        # trilinear families, each added with its Hermitian conjugate
        for lam, u, v in itertools.product(range(l), range(m), range(m)):
            terms.append(("aa", (lam, u, v), [(p(lam), True), (i(v), False), (s(u), False)]))
            terms.append(("ca_i", (lam, u, v), [(p(lam), True), (i(u), True), (i(v), False)]))
            terms.append(("ca_s", (lam, u, v), [(p(lam), True), (s(v), True), (s(u), False)]))
            terms.append(("cc", (lam, u, v), [(p(lam), True), (i(u), True), (s(v), True)]))
        n_tri = len(terms)
        # number-conserving drift, already Hermitian as a whole
        for u, v in itertools.product(range(m), range(m)):
            terms.append(("ks", (u, v), [(s(v), True), (s(u), False)]))
            terms.append(("ki", (u, v), [(i(v), True), (i(u), False)]))
        for a, b in itertools.product(range(l), range(l)):
            terms.append(("kp", (a, b), [(p(b), True), (p(a), False)]))
        self.terms = [(name, idx) for name, idx, _ in terms]
        rows, cols, amps, which, conj = [], [], [], [], []
        for k, (_, _, ops) in enumerate(terms):
            r, c, a = basis.ladder(ops)
            rows.append(r); cols.append(c); amps.append(a)
            which.append(np.full(r.size, k)); conj.append(np.zeros(r.size, bool))
            if k < n_tri:
                rows.append(c); cols.append(r); amps.append(a)
                which.append(np.full(r.size, k)); conj.append(np.ones(r.size, bool))
        rows = np.concatenate(rows); cols = np.concatenate(cols)
        self._amp = np.concatenate(amps)
        self._which = np.concatenate(which)
        self._conj = np.concatenate(conj)
        keys = rows * basis.dim + cols
        uniq, self._slot = np.unique(keys, return_inverse=True)
        self._rows = uniq // basis.dim
        self._cols = uniq % basis.dim
        order = np.lexsort((self._cols, self._rows))
        assert np.all(order == np.arange(order.size))
        self._indptr = np.searchsorted(self._rows, np.arange(basis.dim + 1))
        self.n_terms = len(terms)
        self._index = {t: k for k, t in enumerate(self.terms)}

    def coefficient_vector(self, heff: dict, drift: Optional[dict] = None) -> np.ndarray:
        """Flatten family coefficient arrays into the builder's term order."""
        vec = np.zeros(self.n_terms, complex)
        for k, (name, idx) in enumerate(self.terms):
            src = heff if name in ("aa", "ca_i", "ca_s", "cc") else drift
            if src is not None and name in src:
                vec[k] = src[name][idx]
        return vec

    def matrix(self, coeffs: np.ndarray) -> sparse.csr_matrix:
        vals = coeffs[self._which]
        vals = np.where(self._conj, np.conj(vals), vals) * self._amp
        n = self._rows.size
        data = (np.bincount(self._slot, weights=vals.real, minlength=n)
                + 1j * np.bincount(self._slot, weights=vals.imag, minlength=n))
        return sparse.csr_matrix((data, self._cols, self._indptr),
                                 shape=(self.basis.dim, self.basis.dim))


def heff_coefficients(joint: decomp.JointSvd, pump: decomp.PumpSvd, trunc: Truncation) -> dict:
    """Coefficients of the four trilinear families on the retained supermodes.

    With ``T[l, u, v] = D_l Qh[l, u, v]`` (``u`` a signal index, ``v`` an
    idler index) the families are ``B+ A_Iv A_Su``, ``B+ A+_Iu A_Iv``,
    ``B+ A+_Sv A_Su`` and ``B+ A+_Iu A+_Sv``.
    """
    m, l = trunc.m, trunc.l
    t = pump.d[:l, None, None] * pump.qh[:l, :m, :m]
    c = np.cosh(joint.r[:m])
    s = np.sinh(joint.r[:m])
    return {
        "aa": t * np.outer(c, c)[None],
        "ca_i": t * np.outer(s, c)[None],
        "ca_s": t * np.outer(c, s)[None],
        "cc": t * np.outer(s, s)[None],
    }


def drift_generators(before: tuple, after: tuple, mid: tuple, dt: float, trunc: Truncation) -> dict:
    """Finite-difference generators of the moving supermode basis.

    Each argument is ``(JointSvd, PumpSvd)``; ``before`` and ``after`` straddle
    ``mid`` by ``dt`` in total. Returns the Hermitian coefficient blocks of
    the drift term, ``-i K`` with ``K`` made exactly anti-Hermitian.
    """
    m, l = trunc.m, trunc.l
    jb, pb = before
    ja, pa = after
    jm, pm = mid
    d_gs = (np.conj(ja.g_s[:m]) - np.conj(jb.g_s[:m])) / dt
    d_gi = (ja.g_i[:m] - jb.g_i[:m]) / dt
    d_x = (pa.x[:, :l] - pb.x[:, :l]) / dt
    k_s = d_gs @ jm.g_s[:m].T
    k_i = d_gi @ jm.g_i[:m].conj().T
    k_p = d_x.T @ np.conj(pm.x[:, :l])
    out = {}
    for name, k in (("ks", k_s), ("ki", k_i), ("kp", k_p)):
        k = 0.5 * (k - k.conj().T)
        out[name] = -1j * k
    return out


@dataclass
class SupermodeSeries:
    """Aligned decompositions on the Gaussian save grid."""

    times: np.ndarray
    joints: List[decomp.JointSvd]
    pumps: List[decomp.PumpSvd]
    events: list = field(default_factory=list)


def decompose_run(run: GaussianRun, coupling, trunc: Truncation, extra: int = 4,
                  factored: Optional[bool] = None) -> SupermodeSeries:
    """Joint and pump decompositions of every saved state, aligned in time.

    Saved entries may be Gaussian states or already computed (possibly
    truncated) joint decompositions, see :func:`compact_joint`.
    """
    if factored is None:
        factored = hasattr(coupling, "factors")
    keep = trunc.m + extra
    joints = []
    for s in run.states:
        j = s if isinstance(s, decomp.JointSvd) else decomp.joint_svd(s)
        joints.append(j.truncate(keep) if factored else j)
    aligned = decomp.smooth_phases(joints, track=keep)
    pumps = []
    for j in aligned.joints:
        if factored:
            pumps.append(decomp.pump_svd_factored(j, coupling, j.t, trunc.l))
        else:
            pumps.append(decomp.pump_svd(decomp.build_L(j, coupling, j.t), trunc.l, j.t))
    pumps = decomp.smooth_phases(aligned.joints, pumps, track=1).pumps
    return SupermodeSeries(aligned.times, aligned.joints, pumps, aligned.events)


def compact_joint(keep: int):
    """``on_save`` hook storing only the leading ``keep`` supermodes."""
    return lambda state: decomp.joint_svd(state).truncate(keep)


@dataclass
class NonGaussRun:
    """Time series of supermode populations and the final ket."""

    times: np.ndarray
    populations: np.ndarray
    ket: FockKet
    norm_drift: float
    boundary: float
    labels: List[str]


def evolve(series: SupermodeSeries, trunc: Truncation, dt: float = 0.1,
           start: Optional[float] = None, sector: bool = True,
           include_drift: bool = True, norm_tol: float = 1e-10,
           builder: Optional[HamiltonianBuilder] = None) -> NonGaussRun:
    """Propagate the residual ket from vacuum through the saved series.

    Args:
        series: aligned decompositions whose save spacing divides ``dt / 2``.
        trunc: retained modes and Fock cutoff.
        dt: propagation step; the Hamiltonian is frozen at each midpoint.
        start: first propagation time; the ket is vacuum before it.
        sector: use the equal-number sector basis.
        include_drift: add the moving-basis term.
        norm_tol: allowed norm drift per step.
        builder: reuse a prepared Hamiltonian builder.

    Returns:
        NonGaussRun with populations at every step.
    """
    times = series.times
    h = times[-1] - times[-2]
    stride = int(round(0.5 * dt / h))
    if stride < 1 or abs(2 * stride * h - dt) > 1e-6 * dt:
        raise ValueError("series spacing must divide dt/2")
    step = 2 * stride
    k0 = 0 if start is None else int(np.searchsorted(times, start - 1e-9))
    # steps are counted back from the last saved time; an earlier start is harmless
    back = (step - (len(times) - 1 - k0) % step) % step
    k0 = k0 - back if k0 >= back else k0 + (len(times) - 1 - k0) % step
    if not np.allclose(np.diff(times[k0:]), h, rtol=1e-6, atol=1e-9):
        raise ValueError("series must be uniformly spaced after the start time")
    basis = builder.basis if builder is not None else FockBasis(trunc, sector)
    builder = builder or HamiltonianBuilder(basis)
    psi = basis.vacuum()
    out_t = [times[k0]]
    pops = [supermode_populations(FockKet(psi, basis))]
    drift_max = 0.0
    k = k0
    while k + step < len(times):
        km = k + stride
        pair = lambda q: (series.joints[q], series.pumps[q])
        coeff = heff_coefficients(series.joints[km], series.pumps[km], trunc)
        drift = drift_generators(pair(k), pair(k + step), pair(km), times[k + step] - times[k], trunc) \
            if include_drift else None
        hmat = builder.matrix(builder.coefficient_vector(coeff, drift))
        psi = expm_multiply(-1j * (times[k + step] - times[k]) * hmat, psi)
        nrm = np.vdot(psi, psi).real
        drift_max = max(drift_max, abs(nrm - 1.0))
        if abs(nrm - 1.0) > norm_tol:
            raise EvolutionError(f"norm drift {abs(nrm - 1):.2e} at t={times[k + step]:.3f}")
        k += step
        out_t.append(times[k])
        pops.append(supermode_populations(FockKet(psi, basis)))
    ket = FockKet(psi, basis, times[k])
    return NonGaussRun(np.array(out_t), np.array(pops), ket, drift_max, ket.boundary_weight(),
                       trunc.labels())
