"""Brute-force reference for one pump, one signal and one idler mode.

The full ket of the trilinear Hamiltonian is propagated directly in Fock
space and compared with the Gaussian times residual-ket factorization
produced by the main pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import expm_multiply

from . import decomp, gaussian, nongauss
from .model import DenseCoupling


class CutoffError(RuntimeError):
    """Too much probability reached the Fock cutoff."""


@dataclass
class TinyModel:
    """Single-mode instance of the three-wave Hamiltonian (scaled units).

    The coupling is ``lam * exp(i (ws + wi - wp) t)``. Only states with equal
    signal and idler numbers are reachable from the initial state, so the
    basis is ``|n_P, n, n>`` with ``n`` the pair number.
    """

    lam: complex = 0.1
    x0: complex = 3.0
    ws: float = 0.0
    wi: float = 0.0
    wp: float = 0.0
    n_pump: int = 30
    n_pair: int = 80
    t0: float = 0.0

    @property
    def dim(self) -> int:
        return (self.n_pump + 1) * (self.n_pair + 1)

    def coupling(self) -> DenseCoupling:
        return DenseCoupling(np.array([[[self.lam]]], complex), np.array([self.ws]),
                             np.array([self.wi]), np.array([self.wp]))

    def _ops(self):
        npmp = np.arange(self.n_pump + 1)
        npair = np.arange(self.n_pair + 1)
        b = sparse.diags(np.sqrt(npmp[1:]), 1)
        # a_S a_I on the pair ladder |n, n> -> n |n-1, n-1>
        pair_lower = sparse.diags(npair[1:].astype(float), 1)
        ip = sparse.identity(self.n_pump + 1)
        iq = sparse.identity(self.n_pair + 1)
        return (sparse.kron(b, iq).tocsr(), sparse.kron(ip, pair_lower).tocsr(),
                np.repeat(npmp, self.n_pair + 1), np.tile(npair, self.n_pump + 1))

    def hamiltonian(self, t: float) -> sparse.csr_matrix:
        b, pl, _, _ = self._ops()
        lam_t = self.lam * np.exp(1j * (self.ws + self.wi - self.wp) * t)
        term = lam_t * (pl.conj().T @ b)
        return (term + term.conj().T).tocsr()

    def initial(self) -> np.ndarray:
        n = np.arange(self.n_pump + 1)
        from scipy.special import gammaln
        amp = np.exp(-0.5 * abs(self.x0) ** 2 + n * np.log(abs(self.x0) + 1e-300) - 0.5 * gammaln(n + 1))
        amp = amp * np.exp(1j * n * np.angle(self.x0))
        psi = np.zeros(self.dim, complex)
        psi[:: self.n_pair + 1] = amp
        return psi / np.linalg.norm(psi)

    def observables(self, psi: np.ndarray) -> dict:
        _, _, n_p, n_q = self._ops()
        prob = np.abs(psi) ** 2
        edge = (n_p == self.n_pump) | (n_q == self.n_pair)
        return {"n_pump": float(prob @ n_p), "n_signal": float(prob @ n_q),
                "charge": float(prob @ (2 * n_p + 2 * n_q)), "edge": float(prob[edge].sum())}


@dataclass
class OracleRun:
    times: np.ndarray
    kets: list
    charge: np.ndarray


def full_evolve(model: TinyModel, t1: float, dt: float = 0.01, save_every: int = 1,
                edge_tol: float = 1e-6) -> OracleRun:
    """Propagate the full ket with frozen-midpoint exponentials."""
    n = max(1, int(np.ceil((t1 - model.t0) / dt - 1e-9)))
    h = (t1 - model.t0) / n
    psi = model.initial()
    times, kets, charge = [model.t0], [psi], [model.observables(psi)["charge"]]
    for k in range(n):
        t = model.t0 + k * h
        psi = expm_multiply(-1j * h * model.hamiltonian(t + 0.5 * h), psi)
        if (k + 1) % save_every == 0 or k + 1 == n:
            obs = model.observables(psi)
            if obs["edge"] > edge_tol:
                raise CutoffError(f"edge probability {obs['edge']:.2e}")
            times.append(t + h)
            kets.append(psi)
            charge.append(obs["charge"])
    return OracleRun(np.array(times), kets, np.array(charge))


def _pair_squeeze(model: TinyModel, j: complex) -> np.ndarray:
    """``S(J) = exp(J a_S+ a_I+ - h.c.)`` on the pair ladder."""
    n = np.arange(model.n_pair + 1)
    raise_ = np.diag(n[1:].astype(float), -1).astype(complex)
    return linalg.expm(j * raise_ - np.conj(j) * raise_.conj().T)


def _displace(model: TinyModel, x: complex) -> np.ndarray:
    n = np.arange(model.n_pump + 1)
    b = np.diag(np.sqrt(n[1:]), 1).astype(complex)
    return linalg.expm(x * b.conj().T - np.conj(x) * b)


def compose(model: TinyModel, state: gaussian.GaussianState, joint: decomp.JointSvd,
            pump: decomp.PumpSvd, ket: Optional[nongauss.FockKet]) -> np.ndarray:
    """``U |psi~>`` written in the oracle basis.

    ``ket=None`` stands for the vacuum residual ket (Gaussian-only answer).
    """
    amp = np.zeros((model.n_pump + 1, model.n_pair + 1), complex)
    if ket is None:
        amp[0, 0] = 1.0
    else:
        gs = joint.g_s[0, 0]
        gi = joint.g_i[0, 0]
        xp = pump.x[0, 0]
        for occ, c in zip(ket.basis.occ, ket.coeffs):
            n_s, n_i, n_p = occ
            if n_s != n_i:
                continue
            if n_p > model.n_pump or n_s > model.n_pair:
                continue
            amp[n_p, n_s] += c * np.conj(gs) ** n_s * gi ** n_i * xp ** n_p
    sq = decomp.extract_squeezer(state)
    phase = np.exp(1j * (sq.phi_s[0, 0] + sq.phi_i[0, 0]) * np.arange(model.n_pair + 1))
    amp = amp * phase[None, :]
    amp = amp @ _pair_squeeze(model, sq.j[0, 0]).T
    amp = _displace(model, state.x[0]) @ amp
    return amp.reshape(-1)


@dataclass
class Comparison:
    fidelity: float
    fidelity_gaussian: float
    n_pump: tuple
    n_signal: tuple
    depletion: float
    wigner_delta: float = float("nan")

    def report(self) -> str:
        lines = [f"fidelity (Gaussian x residual) {self.fidelity:.6f}",
                 f"fidelity (Gaussian only)       {self.fidelity_gaussian:.6f}",
                 f"pump photons   oracle {self.n_pump[0]:.5f} pipeline {self.n_pump[1]:.5f}",
                 f"signal photons oracle {self.n_signal[0]:.5f} pipeline {self.n_signal[1]:.5f}",
                 f"depletion {self.depletion:.4f}",
                 f"pump Wigner max deviation {self.wigner_delta:.2e}"]
        return "\n".join(lines)


def pump_density(model: TinyModel, psi: np.ndarray) -> np.ndarray:
    """Reduced density matrix of the pump mode."""
    amp = psi.reshape(model.n_pump + 1, model.n_pair + 1)
    return amp @ amp.conj().T


def compare_pipeline(model: TinyModel, t1: float, dt: float = 0.05, cutoff: int = 12,
                     gauss_dt: float = 0.005, include_drift: bool = True,
                     wigner_points: int = 0) -> Comparison:
    """Run both routes to ``t1`` and compare the final kets.

    Args:
        include_drift: keep the moving-basis term in the residual evolution.
        wigner_points: if positive, also compare pump-mode Wigner samples on
            a square grid with this many points per axis.
    """
    oracle = full_evolve(model, t1, dt=dt / 5)
    psi_o = oracle.kets[-1]
    coupling = model.coupling()
    s0 = gaussian.GaussianState.initial(model.t0, np.array([model.x0]), 1, 1)
    run = gaussian.integrate(s0, coupling, t1, gauss_dt, save_every=dt / 2)
    trunc = nongauss.Truncation(1, 1, cutoff)
    series = nongauss.decompose_run(run, coupling, trunc, factored=False)
    ng = nongauss.evolve(series, trunc, dt=dt, include_drift=include_drift)
    joint, pump = series.joints[-1], series.pumps[-1]
    psi_p = compose(model, run.final, joint, pump, ng.ket)
    psi_g = compose(model, run.final, joint, pump, None)
    fid = abs(np.vdot(psi_o, psi_p)) ** 2 / np.vdot(psi_p, psi_p).real
    fid_g = abs(np.vdot(psi_o, psi_g)) ** 2 / np.vdot(psi_g, psi_g).real
    obs_o = model.observables(psi_o)
    obs_p = model.observables(psi_p / np.linalg.norm(psi_p))
    delta = float("nan")
    if wigner_points > 0:
        from .measure import wigner_parity
        ext = abs(model.x0) + 2.0
        axis = np.linspace(-ext, ext, wigner_points)
        w_o = wigner_parity(pump_density(model, psi_o), axis, axis)
        w_p = wigner_parity(pump_density(model, psi_p / np.linalg.norm(psi_p)), axis, axis)
        delta = float(np.abs(w_o - w_p).max())
    return Comparison(float(fid), float(fid_g), (obs_o["n_pump"], obs_p["n_pump"]),
                      (obs_o["n_signal"], obs_p["n_signal"]),
                      1 - obs_o["n_pump"] / abs(model.x0) ** 2, delta)
