"""End-to-end runs shared by the command line and the acceptance suite."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import decomp, gaussian, measure, nongauss, stretch
from .model import SystemParams, build_coupling, initial_pump


@dataclass
class GaussianResult:
    params: SystemParams
    final: gaussian.GaussianState
    n_pump0: float
    dyson: Optional[gaussian.PerturbativeCheck] = None

    @property
    def efficiency(self) -> float:
        return gaussian.conversion_efficiency(self.final, self.n_pump0)

    @property
    def depletion(self) -> float:
        return gaussian.depletion(self.final, self.n_pump0)

    @property
    def signal_photons(self) -> float:
        return float(np.trace(gaussian.moments(self.final).n_ss).real)

    def homodyne(self) -> measure.HomodyneResult:
        return measure.optimal_homodyne(measure.ActualMoments.from_state(self.final))

    def joint(self) -> decomp.JointSvd:
        return decomp.joint_svd(self.final)


def _initial(p: SystemParams) -> gaussian.GaussianState:
    n = 2 * p.signal.n_k
    return gaussian.GaussianState.initial(p.t0_time, initial_pump(p), n, n)


def run_gaussian(p: SystemParams, dt: float = 0.02, dyson: bool = False) -> GaussianResult:
    """Gaussian evolution from the start to the stop time."""
    coupling = build_coupling(p)
    s0 = _initial(p)
    run = gaussian.integrate(s0, coupling, p.t1_time, dt, record_dyson=dyson)
    check = gaussian.perturbative_norm(run) if dyson else None
    return GaussianResult(p, run.final, run.n_pump0, check)


@dataclass
class NonGaussResult:
    gauss: GaussianResult
    series: nongauss.SupermodeSeries
    run: nongauss.NonGaussRun
    joint: decomp.JointSvd  # full final decomposition in the gauge of the ket

    @property
    def ket(self) -> nongauss.FockKet:
        return self.run.ket


def start_time(check: gaussian.PerturbativeCheck, rel: float = 1e-10) -> float:
    """First time at which the first-order residual norm is no longer negligible."""
    if check.norm1 <= 0:
        return float(check.times[-1])
    k = int(np.searchsorted(check.series, rel * check.norm1))
    return float(check.times[min(k, len(check.times) - 1)])


def run_nongauss(p: SystemParams, trunc: nongauss.Truncation, dt_gauss: float = 0.02,
                 dt: float = 0.1, extra: int = 4, include_drift: bool = True,
                 start_rel: float = 1e-10) -> NonGaussResult:
    """Gaussian pass, supermode decomposition and residual-ket evolution.

    A first Gaussian pass records the first-order residual norm; the residual
    ket is vacuum to that order before it becomes non-negligible, so the
    second pass stores compact decompositions only from that time on.
    """
    coupling = build_coupling(p)
    pre = run_gaussian(p, dt_gauss, dyson=True)
    save = dt / 2
    start = min(start_time(pre.dyson, start_rel), p.t1_time - 2 * dt)
    keep = trunc.m + extra
    run = gaussian.integrate(_initial(p), coupling, p.t1_time, dt_gauss, save_every=save,
                             on_save=nongauss.compact_joint(keep), save_from=start)
    series = nongauss.decompose_run(run, coupling, trunc, extra=extra)
    ng = nongauss.evolve(series, trunc, dt=dt, include_drift=include_drift)
    full = stretch.extend_joint(series.joints[-1], decomp.joint_svd(run.final))
    return NonGaussResult(GaussianResult(p, run.final, run.n_pump0, pre.dyson), series, ng, full)
