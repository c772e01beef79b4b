import numpy as np
import pytest
from dataclasses import replace

from conftest import small_params
from spdcring import gaussian, pipeline
from spdcring.model import (ConfigError, DenseCoupling, Resonance, build_coupling,
                            default_params, initial_pump)


def test_loaded_quality_factor_and_linewidth():
    res = Resonance(1557.85, 1e6, 0.95)
    assert res.loaded_q == pytest.approx(5e4)
    assert res.half_linewidth == pytest.approx(res.omega / 1e5)


@pytest.mark.parametrize("kw", [dict(escape_efficiency=0.0), dict(escape_efficiency=1.2),
                                dict(n_k=0), dict(half_span=-1.0), dict(q_int=-5.0)])
def test_invalid_resonance_rejected(kw):
    base = dict(wavelength_nm=1557.85, q_int=1e6, escape_efficiency=0.9)
    base.update(kw)
    with pytest.raises(ConfigError):
        Resonance(**base)


def test_lossless_resonance_needs_loaded_q():
    with pytest.raises(ConfigError):
        Resonance(1557.85, 1e6, 1.0)
    assert Resonance(1557.85, np.inf, 1.0, q_load=5e4).loaded_q == 5e4


def test_negative_energy_rejected():
    with pytest.raises(ConfigError):
        default_params(pump_energy=-1.0)


def test_initial_pump_photon_number():
    p = default_params(pump_energy=0.09e-12)
    x = initial_pump(p)
    assert np.vdot(x, x).real == pytest.approx(p.pump_photons, rel=1e-3)


def test_phantom_channel_weight():
    p = small_params(eta=0.8)
    c = build_coupling(p)
    n = p.signal.n_k
    ratio = np.sum(np.abs(c.fs[n:]) ** 2) / np.sum(np.abs(c.fs[:n]) ** 2)
    assert ratio == pytest.approx(0.25, rel=1e-12)


def test_rank_one_coupling_matches_dense(rng):
    p = small_params()
    c = build_coupling(p)
    dense = DenseCoupling(c.tensor(0.0), c.ws + c.mismatch, c.wi, c.wp)
    t = 1.7
    np.testing.assert_allclose(dense.tensor(t), c.tensor(t), atol=1e-14)
    n = c.fs.size
    x = rng.normal(size=c.fp.size) + 1j * rng.normal(size=c.fp.size)
    mat = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    np.testing.assert_allclose(c.z_times(x, t, mat), dense.z_times(x, t, mat), atol=1e-10)
    np.testing.assert_allclose(c.zt_times(x, t, mat), dense.zt_times(x, t, mat), atol=1e-10)
    np.testing.assert_allclose(c.delta(mat, mat.T, t), dense.delta(mat, mat.T, t), atol=1e-10)


def test_rhs_rank_one_matches_dense(bog=None):
    p = small_params(0.2)
    c = build_coupling(p)
    dense = DenseCoupling(c.tensor(0.0), c.ws + c.mismatch, c.wi, c.wp)
    s0 = gaussian.GaussianState.initial(-3.0, initial_pump(p), c.fs.size, c.fi.size)
    run = gaussian.integrate(s0, c, 2.0, 0.02)
    for a, b in zip(gaussian.rhs(run.final, c), gaussian.rhs(run.final, dense)):
        np.testing.assert_allclose(a, b, atol=1e-10 * max(1.0, np.abs(b).max()))


def test_group_velocity_does_not_change_observables():
    p = small_params(0.05)
    slow = replace(p, signal=replace(p.signal, group_velocity=p.signal.group_velocity / 2),
                   idler=replace(p.idler, group_velocity=p.idler.group_velocity / 2),
                   pump=replace(p.pump, group_velocity=p.pump.group_velocity / 2))
    a = pipeline.run_gaussian(p)
    b = pipeline.run_gaussian(slow)
    assert b.efficiency == pytest.approx(a.efficiency, rel=1e-6)
    assert b.homodyne().min_noise == pytest.approx(a.homodyne().min_noise, rel=1e-6)


def test_start_time_does_not_change_observables():
    # the discrete pump spectrum repeats the pulse every 2 pi / dk; the fine
    # pump grid keeps the neighbouring image out of the longer window
    p = small_params(0.05, n_k_pump=241)
    early = replace(p, t0_pulse=-6.0)
    a = pipeline.run_gaussian(p)
    b = pipeline.run_gaussian(early)
    assert b.efficiency == pytest.approx(a.efficiency, rel=1e-5)
    assert b.homodyne().min_noise == pytest.approx(a.homodyne().min_noise, rel=1e-5)
