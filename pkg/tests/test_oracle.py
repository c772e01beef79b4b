import numpy as np
import pytest

from spdcring import oracle


def test_zero_coupling_keeps_initial_state():
    model = oracle.TinyModel(lam=0.0, x0=2.0, n_pump=20, n_pair=10)
    run = oracle.full_evolve(model, 2.0, dt=0.1)
    assert abs(np.vdot(run.kets[0], run.kets[-1])) == pytest.approx(1.0, abs=1e-12)


def test_oracle_conserves_charge():
    model = oracle.TinyModel(lam=0.1, x0=3.0)
    run = oracle.full_evolve(model, 5.0, dt=0.01, save_every=50)
    np.testing.assert_allclose(run.charge, run.charge[0], rtol=1e-10)


def test_oracle_flags_cutoff():
    with pytest.raises(oracle.CutoffError):
        oracle.full_evolve(oracle.TinyModel(lam=0.3, x0=3.0, n_pump=20, n_pair=4), 5.0, dt=0.05)


@pytest.fixture(scope="module")
def resonant():
    return oracle.compare_pipeline(oracle.TinyModel(lam=0.1, x0=3.0), 5.0, cutoff=14,
                                   wigner_points=21)


def test_factorized_pipeline_matches_oracle(resonant):
    assert resonant.depletion > 0.1
    assert resonant.fidelity >= 0.999
    assert resonant.n_pump[1] == pytest.approx(resonant.n_pump[0], rel=1e-3)
    assert resonant.n_signal[1] == pytest.approx(resonant.n_signal[0], rel=1e-2)
    assert resonant.wigner_delta < 1e-2


def test_gaussian_alone_misses_depletion(resonant):
    assert resonant.fidelity_gaussian < 0.95
    assert resonant.fidelity - resonant.fidelity_gaussian > 0.05


def test_undepleted_limit_is_gaussian():
    cmp = oracle.compare_pipeline(oracle.TinyModel(lam=0.01, x0=3.0, n_pump=30, n_pair=10),
                                  5.0, cutoff=4)
    assert cmp.depletion < 0.01
    assert cmp.fidelity_gaussian > 0.99
    assert cmp.fidelity >= 0.9999


def test_moving_basis_term_matters_when_detuned():
    model = oracle.TinyModel(lam=0.1, x0=3.0, ws=1.0)
    with_drift = oracle.compare_pipeline(model, 5.0, cutoff=12)
    without = oracle.compare_pipeline(model, 5.0, cutoff=12, include_drift=False)
    assert with_drift.fidelity >= 0.999
    assert without.fidelity < with_drift.fidelity - 1e-3
