import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import linalg
from scipy.special import factorial
from scipy.stats import unitary_group

from conftest import bogoliubov_state
from spdcring import decomp, gaussian, measure, nongauss

SPEC = measure.GridSpec(chi_points=48, chi_extent=6.0, out_points=41, out_extent=2.5)


def _moments(state):
    mom = gaussian.moments(state)
    return measure.ActualMoments(mom.n_ss, mom.n_ii, mom.m_si)


def _lossy(mom, eta):
    return measure.ActualMoments(eta * mom.n_ss, eta * mom.n_ii, eta * mom.m_si)


def _ket(coeff_fn, m=1, l=1, n=6, sector=False):
    basis = nongauss.FockBasis(nongauss.Truncation(m, l, n), sector=sector)
    c = np.array([coeff_fn(tuple(o)) for o in basis.occ], complex)
    return nongauss.FockKet(c / np.linalg.norm(c), basis)


# ----------------------------------------------------------------------------
# homodyne

def test_vacuum_noise_is_one(rng):
    mom = measure.ActualMoments.vacuum(3)
    res = measure.optimal_homodyne(mom)
    assert res.min_noise == pytest.approx(1.0) and res.max_noise == pytest.approx(1.0)
    assert not res.squeezed
    lo = measure.LocalOscillator.random(3, 3, rng)
    assert measure.quadrature_noise(lo, mom) == pytest.approx(1.0)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.0, 2.0), min_size=2, max_size=2), st.integers(0, 1000))
def test_two_mode_squeezing_eigenvalues(r, seed):
    state = bogoliubov_state(2, 2, np.array(r), seed)
    res = measure.optimal_homodyne(_moments(state))
    assert res.min_noise == pytest.approx(np.exp(-2 * max(r)), rel=1e-8, abs=1e-12)
    assert res.max_noise == pytest.approx(np.exp(2 * max(r)), rel=1e-8)
    assert res.lo.norm == pytest.approx(1.0)
    assert measure.quadrature_noise(res.lo, _moments(state)) == pytest.approx(res.min_noise, rel=1e-8)


def test_random_oscillators_never_beat_optimum(rng):
    state = bogoliubov_state(3, 3, np.array([1.2, 0.6, 0.3]), 4)
    mom = _lossy(_moments(state), 0.9)
    res = measure.optimal_homodyne(mom)
    noise = [measure.quadrature_noise(measure.LocalOscillator.random(3, 3, rng), mom)
             for _ in range(1000)]
    assert min(noise) >= res.min_noise - 1e-12
    assert max(noise) <= res.max_noise + 1e-9


@pytest.mark.parametrize("r,eta", [(0.5, 1.0), (1.0, 0.9), (2.0, 0.5)])
def test_lossy_two_mode_matches_analytic(r, eta):
    state = bogoliubov_state(1, 1, np.array([r]), 0)
    res = measure.optimal_homodyne(_lossy(_moments(state), eta))
    assert res.min_noise == pytest.approx(measure.analytic_min_noise(r, eta, eta), rel=1e-10)
    assert res.min_noise == pytest.approx(eta * np.exp(-2 * r) + 1 - eta, rel=1e-10)


def test_analytic_noise_unbalanced_loss():
    # unbalanced escape leaks anti-squeezing into the measured quadrature
    bal = measure.analytic_min_noise(2.0, 0.9, 0.9)
    unbal = measure.analytic_min_noise(2.0, 0.99, 0.81)
    assert unbal > bal
    with pytest.raises(ValueError):
        measure.analytic_min_noise(-1.0, 0.9, 0.9)


def test_unnormalized_oscillator_rejected():
    lo = measure.LocalOscillator(np.array([1.0 + 0j]), np.array([1.0 + 0j]))
    assert lo.norm == pytest.approx(1.0)
    bad = measure.LocalOscillator(2 * lo.f_s, lo.f_i)
    with pytest.raises(ValueError):
        measure.quadrature_noise(bad, measure.ActualMoments.vacuum(1))


def test_to_db():
    assert measure.to_db(0.1) == pytest.approx(-10.0)
    assert measure.to_db(0.5) == pytest.approx(-3.0103, abs=1e-4)


# ----------------------------------------------------------------------------
# displacements and Wigner functions

def test_displacement_matches_matrix_exponential():
    alpha = 0.7 - 0.4j
    big = 60
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    ref = linalg.expm(alpha * a.conj().T - np.conj(alpha) * a)[:8, :8]
    np.testing.assert_allclose(measure.displacement_matrices(alpha, 8), ref, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.complex_numbers(max_magnitude=2.0))
def test_displacement_inverse(alpha):
    d = measure.displacement_matrices(np.array([alpha, -alpha]), 60)
    np.testing.assert_allclose((d[1] @ d[0])[:6, :6], np.eye(6), atol=1e-10)
    np.testing.assert_allclose(d[1], d[0].conj().T, atol=1e-12)


def test_vacuum_wigner_peak():
    ket = _ket(lambda o: 1.0 if sum(o) == 0 else 0.0, n=2)
    grid = measure.mode_wigner(ket, [0], [1.0], SPEC)
    assert grid.w.max() == pytest.approx(2 / np.pi, rel=1e-6)
    assert grid.norm == pytest.approx(1.0, abs=1e-4)
    assert measure.negativity_volume(grid) < 1e-6


def test_single_photon_wigner():
    ket = _ket(lambda o: 1.0 if o == (1, 0, 0) else 0.0, n=2)
    grid = measure.mode_wigner(ket, [0], [1.0], SPEC)
    np.testing.assert_allclose(grid.w, measure.fock_wigner(1, grid.q, grid.p), atol=1e-6)
    assert grid.w[20, 20] == pytest.approx(-2 / np.pi, rel=1e-6)
    # closed form of the negative volume of |1>: 4 exp(-1/2) - 2
    assert measure.negativity_volume(grid) == pytest.approx(4 * np.exp(-0.5) - 2, abs=2e-3)


def test_parity_route_matches_characteristic_route(rng):
    coeff = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    ket = _ket(lambda o: coeff[o[0], o[1]] if o[2] == 0 and max(o) < 5 else 0.0, n=4)
    red = measure.ReducedKet(ket, [0])
    grid = measure.mode_wigner(ket, [0], [1.0], SPEC, reduced=red)
    ref = measure.wigner_parity(red.density(), grid.q, grid.p)
    np.testing.assert_allclose(grid.w, ref, atol=1e-6)
    assert grid.imag_residue < 1e-8


def test_squeezed_vacuum_has_no_negativity():
    r = 0.5
    def coeff(o):
        if o[1] or o[2] or o[0] % 2:
            return 0.0
        k = o[0] // 2
        return (-np.tanh(r)) ** k * np.sqrt(factorial(2 * k)) / (2 ** k * factorial(k))
    ket = _ket(coeff, n=24)
    spec = measure.GridSpec(chi_points=48, chi_extent=6.0, out_points=61, out_extent=4.0)
    grid = measure.mode_wigner(ket, [0], [1.0], spec)
    assert measure.negativity_volume(grid) < 1e-3
    assert grid.norm == pytest.approx(1.0, abs=1e-3)


def test_widening_and_failure():
    wide = measure.GridSpec(chi_points=24, chi_extent=2.0, out_points=11, out_extent=1.0)
    grid = measure.wigner_from_chi(lambda g: np.exp(-0.5 * np.abs(g) ** 2), wide)
    assert grid.chi_extent > 2.0
    with pytest.raises(measure.WignerError):
        measure.wigner_from_chi(lambda g: np.ones_like(g), wide)


def test_hybrid_mode_angle_periodicity(rng):
    coeff = rng.normal(size=(3, 3, 3)) + 1j * rng.normal(size=(3, 3, 3))
    ket = _ket(lambda o: coeff[o] if max(o) < 3 else 0.0, n=3)
    red = measure.ReducedKet(ket, measure.leading_modes(ket))
    base = measure.hybrid_wigner(ket, measure.HybridModeSpec(0.3, 0.8), SPEC, reduced=red)
    shifted = measure.hybrid_wigner(ket, measure.HybridModeSpec(0.3 + 2 * np.pi, 0.8), SPEC, reduced=red)
    np.testing.assert_allclose(shifted.w, base.w, atol=1e-10)
    # phi + pi flips the sign of the mode, mirroring phase space through the origin
    flipped = measure.hybrid_wigner(ket, measure.HybridModeSpec(0.3, 0.8 + np.pi), SPEC, reduced=red)
    np.testing.assert_allclose(flipped.w, base.w[::-1, ::-1], atol=1e-8)


def test_angle_scan_picks_maximum(rng):
    ket = _ket(lambda o: 1.0 if o == (0, 0, 1) else 0.0, n=2)
    scan = measure.angle_scan(ket, [0.0], [0.0, np.pi / 2], SPEC)
    # all weight on the pump mode is a single photon, the best case
    assert scan.phi == pytest.approx(np.pi / 2)
    assert scan.negativity == pytest.approx(4 * np.exp(-0.5) - 2, abs=2e-3)
    assert scan.table.shape == (2, 3)


# ----------------------------------------------------------------------------
# reduced Wigner function in the actual channel

def _joint_with_escape(eta, n_ac=3, seed=0):
    """Complete joint decomposition whose first supermodes hold weight eta in the actual channel."""
    rng = np.random.default_rng(seed)
    n = 2 * n_ac
    first = np.zeros(n, complex)
    first[0] = np.sqrt(eta)
    first[n_ac] = np.sqrt(1 - eta)
    rest = unitary_group.rvs(n, random_state=rng)
    q, _ = np.linalg.qr(np.column_stack([first, rest]))
    q = q[:, :n] * (first[0] / q[0, 0] if eta > 0 else 1)
    q[:, 0] = first
    g_s = q.conj().T  # a_S = G_S^+ A_S, so column 0 of G_S^+ is the first mode
    g_i = q.T
    eye = np.eye(n, dtype=complex)
    return decomp.JointSvd(eye, eye, g_s, g_i, np.linspace(1, 0, n))


@pytest.mark.parametrize("eta", [1.0, 0.9, 0.5])
def test_actual_channel_weights(eta):
    joint = _joint_with_escape(eta)
    wts = measure.actual_channel_weights(joint)
    assert abs(wts.w_s) == pytest.approx(np.sqrt(eta), abs=1e-10)
    assert abs(wts.w_i) == pytest.approx(np.sqrt(eta), abs=1e-10)
    assert wts.noise == pytest.approx(2 - 2 * eta, abs=1e-10)
    # truncated decompositions take the adjoint route and must agree
    short = measure.actual_channel_weights(joint.truncate(2))
    assert abs(short.w_s) == pytest.approx(abs(wts.w_s), abs=1e-10)


def test_reduced_wigner_exact_equals_approximate(rng):
    eta = 0.8
    coeff = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    ket = _ket(lambda o: coeff[o[0], o[1]] if o[2] == 0 and max(o) < 3 else 0.0, n=3)
    exact = measure.reduced_wigner_actual(ket, joint=_joint_with_escape(eta), spec=SPEC)
    approx = measure.reduced_wigner_actual(ket, eta=eta, spec=SPEC, approximate=True)
    np.testing.assert_allclose(exact.w, approx.w, atol=1e-10)


def test_reduced_wigner_limits():
    ket = _ket(lambda o: 1.0 if o == (1, 1, 0) else 0.0, n=2)
    # without escape only vacuum noise is seen
    dark = measure.reduced_wigner_actual(ket, eta=1e-12, spec=SPEC, approximate=True)
    np.testing.assert_allclose(dark.w, measure.fock_wigner(0, dark.q, dark.p), atol=1e-6)
    # |1,1> seen through (S + I)/sqrt2 is (|2><2| + |0><0|)/2
    full = measure.reduced_wigner_actual(ket, eta=1.0, spec=SPEC, approximate=True)
    ref = 0.5 * (measure.fock_wigner(2, full.q, full.p) + measure.fock_wigner(0, full.q, full.p))
    np.testing.assert_allclose(full.w, ref, atol=1e-6)
    with pytest.raises(ValueError):
        measure.reduced_wigner_actual(ket, spec=SPEC, approximate=True)
