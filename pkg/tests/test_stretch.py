import numpy as np
import pytest

from conftest import small_params
from spdcring import measure, nongauss, pipeline, stretch

SPEC = measure.GridSpec(chi_points=48, chi_extent=6.0, out_points=41, out_extent=2.5)
TRUNC = nongauss.Truncation(2, 1, 6)


@pytest.fixture(scope="module")
def lossless_case():
    p = stretch.lossless_params(small_params(0.0002, eta=0.9, n_k=11, n_k_pump=21))
    res = pipeline.run_nongauss(p, TRUNC, dt=0.1)
    ref, _ = stretch.lossless_reference(p)
    return p, res, ref


@pytest.fixture(scope="module")
def lossy_case():
    p = small_params(0.0002, eta=0.9, n_k=11, n_k_pump=21)
    res = pipeline.run_nongauss(p, TRUNC, dt=0.1)
    ref, _ = stretch.lossless_reference(p)
    return p, res, ref


def test_lossless_params_keep_linewidth():
    p = small_params(eta=0.8)
    q = stretch.lossless_params(p)
    assert q.signal.escape_efficiency == 1.0
    assert q.signal.loaded_q == pytest.approx(p.signal.loaded_q)
    assert q.pump == p.pump


def test_reference_is_bogoliubov(lossy_case):
    _, _, ref = lossy_case
    n = small_params(n_k=11).signal.n_k
    assert ref.v_bar.shape == (2 * n, 2 * n)
    scale = max(1.0, np.abs(ref.v_bar).max() ** 2)
    assert max(ref.constraint_residuals()) < 1e-8 * scale


def test_zero_pump_gives_identity_map():
    p = small_params(0.0, n_k=5, n_k_pump=7)
    g = pipeline.run_gaussian(p)
    ref, _ = stretch.lossless_reference(p)
    coeffs = stretch.optimal_stretch_lo(ref, g.final, stretch.extend_joint(g.joint(), g.joint()))
    assert coeffs.d_max < 1e-12
    assert np.abs(np.abs(coeffs.c) - np.eye(coeffs.c.size)[0]).max() < 1e-12


def test_composed_map_shapes(lossy_case):
    _, res, ref = lossy_case
    m_c, m_d = stretch.composed_maps(ref, res.gauss.final)
    n = res.gauss.final.v_ss.shape[0]
    assert m_c.shape == (n, 2 * n) and m_d.shape == (n, 2 * n)
    g = stretch.supermode_map(res.joint)
    np.testing.assert_allclose(g.conj().T @ g, np.eye(2 * n), atol=1e-7)


def test_self_reference_removes_all_squeezing(lossless_case):
    _, res, ref = lossless_case
    coeffs = stretch.optimal_stretch_lo(ref, res.gauss.final, res.joint)
    assert coeffs.rank_ok
    assert coeffs.target_error() < 1e-6
    assert coeffs.d_max < 1e-6
    grid = stretch.stretched_wigner(res.ket, coeffs, SPEC)
    direct = measure.mode_wigner(res.ket, [0], [1.0], SPEC)
    np.testing.assert_allclose(grid.w, direct.w, atol=1e-3)


def test_target_phase_is_linear(lossy_case):
    _, res, ref = lossy_case
    n = 2 * res.gauss.final.v_ss.shape[0]
    target = np.zeros(n, complex)
    target[0] = 1.0
    a = stretch.optimal_stretch_lo(ref, res.gauss.final, res.joint, target)
    b = stretch.optimal_stretch_lo(ref, res.gauss.final, res.joint, np.exp(0.7j) * target)
    np.testing.assert_allclose(b.beta, np.exp(0.7j) * a.beta, atol=1e-10)
    np.testing.assert_allclose(b.c, np.exp(0.7j) * a.c, atol=1e-10)
    np.testing.assert_allclose(b.d, np.exp(0.7j) * a.d, atol=1e-10)


def test_lossy_stretch_is_normalized(lossy_case):
    _, res, ref = lossy_case
    coeffs = stretch.optimal_stretch_lo(ref, res.gauss.final, res.joint)
    # a physical mode operator obeys |C|^2 - |D|^2 = 1
    assert np.sum(np.abs(coeffs.c) ** 2) - np.sum(np.abs(coeffs.d) ** 2) == pytest.approx(1.0, abs=1e-6)
    grid = stretch.stretched_wigner(res.ket, coeffs, SPEC)
    assert grid.norm == pytest.approx(1.0, abs=1e-3)


@pytest.mark.parametrize("r,angle", [(0.0, 0.0), (0.4, 0.3), (0.9, 1.2)])
def test_effective_squeezing_fit(r, angle):
    q = np.linspace(-3, 3, 81)
    qq, pp = np.meshgrid(q, q, indexing="ij")
    c, s = np.cos(angle), np.sin(angle)
    u, v = c * qq + s * pp, -s * qq + c * pp
    # vacuum variance 1/4 per quadrature, stretched along u
    w = (2 / np.pi) * np.exp(-2 * np.exp(-2 * r) * u ** 2 - 2 * np.exp(2 * r) * v ** 2)
    grid = measure.WignerGrid(q, q.copy(), w, 6.0, 48)
    fit = stretch.effective_squeezing(grid)
    assert fit.r_eff == pytest.approx(r, abs=1e-6)
    if r > 0:
        off = np.mod(fit.angle - angle, np.pi)
        assert min(off, np.pi - off) == pytest.approx(0.0, abs=1e-5)
