import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tenscov.errors import ParameterError, ShapeError, SymmetryError, UnsupportedRepresentation
from tenscov.formats import CpTensor, frobenius_error, reconstruct
from tenscov.grid import TensorGrid, collocate
from tenscov.kernels import KernelSpec, newton_integrand, slater_integrand
from tenscov.sinc import (
    SincRule,
    exponential_sum,
    sinc_errors,
    sinc_separate,
    spectral_frequencies,
    spectral_to_covariance,
)


def test_rule_validation():
    with pytest.raises(ParameterError):
        SincRule(0)
    with pytest.raises(ParameterError):
        SincRule(8, C0=0.0)
    with pytest.raises(ParameterError):
        SincRule(8, scheme="trapezoid")
    r = SincRule(16)
    assert r.step == pytest.approx(math.log(16) / 16)
    assert r.points().size == 33


def test_plain_rule_rank_accounting():
    li = newton_integrand()
    tau, w = exponential_sum(li, SincRule(10, scheme="plain"), 0.1, 1.0)
    assert tau.size == 11
    tau, w = exponential_sum(li, SincRule(10, scheme="plain", fold=False), 0.1, 1.0)
    assert tau.size == 21
    with pytest.raises(UnsupportedRepresentation):
        exponential_sum(slater_integrand(1.0), SincRule(10, scheme="plain"), 0.1, 1.0)


def test_folded_plain_rule_equals_unfolded():
    li = newton_integrand()
    p = np.linspace(0.2, 1.0, 5)
    t1, w1 = exponential_sum(li, SincRule(12, scheme="plain"), 0.1, 1.0)
    t2, w2 = exponential_sum(li, SincRule(12, scheme="plain", fold=False), 0.1, 1.0)
    np.testing.assert_allclose(np.exp(-np.outer(p**2, t1)) @ w1, np.exp(-np.outer(p**2, t2)) @ w2, rtol=1e-14)


def test_exponential_sum_range_checks():
    with pytest.raises(ParameterError):
        exponential_sum(newton_integrand(), SincRule(8), 2.0, 1.0)


@pytest.mark.parametrize("li", [newton_integrand(), slater_integrand(0.25)])
def test_weights_positive(li):
    tau, w = exponential_sum(li, SincRule(32), 0.05, 2.0)
    assert np.all(w > 0) and np.all(tau > 0)


def test_newton_sinc_radially_symmetric():
    cp = sinc_separate(KernelSpec("Newton"), TensorGrid.uniform(3, 16), SincRule(16))
    assert cp.rank == 33
    f0 = cp.factors[0]
    for f in cp.factors[1:]:
        np.testing.assert_array_equal(f, f0)


def test_newton_sinc_error_decreases():
    g = TensorGrid.uniform(3, 17)
    rows = sinc_errors(KernelSpec("Newton"), g, [8, 16, 32])
    errs = [r[2] for r in rows]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-6


def test_exponential_kernel_sinc_accuracy():
    spec = KernelSpec("Matern", nu=0.5, ell=0.7)
    g = TensorGrid.uniform(3, 9)
    cp = sinc_separate(spec, g, SincRule(48))
    assert frobenius_error(collocate(spec, g), reconstruct(cp)) <= 1e-8


def test_gaussian_family_rank_one():
    g = TensorGrid.uniform(2, 7)
    cp = sinc_separate(KernelSpec("PSlater", p=2.0, dim=2), g, SincRule(8))
    assert cp.rank == 1
    np.testing.assert_allclose(reconstruct(cp), collocate(KernelSpec("PSlater", p=2.0, dim=2), g), rtol=1e-14)


def test_projection_mode_newton():
    g = TensorGrid.uniform(3, 9, mode="projection")
    cp = sinc_separate(KernelSpec("Newton"), g, SincRule(48))
    ref = collocate(KernelSpec("Newton"), g, quad_points=16)
    # the dense Gauss-Legendre average of the singular cell is itself approximate
    off = np.ones(g.shape, dtype=bool)
    off[4, 4, 4] = False
    np.testing.assert_allclose(reconstruct(cp)[off], ref[off], rtol=1e-6)


def test_lags_sector():
    spec = KernelSpec("Matern", nu=0.5, ell=0.5, dim=2)
    g = TensorGrid.uniform(2, 9)
    cp = sinc_separate(spec, g, SincRule(48), sector="lags")
    x = g.lags(0)
    ref = np.exp(-np.sqrt(x[:, None] ** 2 + x[None, :] ** 2) / 0.5)
    np.testing.assert_allclose(reconstruct(cp), ref, atol=1e-8)


def test_sinc_separate_checks():
    with pytest.raises(ShapeError):
        sinc_separate(KernelSpec("Newton"), TensorGrid.uniform(2, 8), SincRule(8))
    with pytest.raises(ParameterError):
        sinc_separate(KernelSpec("Newton"), TensorGrid.uniform(3, 8), SincRule(8), sector="edges")


def test_log_error_linear_in_sqrt_m():
    rows = sinc_errors(KernelSpec("PSlater", p=1.0), TensorGrid.uniform(3, 17), [8, 16, 32, 64])
    x = np.sqrt([r[0] for r in rows])
    y = np.log([r[2] for r in rows])
    slope, icpt = np.polyfit(x, y, 1)
    assert slope < 0
    assert np.max(np.abs(y - slope * x - icpt)) <= 0.1 * (y.max() - y.min())


def test_spectral_frequencies():
    g = TensorGrid.uniform(1, 5, b=2.0)
    np.testing.assert_allclose(spectral_frequencies(g, 0), 2 * math.pi / 5 * np.arange(-2, 3))
    g = TensorGrid.uniform(1, 4, b=1.5)
    xi = spectral_frequencies(g, 0)
    assert xi[2] == 0.0 and xi[0] == -xi[-1] * 2


def gaussian_density_cp(g, a=1.0):
    vecs = [np.exp(-spectral_frequencies(g, l) ** 2 / (4 * a)) for l in range(g.dim)]
    return CpTensor.from_vectors(vecs)


@pytest.mark.parametrize("n", [15, 16])
def test_spectral_rank1_matches_dense_oracle(n):
    g = TensorGrid.uniform(3, n, b=4.0)
    u = gaussian_density_cp(g)
    out = spectral_to_covariance(u, g)
    assert out.rank == 1
    dense = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(reconstruct(u)), norm="ortho")).real
    np.testing.assert_allclose(reconstruct(out), dense, atol=1e-12 * np.abs(dense).max())


def test_spectral_physical_scaling_gaussian():
    # inverse transform of exp(-xi^2/4) is exp(-x^2)/sqrt(pi)
    g = TensorGrid.uniform(1, 129, b=8.0)
    out = spectral_to_covariance(gaussian_density_cp(g), g, physical=True)
    np.testing.assert_allclose(reconstruct(out), np.exp(-g.nodes(0) ** 2) / math.sqrt(math.pi), atol=1e-12)


def test_spectral_constant_gives_delta_and_delta_gives_flat():
    g = TensorGrid.uniform(1, 9)
    flat = spectral_to_covariance(CpTensor.from_vectors([np.ones(9)]), g)
    v = reconstruct(flat)
    assert v[4] == pytest.approx(3.0) and np.max(np.abs(np.delete(v, 4))) < 1e-14
    delta = np.zeros(9)
    delta[4] = 1.0
    np.testing.assert_allclose(reconstruct(spectral_to_covariance(CpTensor.from_vectors([delta]), g)), 1 / 3)


def test_spectral_asymmetric_rejected(rng):
    g = TensorGrid.uniform(1, 8)
    with pytest.raises(SymmetryError):
        spectral_to_covariance(CpTensor.from_vectors([rng.random(8)]), g)
    with pytest.raises(ShapeError):
        spectral_to_covariance(CpTensor.from_vectors([np.ones(7)]), g)


def even_columns(rng, n, R):
    # g(|j|) on the centred index j = i - n//2
    g = rng.random((n // 2 + 1, R))
    return g[np.abs(np.arange(n) - n // 2)]


@given(st.integers(1, 5), st.integers(3, 12), st.integers(0, 2**31))
def test_spectral_preserves_rank(R, n, seed):
    rng = np.random.default_rng(seed)
    g = TensorGrid.uniform(2, n)
    u = CpTensor(rng.random(R) + 0.1, [even_columns(rng, n, R) for _ in range(2)])
    out = spectral_to_covariance(u, g)
    assert out.rank == R
    dense = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(reconstruct(u)), norm="ortho")).real
    np.testing.assert_allclose(reconstruct(out), dense, atol=1e-12 * np.abs(dense).max())
