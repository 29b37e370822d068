import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from tenscov.errors import KernelRangeError, ParameterError, SingularityError, UnsupportedRepresentation
from tenscov.kernels import (
    Decay,
    KernelSpec,
    eval_kernel,
    eval_spectral_density,
    laplace_integrand,
    matern_alpha,
    matern_density_integrand,
    newton_integrand,
    slater_integrand,
)
from tenscov.sinc import SincRule, exponential_sum


def test_matern_half_is_exponential():
    spec = KernelSpec("Matern", nu=0.5, ell=1.0)
    np.testing.assert_allclose(eval_kernel(spec, 1.0), math.exp(-1.0), rtol=1e-14)
    assert eval_kernel(spec, 1.0) == pytest.approx(0.367879, abs=1e-6)


@pytest.mark.parametrize("nu,ell", [(0.3, 0.2), (1.5, 2.0), (7.0, 0.5), (50.0, 1.0)])
def test_matern_origin_is_sigma2(nu, ell):
    assert eval_kernel(KernelSpec("Matern", nu=nu, ell=ell), 0.0) == 1.0
    assert eval_kernel(KernelSpec("Matern", nu=nu, ell=ell, sigma2=2.5), 0.0) == 2.5


def test_gaussian_slater_value():
    assert eval_kernel(KernelSpec("PSlater", p=2.0), 1.5) == pytest.approx(math.exp(-2.25), rel=1e-15)


# mpmath values (40 digits) of the closed forms
@pytest.mark.parametrize("nu,ell,r,expected", [
    (1.5, 0.7, 0.3, 0.82936319201696557061),
    (2.5, 0.4, 1.1, 0.04217769895453000514),
    (0.8, 1.3, 0.9, 0.57759373646565273546),
])
def test_matern_against_arbitrary_precision(nu, ell, r, expected):
    np.testing.assert_allclose(eval_kernel(KernelSpec("Matern", nu=nu, ell=ell), r), expected, rtol=1e-12)


def test_matern_range_guard():
    with pytest.raises(KernelRangeError):
        eval_kernel(KernelSpec("Matern", nu=60.0), 1.0)
    with pytest.raises(KernelRangeError):
        eval_kernel(KernelSpec("Matern", nu=1.0, ell=0.01), 2.0)


def test_newton_singular_at_origin():
    with pytest.raises(SingularityError):
        eval_kernel(KernelSpec("Newton"), 0.0)
    assert eval_kernel(KernelSpec("Newton"), 4.0) == 0.25


@pytest.mark.parametrize("kwargs", [
    {"family": "Matern", "nu": 0.0},
    {"family": "Matern", "ell": -1.0},
    {"family": "PSlater", "p": 2.5},
    {"family": "PSlater", "p": 0.0},
    {"family": "MaternSpectralDensity", "alpha": 0.0},
    {"family": "Gaussian", "sigma2": 0.0},
    {"family": "Unknown"},
])
def test_invalid_specs(kwargs):
    with pytest.raises(ParameterError):
        KernelSpec(**kwargs)


def test_negative_distance_rejected():
    with pytest.raises(ParameterError):
        eval_kernel(KernelSpec("Gaussian"), -1.0)


def test_spec_json_roundtrip():
    spec = KernelSpec("Matern", nu=1.5, ell=(0.5, 1.0, 2.0), dim=3, sigma2=2.0)
    back = KernelSpec.from_json(spec.to_json())
    assert back == spec
    with pytest.raises(ParameterError):
        KernelSpec.from_dict({"family": "Matern", "colour": "red"})


def test_spectral_density_at_zero():
    nu, alpha, d = 0.7, 0.3, 3
    spec = KernelSpec("MaternSpectralDensity", nu=nu, alpha=alpha, dim=d)
    expected = math.gamma(nu + d / 2) * alpha ** (-d) / (math.pi ** (d / 2) * math.gamma(nu))
    np.testing.assert_allclose(eval_spectral_density(spec, 0.0), expected, rtol=1e-13)


def test_spectral_density_arbitrary_precision():
    spec = KernelSpec("MaternSpectralDensity", nu=0.4, alpha=0.1, dim=3)
    # mpmath, 40 digits
    np.testing.assert_allclose(eval_spectral_density(spec, 1.0), 0.012109916392871777346, rtol=1e-13)
    np.testing.assert_allclose(eval_spectral_density(spec, 0.0), 77.86669736928193535, rtol=1e-13)


def test_spectral_density_decreasing():
    spec = KernelSpec("MaternSpectralDensity", nu=0.4, alpha=0.1, dim=3)
    f = eval_spectral_density(spec, np.linspace(0, 20, 400))
    assert np.all(np.diff(f) < 0)


def test_spectral_density_is_fourier_pair_1d():
    # f integrates against cos to the Matern kernel with alpha = sqrt(2 nu)/ell
    nu, ell = 1.5, 0.8
    spec = KernelSpec("Matern", nu=nu, ell=ell, dim=1)
    for r in (0.0, 0.4, 1.3):
        val = 2 * integrate.quad(lambda w: eval_spectral_density(spec, w) * math.cos(w * r), 0, np.inf,
                                 limit=400)[0]
        np.testing.assert_allclose(val, eval_kernel(spec, r), rtol=1e-8, atol=1e-12)
    assert matern_alpha(nu, ell) == pytest.approx(math.sqrt(3) / 0.8)


def test_laplace_pair_eta_two():
    # int t^2 e^{-a t} e^{-p t} dt = 2/(p+a)^3 at p = a = 1
    val = integrate.quad(lambda t: t**2 * math.exp(-2 * t), 0, np.inf)[0]
    assert val == pytest.approx(0.25, rel=1e-12)
    li = matern_density_integrand(nu=1.0, alpha=1.0, dim=2)
    # the integrand carries the density normalization Gamma(eta) alpha^(2 nu)/(pi Gamma(nu))
    np.testing.assert_allclose(li.exact(1.0), 1.0 / math.pi * 0.25 * math.gamma(2), rtol=1e-14)


@pytest.mark.parametrize("li", [
    newton_integrand(),
    slater_integrand(0.25),
    slater_integrand(3.0),
    matern_density_integrand(0.5, 0.7, 3),
    matern_density_integrand(1.0, 1.3, 2),
])
def test_mixture_density_reproduces_exact(li):
    for rho in (0.3, 1.0, 2.5):
        val = integrate.quad(lambda t: li.density(t) * math.exp(-t * rho**2), 0, np.inf, limit=500)[0]
        np.testing.assert_allclose(val, li.exact(rho), rtol=1e-8)


def test_integrand_forms():
    li = laplace_integrand(KernelSpec("Newton"))
    assert li.decay is Decay.GAUSSIAN
    np.testing.assert_allclose(li.weight(np.array([0.1, 5.0])), 2 / math.sqrt(math.pi))
    ls = laplace_integrand(KernelSpec("PSlater", p=1.0))
    assert ls.decay is Decay.EXPONENTIAL
    t = np.array([0.5, 2.0])
    np.testing.assert_allclose(ls.weight(t), math.sqrt(0.25 / math.pi) * t**-1.5 * np.exp(-0.25 / t))
    assert laplace_integrand(KernelSpec("Matern", nu=0.5)).decay is Decay.EXPONENTIAL


@pytest.mark.parametrize("spec", [
    KernelSpec("Matern", nu=1.5),
    KernelSpec("PSlater", p=0.5),
    KernelSpec("MaternSpectralDensity", nu=0.3, alpha=1.0, dim=3),
])
def test_unsupported_representations(spec):
    with pytest.raises(UnsupportedRepresentation):
        laplace_integrand(spec)


def test_newton_sinc_at_unit_distance():
    li = newton_integrand()
    tau, w = exponential_sum(li, SincRule(32), 1.0, 1.0)
    assert abs(np.sum(w * np.exp(-tau)) - 1.0) <= 1e-6


def test_slater_sinc_alpha_one():
    li = slater_integrand(1.0)
    tau, w = exponential_sum(li, SincRule(48), 1.0, 1.0)
    approx = np.sum(w * np.exp(-tau))
    assert abs(approx - math.exp(-2.0)) <= 1e-5
    assert math.exp(-2.0) == pytest.approx(0.135335, abs=1e-6)


@pytest.mark.parametrize("li,lo,hi", [
    (newton_integrand(), 0.05, 1.0),
    (slater_integrand(0.25), 0.05, 2.0),
    (matern_density_integrand(0.5, 0.7, 3), 0.0, 10.0),
])
def test_sinc_error_linear_in_sqrt_m(li, lo, hi):
    p = np.linspace(max(lo, 1e-3), hi, 7)
    errs = []
    for M in (8, 16, 32, 64):
        tau, w = exponential_sum(li, SincRule(M), lo, hi)
        approx = np.exp(-np.outer(p**2, tau)) @ w
        errs.append(np.max(np.abs(approx - li.exact(p)) / li.exact(p)))
    x, y = np.sqrt([8, 16, 32, 64]), np.log(np.maximum(errs, 1e-16))
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    assert slope < 0
    assert np.max(np.abs(resid)) <= 0.1 * (y.max() - y.min())


@given(st.floats(0.05, 5.0), st.floats(0.0, 10.0))
def test_matern_finite_and_bounded(nu, r):
    v = eval_kernel(KernelSpec("Matern", nu=nu, ell=1.0), r)
    assert np.isfinite(v) and 0.0 <= v <= 1.0


@given(st.floats(0.0, 10.0), st.floats(0.1, 3.0))
def test_matern_half_closed_form(r, ell):
    spec = KernelSpec("Matern", nu=0.5, ell=ell)
    np.testing.assert_allclose(eval_kernel(spec, r * ell), math.exp(-r), rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("nu", [0.5, 1.0, 5.0, 50.0])
def test_matern_subnormal_distance(nu):
    assert eval_kernel(KernelSpec("Matern", nu=nu), 2.225073858507203e-309) == 1.0
