import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg

from tenscov.errors import DivergenceError, GridError, ParameterError, ShapeError
from tenscov.formats import CpTensor, TuckerTensor, reconstruct
from tenscov.grid import TensorGrid, collocate
from tenscov.kernels import KernelSpec
from tenscov.kroncov import (
    KroneckerCovariance,
    MatFun,
    ToeplitzSym,
    covariance_from_kernel,
    diag,
    from_cp,
    log_trace,
    matfun_series,
    matvec,
    matvec_cost,
    scaled_norms,
    series_residual,
    split,
    trace,
    tucker_diag_trace,
)
from tenscov.sinc import SincRule


def random_toeplitz_cov(rng, dims, R):
    terms = []
    for _ in range(R):
        t = []
        for n in dims:
            col = np.exp(-rng.uniform(0.5, 3.0) * np.arange(n))
            t.append(ToeplitzSym(col))
        terms.append(t)
    return KroneckerCovariance(rng.random(R) + 0.1, terms)


def random_cp(rng, shape, R):
    return CpTensor(rng.random(R) + 0.1, [rng.standard_normal((n, R)) for n in shape])


@pytest.mark.parametrize("n", [3, 16, 33, 100, 512])
def test_toeplitz_matvec_matches_dense(rng, n):
    t = ToeplitzSym(rng.standard_normal(n))
    x = rng.standard_normal((n, 3))
    np.testing.assert_allclose(t.matvec(x), linalg.toeplitz(t.first_column) @ x, atol=1e-12 * n)
    np.testing.assert_allclose(t.matvec(x[:, 0]), linalg.toeplitz(t.first_column) @ x[:, 0], atol=1e-12 * n)
    assert t.trace() == pytest.approx(n * t.first_column[0])


def test_from_cp_exponential():
    g = TensorGrid.uniform(1, 5)
    col = np.exp(-g.lags(0))
    c = from_cp(CpTensor.from_vectors([col]))
    assert c.rank == 1 and isinstance(c.terms[0][0], ToeplitzSym)
    x = g.nodes(0)
    np.testing.assert_allclose(c.dense(), np.exp(-np.abs(x[:, None] - x[None, :])), rtol=1e-14)


def test_from_cp_zero():
    c = from_cp(CpTensor.zeros((4, 5)))
    assert c.rank == 0
    np.testing.assert_array_equal(c.dense(), np.zeros((20, 20)))


def test_identity_matvec_unchanged(rng):
    z = random_cp(rng, (4, 5, 3), 2)
    out = matvec(KroneckerCovariance.identity((4, 5, 3)), z)
    np.testing.assert_allclose(reconstruct(out), reconstruct(z), atol=1e-14)


def test_trace_of_products():
    f = [np.diag([1.0, 1.0]), np.diag([1.0, 2.0]), np.diag([3.0, 1.0])]
    c = KroneckerCovariance([1.0], [f])
    assert trace(c) == 24.0
    assert math.exp(log_trace(c)) == pytest.approx(24.0)


def test_constructor_checks():
    with pytest.raises(ShapeError):
        KroneckerCovariance([1.0, 2.0], [[np.eye(2)]])
    with pytest.raises(ShapeError):
        KroneckerCovariance([1.0, 1.0], [[np.eye(2)], [np.eye(3)]])
    with pytest.raises(ShapeError):
        KroneckerCovariance([], [])
    with pytest.raises(ShapeError):
        matvec(KroneckerCovariance.identity((3, 3)), CpTensor.from_vectors([np.ones(3)]))


@given(st.integers(1, 3), st.integers(1, 4), st.integers(0, 2**31))
def test_dense_equivalence(d, R, seed):
    rng = np.random.default_rng(seed)
    dims = tuple(int(n) for n in rng.integers(2, 9, size=d))
    c = random_toeplitz_cov(rng, dims, R)
    cd = c.dense()
    z = random_cp(rng, dims, 2)
    np.testing.assert_allclose(reconstruct(matvec(c, z)).ravel(), cd @ reconstruct(z).ravel(),
                               rtol=1e-10, atol=1e-10 * np.abs(cd).max())
    np.testing.assert_allclose(reconstruct(diag(c)).ravel(), np.diag(cd), rtol=1e-10)
    np.testing.assert_allclose(trace(c), np.trace(cd), rtol=1e-10)
    np.testing.assert_allclose(trace(c), reconstruct(diag(c)).sum(), rtol=1e-10)
    np.testing.assert_allclose(log_trace(c), math.log(np.trace(cd)), rtol=1e-12)
    np.testing.assert_allclose(split(c).dense(), cd, atol=1e-12)


@given(st.integers(0, 2**31))
def test_matvec_symmetry(seed):
    rng = np.random.default_rng(seed)
    from tenscov.formats import inner_product

    c = random_toeplitz_cov(rng, (5, 4, 6), 3)
    z, w = random_cp(rng, (5, 4, 6), 2), random_cp(rng, (5, 4, 6), 3)
    np.testing.assert_allclose(inner_product(matvec(c, z), w), inner_product(z, matvec(c, w)), rtol=1e-10)


def test_matvec_block_columns(rng):
    # a factor of length n * c is a block of c columns
    a = rng.standard_normal((3, 2))
    c = KroneckerCovariance([1.0], [[a, np.eye(4)]])
    z = CpTensor.from_vectors([np.arange(1.0, 7.0), np.ones(4)])
    out = matvec(c, z)
    assert out.shape == (9, 4)
    np.testing.assert_allclose(out.factors[0][:, 0] * out.weights[0] * out.factors[1][0, 0],
                               (a @ np.arange(1.0, 7.0).reshape(3, 2).T).T.ravel())


def test_matvec_cost_monotone(rng):
    c = random_toeplitz_cov(rng, (64, 64), 3)
    assert matvec_cost(c, 2) == 2 * matvec_cost(c, 1) > 0


def test_split_identity():
    s = split(KroneckerCovariance.identity((3, 4), weight=2.0))
    assert s.q0 == 2.0
    assert s.hat.rank == 0


def test_split_requires_constant_diagonal():
    with pytest.raises(ParameterError):
        split(KroneckerCovariance([1.0], [[np.diag([1.0, 2.0])]]))


def test_split_diagonal_free(rng):
    c = random_toeplitz_cov(rng, (4, 3, 5), 2)
    s = split(c)
    np.testing.assert_allclose(np.diag(s.hat.dense()), 0.0, atol=1e-15)
    np.testing.assert_allclose(s.q0, c.dense()[0, 0])


def test_tucker_diag_trace():
    g = TensorGrid.uniform(3, 9)
    x = collocate(KernelSpec("PSlater", p=2.0), g)
    from tenscov.decomp import TuckerConfig, hosvd

    t = hosvd(x, TuckerConfig(ranks=1))
    value, tr = tucker_diag_trace(t)
    assert value == pytest.approx(1.0, abs=1e-14)
    assert tr == pytest.approx(9**3)
    fs = [np.linalg.qr(np.ones((4, 1)))[0]] * 3
    with pytest.raises(GridError):
        tucker_diag_trace(TuckerTensor(np.ones((1, 1, 1)), fs))


def test_covariance_from_kernel_matches_pairwise():
    from tenscov.grid import pairwise_covariance

    spec = KernelSpec("Matern", nu=0.5, ell=0.5, dim=2)
    g = TensorGrid.uniform(2, 6)
    c = covariance_from_kernel(spec, g, SincRule(48))
    np.testing.assert_allclose(c.dense(), pairwise_covariance(spec, g), atol=1e-9)


def short_range_cov(n=6, d=3):
    spec = KernelSpec("Matern", nu=0.5, ell=0.1, dim=d)
    return covariance_from_kernel(spec, TensorGrid.uniform(d, n), SincRule(16), tol=1e-10)


def test_series_identity():
    s = split(KroneckerCovariance.identity((3, 3, 3)))
    info = {}
    for fun in MatFun:
        x = matfun_series(s, fun, info=info)
        np.testing.assert_allclose(x.dense(), np.eye(27), atol=1e-14)
        assert info["terms_used"] == 0


def test_series_inverse_and_sqrt():
    c = short_range_cov()
    s = split(c)
    x = matfun_series(s, "inverse", terms=40, trunc_tol=1e-8)
    assert series_residual(c, x, "inverse") <= 1e-6
    y = matfun_series(s, MatFun.SQRT, terms=40, trunc_tol=1e-8)
    assert series_residual(c, y, "sqrt") <= 1e-6
    np.testing.assert_allclose(y.dense(), linalg.sqrtm(c.dense()).real, atol=1e-6)


def test_series_divergence():
    c = covariance_from_kernel(KernelSpec("Matern", nu=0.5, ell=2.0, dim=2), TensorGrid.uniform(2, 6), SincRule(16))
    with pytest.raises(DivergenceError) as exc:
        matfun_series(split(c), "inverse")
    assert exc.value.norms["estimate"] >= 1.0


def test_scaled_norms_shape():
    c = covariance_from_kernel(KernelSpec("Matern", nu=0.5, ell=0.3), TensorGrid.uniform(3, 16), SincRule(16))
    rows = scaled_norms(c)
    assert rows.shape == (c.rank, 3)
    np.testing.assert_allclose(rows[:, 2], rows[:, 1] / 16)
    norms = rows[:, 1]
    k = int(np.argmax(norms))
    # rises to one peak and decays in the tails
    assert np.all(np.diff(norms[: k + 1]) >= -1e-12)
    assert np.all(np.diff(norms[k:]) <= 1e-12)
    assert norms[-1] < 1e-3 * norms[k] and norms[0] < 1e-3 * norms[k]
