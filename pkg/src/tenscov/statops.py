"""Spatial-statistics tasks on Kronecker covariances.

Kriging, conditional covariance, design criteria and quadratic forms use a
conjugate-gradient solver that works entirely in CP format.  Covariances
that are a single Kronecker product (:class:`Rank1Kron`) get exact
Cholesky, inverse, log-determinant and log-likelihood through per-factor
dense linear algebra.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import (
    FactorizationError,
    NonConvergenceError,
    ParameterError,
    ShapeError,
    SingularityError,
)
from .formats import CpTensor, add, compress, inner_product, norm, scalar_mul
from .grid import SensorSet
from .kroncov import KroneckerCovariance, ToeplitzSym, _fdense, matvec, trace

__all__ = [
    "KrigingProblem",
    "Rank1Kron",
    "solve_cov",
    "quadratic_form",
    "noisy_covariance",
    "krige",
    "conditional_cov",
    "design_criteria",
    "chol_rank1",
    "inv_rank1",
    "logdet_rank1",
    "loglikelihood_rank1",
    "dense_loglikelihood",
]


def _scalar_preconditioner(c: KroneckerCovariance) -> float:
    # Jacobi with the mean diagonal; exact for constant-diagonal operators
    if c.rank == 0:
        return 1.0
    mean = trace(c) / math.prod(c.dims)
    return 1.0 / mean if mean > 0 else 1.0


def solve_cov(c: KroneckerCovariance, rhs: CpTensor, tol: float = 1e-8, maxiter: int = 200,
              rank_tol: float | None = None, info: dict | None = None) -> CpTensor:
    """Solve ``C w = rhs`` by preconditioned CG in CP format.

    Iterates are compressed after every update at ``rank_tol`` (default
    ``tol / 10``).  When the recurrence residual meets ``tol`` the true
    residual ``||rhs - C w|| / ||rhs||`` is recomputed; if it misses, CG
    restarts from the true residual.  A CP factor of length ``n_l c_l``
    holds a block of ``c_l`` right-hand sides (Fortran order), which is how
    multiple right-hand sides in Kronecker form are solved at once.

    Raises
    ------
    NonConvergenceError
        After ``maxiter`` iterations, carrying the best iterate.
    """
    if rhs.ndim != c.ndim:
        raise ShapeError("right-hand side order differs from the operator")
    for s, n in zip(rhs.shape, c.dims):
        if s % n:
            raise ShapeError(f"right-hand side length {s} does not fit axis size {n}")
    bnorm = norm(rhs)
    if bnorm == 0:
        if info is not None:
            info.update(iterations=0, residual=0.0)
        return CpTensor.zeros(rhs.shape)
    rank_tol = tol / 10.0 if rank_tol is None else rank_tol
    minv = _scalar_preconditioner(c)

    def cmp(x):
        return compress(x, rank_tol, refine=False)

    def true_residual(x):
        return cmp(add(rhs, scalar_mul(matvec(c, x), -1.0)))

    x = CpTensor.zeros(rhs.shape)
    r = rhs
    best = (x, 1.0)
    it = 0
    restarts = 0
    while it < maxiter:
        z = scalar_mul(r, minv)
        p = z
        rz = inner_product(r, z)
        while it < maxiter:
            it += 1
            ap = cmp(matvec(c, p))
            pap = inner_product(p, ap)
            if not pap > 0:
                raise ParameterError("operator is not positive definite along the search direction")
            alpha = rz / pap
            x = cmp(add(x, scalar_mul(p, alpha)))
            r = cmp(add(r, scalar_mul(ap, -alpha)))
            if norm(r) <= tol * bnorm:
                break
            z = scalar_mul(r, minv)
            rz_new = inner_product(r, z)
            p = cmp(add(z, scalar_mul(p, rz_new / rz)))
            rz = rz_new
        r = true_residual(x)
        res = norm(r) / bnorm
        if res < best[1]:
            best = (x, res)
        if res <= tol:
            if info is not None:
                info.update(iterations=it, residual=res, restarts=restarts)
            return x
        restarts += 1
    raise NonConvergenceError(f"CG stopped after {it} iterations with residual {best[1]:.3e}",
                              best=best[0], residual=best[1])


def quadratic_form(c: KroneckerCovariance, z: CpTensor, tol: float = 1e-10) -> float:
    """``z^T C^-1 z`` as a sum of products of factor inner products."""
    if z.rank == 0:
        return 0.0
    w = solve_cov(c, z, tol)
    return inner_product(w, z)


@dataclass(frozen=True)
class KrigingProblem:
    """Field covariance, sensor subgrid and measurements on that subgrid.

    ``sensors=None`` stands for an empty sensor set (no conditioning).
    """

    css: KroneckerCovariance
    sensors: SensorSet | None
    z: CpTensor | None = None

    def __post_init__(self):
        if self.sensors is None:
            return
        if self.z is None:
            object.__setattr__(self, "z", CpTensor.zeros(self.sensors.shape))
        self.sensors.check(self.css.dims)
        if tuple(self.z.shape) != self.sensors.shape:
            raise ShapeError(f"measurements of shape {self.z.shape} on sensors {self.sensors.shape}")

    @property
    def noise_variance(self):
        return 0.0 if self.sensors is None else self.sensors.noise_variance


def noisy_covariance(css: KroneckerCovariance, sensors: SensorSet) -> KroneckerCovariance:
    """``C_yy = P C_ss P^T + sigma^2 I`` (the noise is one extra rank-1 term)."""
    cyy = css.submatrix(sensors.indices, sensors.indices)
    if sensors.noise_variance > 0:
        cyy = cyy + KroneckerCovariance([sensors.noise_variance],
                                        [[np.eye(m) for m in sensors.shape]])
    return cyy


def _cross(css, sensors):
    # C_sy: all rows, sensor columns
    return css.submatrix([np.arange(n) for n in css.dims], sensors.indices)


def krige(p: KrigingProblem, tol: float = 1e-8) -> CpTensor:
    """Kriging estimate ``s = C_sy C_yy^-1 z`` in CP format.

    The output is compressed at ``tol / 10``; its rank is at most
    ``rank(w) R`` where ``w`` solves ``C_yy w = z``.
    """
    if p.sensors is None or p.z.rank == 0:
        return CpTensor.zeros(p.css.dims)
    cyy = noisy_covariance(p.css, p.sensors)
    w = solve_cov(cyy, p.z, tol)
    return matvec(_cross(p.css, p.sensors), w, tol=tol / 10.0)


def _blocks_to_op(x: CpTensor, rows, cols) -> KroneckerCovariance:
    terms = [[x.factors[l][:, k].reshape(rows[l], cols[l], order="F") for l in range(x.ndim)]
             for k in range(x.rank)]
    return KroneckerCovariance(x.weights, terms)


def conditional_cov(p: KrigingProblem, tol: float = 1e-8) -> KroneckerCovariance:
    """``C_ss|y = C_ss - C_sy C_yy^-1 C_ys`` as a Kronecker sum.

    ``C_ys`` is a Kronecker sum of ``m_l x n_l`` blocks; CG solves for all
    its columns at once with blocks vectorized per axis.  The correction is
    compressed and subtracted, giving the ``r_s + r_0`` term form.
    """
    css = p.css
    sensors = p.sensors
    if sensors is None:
        return css
    dims = css.dims
    cyy = noisy_covariance(css, sensors)
    cys = css.submatrix(sensors.indices, [np.arange(n) for n in dims])
    rhs = CpTensor(cys.weights, [np.column_stack([_fdense(t[l]).reshape(-1, order="F") for t in cys.terms])
                                 for l in range(css.ndim)])
    w = solve_cov(cyy, rhs, tol)
    corr = matvec(_cross(css, sensors), w, tol=tol / 10.0)
    if corr.rank == 0:
        return css
    return css - _blocks_to_op(corr, dims, dims)


def design_criteria(ccond: KroneckerCovariance, zdir: CpTensor | None = None):
    """``phi_A = trace(C) / N`` and ``phi_C = z^T C z`` (``nan`` without ``zdir``)."""
    phi_a = trace(ccond) / math.prod(ccond.dims)
    if zdir is None:
        return phi_a, float("nan")
    return phi_a, inner_product(zdir, matvec(ccond, zdir))


# ----------------------------------------------------------------------------
# rank-1 Kronecker covariances


class Rank1Kron:
    """``C = C_1 x ... x C_d`` with dense symmetric factors."""

    __slots__ = ("factors",)

    def __init__(self, factors):
        fs = []
        for l, f in enumerate(factors):
            a = np.array(f.dense() if isinstance(f, ToeplitzSym) else f, dtype=float)
            if a.ndim != 2 or a.shape[0] != a.shape[1]:
                raise ShapeError(f"factor {l} is not square")
            a.setflags(write=False)
            fs.append(a)
        if not fs:
            raise ShapeError("need at least one factor")
        self.factors = tuple(fs)

    @property
    def dims(self):
        return tuple(f.shape[0] for f in self.factors)

    @property
    def size(self):
        return math.prod(self.dims)

    def dense(self):
        from .formats import check_dense_size

        check_dense_size((self.size, self.size))
        out = np.array([[1.0]])
        for f in self.factors:
            out = np.kron(out, f)
        return out

    def as_kron(self) -> KroneckerCovariance:
        return KroneckerCovariance([1.0], [self.factors])


def _chol(a, axis):
    try:
        return linalg.cholesky(a, lower=True)
    except linalg.LinAlgError:
        raise FactorizationError(f"factor {axis} is not positive definite", axis=axis) from None


def chol_rank1(c: Rank1Kron) -> Rank1Kron:
    """Per-factor lower Cholesky factors; their Kronecker product is the Cholesky factor of ``C``."""
    return Rank1Kron([_chol(f, l) for l, f in enumerate(c.factors)])


def inv_rank1(c: Rank1Kron) -> Rank1Kron:
    """Per-factor inverses."""
    out = []
    for l, f in enumerate(c.factors):
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", linalg.LinAlgWarning)
                lu = linalg.lu_factor(f, check_finite=True)
        except (linalg.LinAlgError, ValueError):
            raise SingularityError(f"factor {l} is singular") from None
        if np.any(np.abs(np.diag(lu[0])) <= 1e-14 * max(np.max(np.abs(f)), 1e-300)):
            raise SingularityError(f"factor {l} is singular")
        inv = linalg.lu_solve(lu, np.eye(f.shape[0]))
        out.append(0.5 * (inv + inv.T) if np.allclose(f, f.T) else inv)
    return Rank1Kron(out)


def logdet_rank1(c: Rank1Kron) -> float:
    """``log det C = sum_j log det(C_j) prod_{i != j} n_i`` via Cholesky diagonals."""
    n = c.dims
    total = 0.0
    for l, f in enumerate(c.factors):
        L = _chol(f, l)
        total += 2.0 * np.sum(np.log(np.diag(L))) * (math.prod(n) // n[l])
    return float(total)


def _apply_rank1(factors, z: CpTensor) -> CpTensor:
    return CpTensor(z.weights, [f @ u for f, u in zip(factors, z.factors)])


def loglikelihood_rank1(c: Rank1Kron, z: CpTensor, tol: float | None = None) -> float:
    """Gaussian log-likelihood ``-N/2 log(2 pi) - 1/2 log det C - 1/2 z^T C^-1 z``.

    ``C^-1 z`` is applied factor-wise through Cholesky solves, which is
    exact for a Kronecker product, so ``tol`` is only accepted for
    interface symmetry with the CP solver.
    """
    if tuple(z.shape) != c.dims:
        raise ShapeError(f"measurements of shape {z.shape} for covariance dims {c.dims}")
    N = c.size
    chols = [_chol(f, l) for l, f in enumerate(c.factors)]
    w = CpTensor(z.weights, [linalg.cho_solve((L, True), u) for L, u in zip(chols, z.factors)],
                 normalize=False)
    quad = inner_product(w, z) if z.rank else 0.0
    logdet = sum(2.0 * np.sum(np.log(np.diag(L))) * (N // L.shape[0]) for L in chols)
    return float(-0.5 * N * math.log(2.0 * math.pi) - 0.5 * logdet - 0.5 * quad)


def dense_loglikelihood(cov, z) -> float:
    """Dense reference ``-N/2 log(2 pi) - 1/2 log det C - 1/2 z^T C^-1 z``."""
    cov = np.asarray(cov, dtype=float)
    z = np.asarray(z, dtype=float).reshape(-1)
    L = linalg.cholesky(cov, lower=True)
    y = linalg.solve_triangular(L, z, lower=True)
    return float(-0.5 * z.size * math.log(2 * math.pi) - np.sum(np.log(np.diag(L))) - 0.5 * y @ y)
