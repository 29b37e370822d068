"""Tucker decomposition engines.

HOSVD, ALS refinement with single-hole contractions, multigrid Tucker for
collocated kernels, the reduced HOSVD of CP tensors (which never forms the
dense tensor) and the exact Tucker-to-CP conversion of a small core.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import GridError, ParameterError, RankError, ShapeError
from .formats import (
    CpTensor,
    TuckerTensor,
    _core_from_coeffs,
    _core_to_cp,
    check_dense_size,
    fix_signs,
    mode_product,
    projection_residual,
    reconstruct,
    unfold,
)

__all__ = [
    "TuckerConfig",
    "hosvd",
    "tucker_als",
    "tucker_error",
    "multigrid_tucker",
    "prolongate",
    "canonical_to_tucker",
    "tucker_to_canonical",
]


@dataclass(frozen=True)
class TuckerConfig:
    """Target of a Tucker decomposition.

    Exactly one of ``ranks`` (an int for all modes or one per mode) and
    ``tolerance`` (relative Frobenius error) must be given.
    """

    ranks: int | tuple[int, ...] | None = None
    tolerance: float | None = None
    max_als_sweeps: int = 20
    als_stall_tol: float = 1e-8

    def __post_init__(self):
        if (self.ranks is None) == (self.tolerance is None):
            raise ParameterError("set exactly one of ranks and tolerance")
        if self.ranks is not None:
            r = (self.ranks,) if np.isscalar(self.ranks) else tuple(self.ranks)
            if any(int(v) != v or v < 1 for v in r):
                raise RankError(f"ranks must be positive integers, got {self.ranks}")
        if self.tolerance is not None and not self.tolerance >= 0:
            raise ParameterError("tolerance must be nonnegative")
        if self.max_als_sweeps < 0:
            raise ParameterError("max_als_sweeps must be nonnegative")

    def ranks_for(self, shape):
        if self.ranks is None:
            return None
        if np.isscalar(self.ranks):
            return (int(self.ranks),) * len(shape)
        if len(self.ranks) != len(shape):
            raise ShapeError(f"{len(self.ranks)} ranks for a tensor of order {len(shape)}")
        return tuple(int(r) for r in self.ranks)


def _leading(mat, r):
    u, _, _ = linalg.svd(mat, full_matrices=False, lapack_driver="gesdd")
    return fix_signs(u[:, :r])


def _project(x, factors):
    core = x
    for l, f in enumerate(factors):
        core = mode_product(core, f.T, l)
    return core


def tucker_error(x, t: TuckerTensor) -> float:
    """Relative Frobenius error of ``t`` against the dense tensor ``x``."""
    return float(np.linalg.norm(x - reconstruct(t)) / np.linalg.norm(x))


def hosvd(x, cfg: TuckerConfig) -> TuckerTensor:
    """Truncated higher-order SVD of a dense tensor.

    In tolerance mode each mode keeps the fewest singular vectors whose
    discarded tail satisfies ``tail**2 <= tol**2 ||x||**2 / d``, which bounds
    the total error by ``tol``.
    """
    x = np.asarray(x, dtype=float)
    check_dense_size(x.shape)
    ranks = cfg.ranks_for(x.shape)
    d = x.ndim
    factors = []
    xn2 = float(np.sum(x**2))
    for l in range(d):
        a = unfold(x, l)
        if ranks is not None:
            r = ranks[l]
            if r > x.shape[l]:
                raise RankError(f"rank {r} exceeds mode size {x.shape[l]} in mode {l}")
            u = _leading(a, r)
        else:
            u, s, _ = linalg.svd(a, full_matrices=False, lapack_driver="gesdd")
            tail = np.concatenate([np.cumsum((s**2)[::-1])[::-1], [0.0]])
            r = max(1, int(np.argmax(tail <= cfg.tolerance**2 * xn2 / d)))
            u = fix_signs(u[:, :r])
        factors.append(u)
    return TuckerTensor(_project(x, factors), factors)


def tucker_als(x, init: TuckerTensor, cfg: TuckerConfig, trace=None) -> TuckerTensor:
    """Refine a Tucker approximation by alternating least squares.

    Each mode update contracts ``x`` with the current factors of all other
    modes (the single-hole tensor) and takes the leading left singular
    vectors of its unfolding.  Stops after ``cfg.max_als_sweeps`` sweeps or
    when the relative error improves by less than ``cfg.als_stall_tol``.
    The best iterate is returned, so the error never exceeds that of
    ``init``.  If ``trace`` is a list, ``(sweep, error)`` pairs are
    appended, sweep 0 being the initial guess.
    """
    x = np.asarray(x, dtype=float)
    if tuple(init.shape) != x.shape:
        raise ShapeError(f"init shape {init.shape} does not match {x.shape}")
    d = x.ndim
    ranks = init.ranks
    factors = [np.array(f) for f in init.factors]
    best = TuckerTensor(_project(x, factors), factors)
    best_err = tucker_error(x, best)
    if trace is not None:
        trace.append((0, best_err))
    prev = best_err
    for sweep in range(1, cfg.max_als_sweeps + 1):
        for l in range(d):
            y = x
            for m in range(d):
                if m != l:
                    y = mode_product(y, factors[m].T, m)
            factors[l] = _leading(unfold(y, l), ranks[l])
        cand = TuckerTensor(_project(x, factors), factors)
        err = tucker_error(x, cand)
        if trace is not None:
            trace.append((sweep, err))
        if err < best_err:
            best, best_err = cand, err
        if prev - err < cfg.als_stall_tol * max(prev, 1e-300):
            break
        prev = err
    return best


def prolongate(v, n_fine):
    """Piecewise-linear prolongation of factor columns from ``n`` to ``2n - 1`` nested nodes."""
    n = v.shape[0]
    if n_fine != 2 * n - 1:
        raise GridError(f"{n} -> {n_fine} nodes is not a nested refinement (expected {2 * n - 1})")
    out = np.empty((n_fine,) + v.shape[1:])
    out[::2] = v
    out[1::2] = 0.5 * (v[:-1] + v[1:])
    return out


def _orthonormalize(v):
    q, r = np.linalg.qr(v)
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    return fix_signs(q)


def multigrid_tucker(spec, grids, cfg: TuckerConfig, trace=None) -> TuckerTensor:
    """Tucker decomposition of a collocated kernel on a sequence of nested grids.

    HOSVD runs only on the coarsest grid.  At every finer level the factors
    are prolonged linearly to the new nodes, re-orthonormalized and refined
    by :func:`tucker_als` on that level's collocated tensor.

    Parameters
    ----------
    spec : KernelSpec
    grids : sequence of TensorGrid
        Collocation grids with ``n_{j+1} = 2 n_j - 1`` on every axis and
        equal half-widths.
    trace : list, optional
        Receives ``(level, n, error)`` after each level.
    """
    from .grid import Mode, collocate

    grids = list(grids)
    if not grids:
        raise GridError("empty grid sequence")
    for g0, g1 in zip(grids, grids[1:]):
        if g0.mode is not Mode.COLLOCATION or g1.mode is not Mode.COLLOCATION:
            raise GridError("multigrid Tucker needs collocation grids")
        if tuple(g0.half_widths) != tuple(g1.half_widths):
            raise GridError("grid sequence must share the box")
        for a, b in zip(g0.points_per_axis, g1.points_per_axis):
            if b != 2 * a - 1:
                raise GridError(f"{a} -> {b} points is not a nested refinement")
    x = collocate(spec, grids[0])
    t = hosvd(x, cfg)
    t = tucker_als(x, t, cfg)
    if trace is not None:
        trace.append((0, grids[0].points_per_axis[0], tucker_error(x, t)))
    for level, g in enumerate(grids[1:], start=1):
        x = collocate(spec, g)
        factors = [_orthonormalize(prolongate(np.asarray(f), n))
                   for f, n in zip(t.factors, g.points_per_axis)]
        init = TuckerTensor(_project(x, factors), factors)
        t = tucker_als(x, init, cfg)
        if trace is not None:
            trace.append((level, g.points_per_axis[0], tucker_error(x, t)))
    return t


def _cp_rel_error(x: CpTensor, factors, xnorm):
    return projection_residual(x, factors) / xnorm


def canonical_to_tucker(x: CpTensor, cfg: TuckerConfig, trace=None) -> TuckerTensor:
    """Reduced HOSVD of a CP tensor followed by ALS on the CP factors.

    The initial factors are leading left singular vectors of the weighted
    side matrices ``U_l diag(w)**0.5``.  An ALS update of mode ``l`` needs
    the leading left singular vectors of ``U_l diag(w) Z_l^T`` where ``Z_l``
    is the Khatri-Rao product of the projected side matrices of the other
    modes; since ``Z_l^T Z_l`` is the Hadamard product of small Gram
    matrices this costs ``O(n R^2 + R^3)`` per mode and the dense tensor is
    never formed.  Errors are computed exactly through
    :func:`tenscov.formats.projection_residual`.
    """
    if x.rank < 1:
        raise RankError("canonical_to_tucker needs rank >= 1")
    d = x.ndim
    w = x.weights
    ranks = cfg.ranks_for(x.shape)
    if ranks is not None:
        for l, r in enumerate(ranks):
            if r > min(x.shape[l], x.rank):
                raise RankError(f"rank {r} exceeds min(n, R) = {min(x.shape[l], x.rank)} in mode {l}")
    sw = np.sqrt(w)
    factors = []
    for l, f in enumerate(x.factors):
        u, s, _ = linalg.svd(f * sw, full_matrices=False, lapack_driver="gesvd")
        if ranks is not None:
            r = ranks[l]
        else:
            s2 = s**2
            tail = np.concatenate([np.cumsum(s2[::-1])[::-1], [0.0]])
            r = max(1, int(np.argmax(tail <= cfg.tolerance**2 * s2.sum() / d)))
        factors.append(fix_signs(u[:, :r]))
    xnorm = math.sqrt(max(float((np.outer(w, w) * np.prod([f.T @ f for f in x.factors], axis=0)).sum()), 0.0))
    if xnorm == 0:
        raise ParameterError("CP tensor has zero norm")
    err = _cp_rel_error(x, factors, xnorm)
    if trace is not None:
        trace.append((0, err))
    best = ([f.copy() for f in factors], err)
    prev = err
    rk = [f.shape[1] for f in factors]
    for sweep in range(1, cfg.max_als_sweeps + 1):
        for l in range(d):
            g = np.ones((x.rank, x.rank))
            for m in range(d):
                if m != l:
                    b = factors[m].T @ x.factors[m]
                    g *= b.T @ b
            ev, evec = linalg.eigh(g)
            ev = np.clip(ev, 0.0, None)
            half = evec * np.sqrt(ev)
            mat = (x.factors[l] * w) @ half
            factors[l] = _leading(mat, rk[l])
        err = _cp_rel_error(x, factors, xnorm)
        if trace is not None:
            trace.append((sweep, err))
        if err < best[1]:
            best = ([f.copy() for f in factors], err)
        if prev - err < cfg.als_stall_tol * max(prev, 1e-300):
            break
        prev = err
    factors = best[0]
    coeffs = [f.T @ u for f, u in zip(factors, x.factors)]
    core = _core_from_coeffs(w, coeffs)
    return TuckerTensor(core, factors)


def tucker_to_canonical(x: TuckerTensor) -> CpTensor:
    """Exact CP form of a Tucker tensor.

    The core is split slice-wise: all modes except the two largest are
    fixed, and each remaining matrix slice is factored by its SVD.  The CP
    rank is at most ``prod(r) / max(r)``.  Works for any order ``d >= 2``.
    """
    w, cols = _core_to_cp(np.asarray(x.core))
    if w.size == 0:
        return CpTensor.zeros(x.shape)
    return CpTensor(w, [np.asarray(v) @ c for v, c in zip(x.factors, cols)])
