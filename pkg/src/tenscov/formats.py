"""Canonical (CP) and Tucker tensor formats and their algebra.

Dense tensors are plain ``numpy.ndarray`` objects in C order.  A
:class:`CpTensor` stores nonnegative weights and unit-norm factor columns,
a :class:`TuckerTensor` a small core and orthonormal factor matrices.
Both are immutable after construction.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import linalg

from .errors import ParameterError, RankError, ShapeError, SizeError

__all__ = [
    "MAX_DENSE_ENTRIES",
    "CpTensor",
    "TuckerTensor",
    "add",
    "check_dense_size",
    "compress",
    "cp_from_dense_rank1",
    "frobenius_error",
    "hadamard",
    "inner_product",
    "mode_product",
    "norm",
    "reconstruct",
    "scalar_mul",
    "storage_cost",
    "unfold",
    "fold",
]

MAX_DENSE_ENTRIES = 10**8
# dense core size up to which norms and compression reduce to a core
_CORE_LIMIT = 2 * 10**6


def check_dense_size(shape):
    size = math.prod(int(n) for n in shape)
    if size > MAX_DENSE_ENTRIES:
        raise SizeError(f"dense object of shape {tuple(shape)} has {size} entries "
                        f"(limit {MAX_DENSE_ENTRIES})")
    return size


def _readonly(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def fix_signs(u, v=None):
    """Flip columns of ``u`` so the largest-magnitude entry is positive.

    When ``v`` is given (rows = columns of ``u``) the same flips are applied
    to its rows so that ``u @ v`` is unchanged.
    """
    if u.shape[1] == 0:
        return (u, v) if v is not None else u
    idx = np.argmax(np.abs(u), axis=0)
    s = np.sign(u[idx, np.arange(u.shape[1])])
    s[s == 0] = 1.0
    u = u * s
    if v is None:
        return u
    return u, v * s[:, None]


class CpTensor:
    """Rank-R canonical tensor ``sum_k w_k u_k^(1) o ... o u_k^(d)``.

    The constructor normalizes: weights become nonnegative, factor columns
    unit-norm, the largest-magnitude entry of every column in modes 2..d is
    positive and the first mode absorbs the remaining sign.  Columns that
    vanish get weight 0 and the first unit vector, so ``rank`` is always the
    number of terms passed in.

    Parameters
    ----------
    weights : array_like, shape (R,)
    factors : sequence of arrays, shapes (n_l, R)
    """

    __slots__ = ("weights", "factors")

    def __init__(self, weights, factors, normalize=True):
        factors = [np.asarray(f, dtype=float) for f in factors]
        if not factors:
            raise ShapeError("a CP tensor needs at least one mode")
        weights = np.asarray(weights, dtype=float).reshape(-1)
        R = weights.size
        for f in factors:
            if f.ndim != 2 or f.shape[1] != R:
                raise ShapeError(f"factor of shape {f.shape} does not match rank {R}")
        if normalize:
            weights, factors = _normalize(weights, factors)
        self.weights = _readonly(weights)
        self.factors = tuple(_readonly(f) for f in factors)

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(0), [np.zeros((int(n), 0)) for n in shape], normalize=False)

    @classmethod
    def from_vectors(cls, vectors, weight=1.0):
        """Rank-1 tensor ``weight * v_1 o ... o v_d``."""
        return cls([weight], [np.asarray(v, dtype=float).reshape(-1, 1) for v in vectors])

    @property
    def shape(self):
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ndim(self):
        return len(self.factors)

    @property
    def rank(self):
        return self.weights.size

    def storage(self):
        """Number of stored reals, ``d R n + R`` for equal mode sizes."""
        return sum(f.size for f in self.factors) + self.rank

    def term(self, k):
        return CpTensor(self.weights[k:k + 1], [f[:, k:k + 1] for f in self.factors], normalize=False)

    def __repr__(self):
        return f"CpTensor(shape={self.shape}, rank={self.rank})"


def _normalize(weights, factors):
    weights = weights.copy()
    factors = [f.copy() for f in factors]
    R = weights.size
    if R == 0:
        return weights, factors
    for f in factors:
        nrm = np.linalg.norm(f, axis=0)
        weights *= nrm
        nz = nrm > 0
        f[:, nz] /= nrm[nz]
    dead = ~(np.abs(weights) > 0) | ~np.all([np.linalg.norm(f, axis=0) > 0 for f in factors], axis=0)
    for f in factors[1:]:
        idx = np.argmax(np.abs(f), axis=0)
        s = np.sign(f[idx, np.arange(R)])
        s[s == 0] = 1.0
        f *= s
        factors[0] *= s
    s = np.sign(weights)
    s[s == 0] = 1.0
    factors[0] *= s
    weights = np.abs(weights)
    if np.any(dead):
        weights[dead] = 0.0
        for f in factors:
            f[:, dead] = 0.0
            f[0, dead] = 1.0
    return weights, factors


class TuckerTensor:
    """Orthogonal Tucker tensor ``core x_1 V_1 x_2 ... x_d V_d``.

    Parameters
    ----------
    core : ndarray, shape (r_1, ..., r_d)
    factors : sequence of (n_l, r_l) matrices with orthonormal columns
    check : bool
        Verify orthonormality to 1e-10.
    """

    __slots__ = ("core", "factors")

    def __init__(self, core, factors, check=True):
        core = np.asarray(core, dtype=float)
        factors = [np.asarray(f, dtype=float) for f in factors]
        if core.ndim != len(factors):
            raise ShapeError("core order differs from the number of factors")
        for l, f in enumerate(factors):
            if f.ndim != 2 or f.shape[1] != core.shape[l]:
                raise ShapeError(f"factor {l} of shape {f.shape} does not match core {core.shape}")
            if f.shape[1] > f.shape[0]:
                raise RankError(f"rank {f.shape[1]} exceeds mode size {f.shape[0]}")
            if check:
                err = np.max(np.abs(f.T @ f - np.eye(f.shape[1]))) if f.size else 0.0
                if err > 1e-10:
                    raise ParameterError(f"factor {l} is not orthonormal (deviation {err:.2e})")
        self.core = _readonly(core)
        self.factors = tuple(_readonly(f) for f in factors)

    @property
    def shape(self):
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self):
        return self.core.shape

    @property
    def ndim(self):
        return self.core.ndim

    def storage(self):
        """Number of stored reals, ``d r n + r^d`` for equal sizes."""
        return sum(f.size for f in self.factors) + self.core.size

    def entry(self, index):
        """Single entry, ``O(prod r_l)`` once the factor rows are taken."""
        out = self.core
        for l in range(self.ndim - 1, -1, -1):
            out = out @ self.factors[l][index[l]]
        return float(out)

    def __repr__(self):
        return f"TuckerTensor(shape={self.shape}, ranks={self.ranks})"


def storage_cost(x) -> int:
    return x.storage() if hasattr(x, "storage") else int(np.asarray(x).size)


def unfold(x, mode):
    """Mode-``mode`` unfolding, shape ``(n_mode, prod of the other sizes)``."""
    return np.moveaxis(x, mode, 0).reshape(x.shape[mode], -1)


def fold(mat, mode, shape):
    full = [shape[mode]] + [s for l, s in enumerate(shape) if l != mode]
    return np.moveaxis(mat.reshape(full), 0, mode)


def mode_product(x, mat, mode):
    """``x x_mode mat``: contract axis ``mode`` of ``x`` with the columns of ``mat``."""
    out = np.tensordot(mat, x, axes=(1, mode))
    return np.moveaxis(out, 0, mode)


def reconstruct(x):
    """Dense array of a CP or Tucker tensor (or a copy of a dense array)."""
    if isinstance(x, np.ndarray):
        return x.copy()
    check_dense_size(x.shape)
    if isinstance(x, TuckerTensor):
        out = x.core
        for l, f in enumerate(x.factors):
            out = mode_product(out, f, l)
        return np.ascontiguousarray(out)
    if x.rank == 0:
        return np.zeros(x.shape)
    # accumulate mode by mode: (n_1...n_l, R) times next factor
    acc = x.factors[0] * x.weights
    for f in x.factors[1:]:
        acc = (acc[:, None, :] * f[None, :, :]).reshape(-1, x.rank)
    return acc.sum(axis=1).reshape(x.shape)


def frobenius_error(a, b) -> float:
    """Relative Frobenius error ``||a - b|| / ||a||``."""
    a = reconstruct(a) if not isinstance(a, np.ndarray) else np.asarray(a, dtype=float)
    b = reconstruct(b) if not isinstance(b, np.ndarray) else np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    ref = np.linalg.norm(a)
    if ref == 0:
        raise ParameterError("reference tensor has zero norm")
    return float(np.linalg.norm(a - b) / ref)


def _check_same_shape(x, y):
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {y.shape}")


def add(x: CpTensor, y: CpTensor) -> CpTensor:
    """Sum by concatenation of terms; rank ``R_x + R_y``."""
    _check_same_shape(x, y)
    return CpTensor(np.concatenate([x.weights, y.weights]),
                    [np.hstack([fx, fy]) for fx, fy in zip(x.factors, y.factors)],
                    normalize=False)


def scalar_mul(x: CpTensor, alpha: float) -> CpTensor:
    if alpha >= 0:
        return CpTensor(x.weights * alpha, x.factors, normalize=False)
    f0 = -x.factors[0]
    return CpTensor(x.weights * -alpha, (f0,) + x.factors[1:], normalize=False)


def hadamard(x: CpTensor, y: CpTensor) -> CpTensor:
    """Entrywise product, rank ``R_x R_y``."""
    _check_same_shape(x, y)
    w = np.kron(x.weights, y.weights)
    factors = [(fx[:, :, None] * fy[:, None, :]).reshape(fx.shape[0], -1)
               for fx, fy in zip(x.factors, y.factors)]
    return CpTensor(w, factors)


def _gram_product(x, y):
    g = np.outer(x.weights, y.weights)
    for fx, fy in zip(x.factors, y.factors):
        g = g * (fx.T @ fy)
    return g


def inner_product(x, y) -> float:
    """Frobenius inner product of two CP tensors in ``O(R_x R_y d n)``."""
    _check_same_shape(x, y)
    if x.rank == 0 or y.rank == 0:
        return 0.0
    return float(_gram_product(x, y).sum())


def _side_reduction(x, rtol=0.0):
    """Orthonormal bases of the side matrices and the reduced coefficients.

    Returns ``(bases, coeffs)`` with ``factor_l = bases_l @ coeffs_l`` up to
    singular values below ``rtol`` times the largest.
    """
    bases, coeffs = [], []
    for f in x.factors:
        u, s, vt = linalg.svd(f, full_matrices=False, lapack_driver="gesvd")
        keep = s > max(rtol, 1e-15) * (s[0] if s.size else 0.0)
        keep[: 1] = True
        u, s, vt = u[:, keep], s[keep], vt[keep]
        bases.append(u)
        coeffs.append(s[:, None] * vt)
    return bases, coeffs


def _core_from_coeffs(weights, coeffs, chunk_entries=4 * 10**6):
    # sum_k w_k c_1[:, k] o ... o c_d[:, k], chunked over k to bound memory
    shape = [c.shape[0] for c in coeffs]
    R = weights.size
    if len(coeffs) == 1:
        return coeffs[0] @ weights
    rest = math.prod(shape[1:])
    step = max(1, chunk_entries // max(rest, 1))
    core = np.zeros((shape[0], rest))
    for s in range(0, R, step):
        sl = slice(s, min(s + step, R))
        kr = coeffs[1][:, sl]
        for c in coeffs[2:]:
            kr = (kr[:, None, :] * c[None, :, sl]).reshape(-1, kr.shape[1])
        core += (coeffs[0][:, sl] * weights[sl]) @ kr.T
    return core.reshape(shape)


def norm(x) -> float:
    """Frobenius norm.

    CP tensors are reduced to a small dense core through the SVD of their
    side matrices when that core is small enough, which avoids the
    cancellation in the Gram formula.
    """
    if isinstance(x, np.ndarray):
        return float(np.linalg.norm(x))
    if isinstance(x, TuckerTensor):
        return float(np.linalg.norm(x.core))
    if x.rank == 0:
        return 0.0
    if math.prod(min(n, x.rank) for n in x.shape) <= _CORE_LIMIT:
        _, coeffs = _side_reduction(x)
        return float(np.linalg.norm(_core_from_coeffs(x.weights, coeffs)))
    return math.sqrt(max(inner_product(x, x), 0.0))


def cp_from_dense_rank1(vectors, weight=1.0):
    return CpTensor.from_vectors(vectors, weight)


# ----------------------------------------------------------------------------
# rank truncation


def _hosvd_core(core, tol_abs):
    """Truncate a dense core by HOSVD; returns (bases, truncated core, err)."""
    d = core.ndim
    bases = []
    budget = tol_abs**2 / d
    for l in range(d):
        u, s, _ = np.linalg.svd(unfold(core, l), full_matrices=False)
        tail = np.concatenate([np.cumsum((s**2)[::-1])[::-1], [0.0]])
        r = max(1, int(np.argmax(tail <= budget)))
        bases.append(fix_signs(u[:, :r]))
    small = core
    for l, b in enumerate(bases):
        small = mode_product(small, b.T, l)
    approx = small
    for l, b in enumerate(bases):
        approx = mode_product(approx, b, l)
    return bases, small, float(np.linalg.norm(core - approx))


def _core_to_cp(core, rtol=1e-15):
    """Exact CP form of a small dense core by slicing and matrix SVDs.

    Slices along every mode except the two largest; each matrix slice is
    split by its SVD.  Singular values below ``rtol * ||core||`` are
    dropped.
    """
    d = core.ndim
    shape = core.shape
    if d == 1:
        return np.array([1.0]), [core.reshape(-1, 1)]
    order = np.argsort(shape, kind="stable")
    big = sorted(order[-2:])
    small = [l for l in range(d) if l not in big]
    thresh = rtol * np.linalg.norm(core)
    weights, cols = [], [[] for _ in range(d)]
    perm = small + big
    moved = np.transpose(core, perm)
    for idx in itertools.product(*[range(shape[l]) for l in small]):
        mat = moved[idx]
        if not np.any(mat):
            continue
        u, s, vt = np.linalg.svd(mat, full_matrices=False)
        for j in range(s.size):
            if s[j] <= thresh:
                break
            weights.append(s[j])
            for pos, l in enumerate(small):
                e = np.zeros(shape[l])
                e[idx[pos]] = 1.0
                cols[l].append(e)
            cols[big[0]].append(u[:, j])
            cols[big[1]].append(vt[j])
    if not weights:
        return np.zeros(0), [np.zeros((n, 0)) for n in shape]
    return np.array(weights), [np.array(c).T for c in cols]


def _cp_als_dense(target, rank, init, sweeps=200, goal=0.0):
    """Plain CP-ALS on a small dense tensor; returns (weights, factors, err)."""
    d = target.ndim
    factors = [f.copy() for f in init]
    tnorm = np.linalg.norm(target)
    best = None
    prev = np.inf
    for _ in range(sweeps):
        for l in range(d):
            v = np.ones((rank, rank))
            for m in range(d):
                if m != l:
                    v *= factors[m].T @ factors[m]
            # MTTKRP
            kr = np.ones((1, rank))
            for m in range(d):
                if m != l:
                    kr = (kr[:, None, :] * factors[m][None, :, :]).reshape(-1, rank)
            mt = unfold(target, l) @ kr
            factors[l] = linalg.lstsq(v.T, mt.T, cond=1e-13)[0].T
        approx = _dense_from_factors(factors)
        err = np.linalg.norm(target - approx)
        if best is None or err < best[0]:
            best = (err, [f.copy() for f in factors])
        if err <= goal or prev - err <= 1e-10 * tnorm:
            break
        prev = err
    err, factors = best
    return np.ones(rank), factors, err


def _dense_from_factors(factors):
    rank = factors[0].shape[1]
    acc = factors[0]
    for f in factors[1:]:
        acc = (acc[:, None, :] * f[None, :, :]).reshape(-1, rank)
    return acc.sum(axis=1).reshape([f.shape[0] for f in factors])


def compress(x: CpTensor, tol: float, refine: bool = True, max_rank=None) -> CpTensor:
    """Reduce the CP rank within a relative Frobenius tolerance.

    The side matrices are orthogonalized by SVD (this is the reduced HOSVD
    and loses nothing), the resulting small core is truncated by HOSVD to
    half the error budget and converted back to CP by slice-wise SVDs.  With
    ``refine`` the core is also fitted by CP-ALS at increasing ranks and the
    smallest rank meeting the budget wins.  All errors are measured exactly
    on the core, so ``frobenius_error(x, compress(x, tol)) <= tol`` holds.
    The input is returned unchanged when no candidate has a lower rank or
    when ``tol == 0``.
    """
    if tol < 0:
        raise ParameterError("tol must be nonnegative")
    if tol == 0 or x.rank <= 1:
        return x
    bases, coeffs = _side_reduction(x)
    if math.prod(c.shape[0] for c in coeffs) > _CORE_LIMIT:
        return _compress_large(x, tol)
    core = _core_from_coeffs(x.weights, coeffs)
    xnorm = np.linalg.norm(core)
    if xnorm == 0:
        return CpTensor.zeros(x.shape)
    budget = tol * xnorm
    tb, small, herr = _hosvd_core(core, 0.5 * budget)
    w, cols = _core_to_cp(small)
    best = None
    if 0 < w.size < x.rank:
        best = (w, [b @ c for b, c in zip(tb, cols)])
    if refine:
        start = max(small.shape)
        stop = min(w.size if w.size else x.rank, x.rank) - 1
        if max_rank is not None:
            stop = min(stop, max_rank)
        goal2 = budget**2 - herr**2
        for attempt, r in enumerate(range(start, stop + 1)):
            if attempt >= 4:
                break
            init = _als_init(w, cols, r, small.shape)
            aw, af, aerr = _cp_als_dense(small, r, init, goal=math.sqrt(max(goal2, 0.0)) * 0.5)
            if aerr**2 <= goal2:
                best = (aw, [b @ c for b, c in zip(tb, af)])
                break
    if best is None:
        return x
    w, reduced = best
    full = [u @ c for u, c in zip(bases, reduced)]
    return CpTensor(w, full)


def _als_init(w, cols, r, shape):
    if w.size:
        order = np.argsort(-w, kind="stable")[:r]
        init = [c[:, order].copy() for c in cols]
        init[0] = init[0] * w[order]
    else:
        init = [np.zeros((n, 0)) for n in shape]
    missing = r - init[0].shape[1]
    if missing > 0:
        rng = np.random.default_rng(r)
        init = [np.hstack([f, 1e-3 * rng.standard_normal((f.shape[0], missing))]) for f in init]
    return init


def _compress_large(x, tol):
    # per-mode truncation of the weighted side matrices; the projection
    # error is evaluated exactly from the orthogonal split of each term
    d = x.ndim
    xnorm = norm(x)
    budget = tol * xnorm
    bases = []
    for f in x.factors:
        u, s, _ = linalg.svd(f * np.sqrt(x.weights), full_matrices=False, lapack_driver="gesvd")
        tail = np.concatenate([np.cumsum((s**2)[::-1])[::-1], [0.0]])
        r = max(1, int(np.argmax(tail <= (0.5 * budget) ** 2 / d)))
        bases.append(u[:, :r])
    if projection_residual(x, bases) > 0.5 * budget:
        return x
    coeffs = [b.T @ f for b, f in zip(bases, x.factors)]
    if math.prod(c.shape[0] for c in coeffs) > _CORE_LIMIT:
        return x
    core = _core_from_coeffs(x.weights, coeffs)
    w, cols = _core_to_cp(core)
    if w.size >= x.rank:
        return x
    return CpTensor(w, [b @ c for b, c in zip(bases, cols)])


def projection_residual(x: CpTensor, bases) -> float:
    """``||x - (P_1 x ... x P_d) x||`` for orthonormal ``bases`` without densifying.

    The residual of every rank-1 term splits into ``2**d - 1`` mutually
    orthogonal pieces (each mode either projected or complemented), so the
    squared norm is a sum of Hadamard-Gram quadratic forms.
    """
    d = x.ndim
    inside, outside = [], []
    for f, b in zip(x.factors, bases):
        pf = b.T @ f
        of = f - b @ pf
        inside.append(pf.T @ pf)
        outside.append(of.T @ of)
    total = 0.0
    for mask in itertools.product((False, True), repeat=d):
        if not any(mask):
            continue
        g = np.outer(x.weights, x.weights)
        for l in range(d):
            g = g * (outside[l] if mask[l] else inside[l])
        total += g.sum()
    return math.sqrt(max(total, 0.0))
