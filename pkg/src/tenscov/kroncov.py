"""Kronecker-Toeplitz covariance operators.

A :class:`KroneckerCovariance` represents

    C = sum_k w_k Q_k^(1) x ... x Q_k^(d)

where every factor is either a symmetric Toeplitz matrix stored by its
first column or a small dense matrix (dense factors appear after products,
restrictions and series evaluation).  Vectors are CP tensors; a CP factor of
length ``n_in * c`` is read as a block of ``c`` columns (Fortran order), so
the same code applies the operator to matrices in Kronecker form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import linalg, special

from .errors import DivergenceError, GridError, ParameterError, ShapeError
from .formats import CpTensor, TuckerTensor, check_dense_size, compress, norm

__all__ = [
    "ToeplitzSym",
    "KroneckerCovariance",
    "SplitCovariance",
    "MatFun",
    "from_cp",
    "covariance_from_kernel",
    "matvec",
    "matvec_cost",
    "diag",
    "trace",
    "log_trace",
    "tucker_diag_trace",
    "split",
    "matfun_series",
    "series_residual",
    "scaled_norms",
    "operator_product",
    "compress_operator",
    "spectral_norm",
]


class ToeplitzSym:
    """Symmetric Toeplitz matrix given by its first column."""

    __slots__ = ("first_column", "_eig")

    def __init__(self, first_column):
        c = np.array(first_column, dtype=float).reshape(-1)
        if c.size == 0:
            raise ShapeError("empty Toeplitz column")
        c.setflags(write=False)
        self.first_column = c
        # eigenvalues of the length-2n circulant embedding
        emb = np.concatenate([c, [0.0], c[:0:-1]])
        self._eig = np.fft.rfft(emb)

    @property
    def shape(self):
        n = self.first_column.size
        return (n, n)

    @property
    def n(self):
        return self.first_column.size

    def matvec(self, x):
        """``T @ x`` for a vector or an ``(n, k)`` block through the circulant embedding."""
        x = np.asarray(x, dtype=float)
        n = self.n
        if x.shape[0] != n:
            raise ShapeError(f"Toeplitz of size {n} applied to {x.shape[0]} rows")
        if n <= 32:
            return self.dense() @ x
        m = 2 * n
        xf = np.fft.rfft(x, n=m, axis=0)
        eig = self._eig.reshape((-1,) + (1,) * (x.ndim - 1))
        return np.fft.irfft(eig * xf, n=m, axis=0)[:n]

    def dense(self):
        return linalg.toeplitz(self.first_column)

    def diagonal(self):
        return np.full(self.n, self.first_column[0])

    def trace(self):
        return self.n * self.first_column[0]

    def __repr__(self):
        return f"ToeplitzSym(n={self.n})"


def _as_factor(f):
    if isinstance(f, ToeplitzSym):
        return f
    a = np.array(f, dtype=float)
    if a.ndim != 2:
        raise ShapeError("dense factors must be matrices")
    a.setflags(write=False)
    return a


def _fdense(f):
    return f.dense() if isinstance(f, ToeplitzSym) else np.asarray(f)


def _fshape(f):
    return f.shape


def _fapply(f, x):
    return f.matvec(x) if isinstance(f, ToeplitzSym) else f @ x


def _fdiag(f):
    return f.diagonal() if isinstance(f, ToeplitzSym) else np.diagonal(f).copy()


def _ftrace(f):
    return f.trace() if isinstance(f, ToeplitzSym) else float(np.trace(f))


def _fnorm2(f, iterations=None):
    """Spectral norm; exact for moderate sizes, power iteration otherwise."""
    n = _fshape(f)[0]
    if iterations is None and n <= 2048 and _fshape(f)[0] == _fshape(f)[1]:
        a = _fdense(f)
        if np.allclose(a, a.T):
            ev = linalg.eigvalsh(a)
            return float(np.max(np.abs(ev)))
        return float(linalg.norm(a, 2))
    return _power_norm(lambda v: _fapply(f, v), lambda v: _fapply_t(f, v), n, iterations or 50)


def _fapply_t(f, x):
    return f.matvec(x) if isinstance(f, ToeplitzSym) else np.asarray(f).T @ x


def _power_norm(apply, apply_t, n, iterations, seed=0):
    v = np.random.default_rng(seed).standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iterations):
        w = apply_t(apply(v))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        est = math.sqrt(nw)
        v = w / nw
    return est


class KroneckerCovariance:
    """Weighted sum of Kronecker products of per-axis factors.

    Parameters
    ----------
    weights : array_like, shape (R,)
    terms : sequence of length-R sequences of d factors
        Each factor is a :class:`ToeplitzSym` or a dense matrix; all terms
        share the per-axis shapes.
    """

    __slots__ = ("weights", "terms", "out_dims", "in_dims")

    def __init__(self, weights, terms, dims=None):
        weights = np.array(weights, dtype=float).reshape(-1)
        terms = [tuple(_as_factor(f) for f in t) for t in terms]
        if len(terms) != weights.size:
            raise ShapeError(f"{weights.size} weights for {len(terms)} terms")
        if terms:
            out_dims = tuple(_fshape(f)[0] for f in terms[0])
            in_dims = tuple(_fshape(f)[1] for f in terms[0])
            for t in terms:
                if (tuple(_fshape(f)[0] for f in t) != out_dims
                        or tuple(_fshape(f)[1] for f in t) != in_dims):
                    raise ShapeError("all terms must share the per-axis factor shapes")
            if dims is not None and tuple(dims) != out_dims:
                raise ShapeError(f"dims {dims} differ from factor sizes {out_dims}")
        else:
            if dims is None:
                raise ShapeError("an empty operator needs explicit dims")
            out_dims = in_dims = tuple(int(n) for n in dims)
        weights.setflags(write=False)
        self.weights = weights
        self.terms = tuple(terms)
        self.out_dims = out_dims
        self.in_dims = in_dims

    @classmethod
    def identity(cls, dims, weight=1.0):
        return cls([weight], [[ToeplitzSym(np.eye(n)[0]) for n in dims]])

    @classmethod
    def zeros(cls, dims):
        return cls(np.zeros(0), [], dims=dims)

    @property
    def dims(self):
        if self.out_dims != self.in_dims:
            raise ShapeError("operator is not square")
        return self.out_dims

    @property
    def ndim(self):
        return len(self.out_dims)

    @property
    def rank(self):
        return self.weights.size

    @property
    def size(self):
        return math.prod(self.out_dims)

    def is_toeplitz(self):
        return all(isinstance(f, ToeplitzSym) for t in self.terms for f in t)

    def dense(self):
        """Dense matrix in C-order raveling of the grid (oracle use)."""
        check_dense_size((math.prod(self.out_dims), math.prod(self.in_dims)))
        out = np.zeros((math.prod(self.out_dims), math.prod(self.in_dims)))
        for w, t in zip(self.weights, self.terms):
            k = np.array([[w]])
            for f in t:
                k = np.kron(k, _fdense(f))
            out += k
        return out

    def submatrix(self, rows, cols):
        """Restriction to tensor index subsets (per-axis rows and columns)."""
        terms = [[_fdense(f)[np.ix_(r, c)] for f, r, c in zip(t, rows, cols)] for t in self.terms]
        if not terms:
            return KroneckerCovariance.zeros(tuple(len(r) for r in rows))
        return KroneckerCovariance(self.weights, terms)

    def scaled(self, alpha):
        return KroneckerCovariance(self.weights * alpha, self.terms, dims=self.out_dims)

    def __add__(self, other):
        if not isinstance(other, KroneckerCovariance):
            return NotImplemented
        if other.out_dims != self.out_dims or other.in_dims != self.in_dims:
            raise ShapeError("operator shapes differ")
        return KroneckerCovariance(np.concatenate([self.weights, other.weights]),
                                   list(self.terms) + list(other.terms), dims=self.out_dims)

    def __sub__(self, other):
        return self + other.scaled(-1.0)

    def apply_dense(self, x):
        """Apply to a dense tensor of shape ``in_dims`` (no rank structure)."""
        x = np.asarray(x, dtype=float).reshape(self.in_dims)
        out = np.zeros(self.out_dims)
        for w, t in zip(self.weights, self.terms):
            y = x
            for l, f in enumerate(t):
                y = np.moveaxis(_fapply(f, np.moveaxis(y, l, 0)), 0, l)
            out += w * y
        return out

    def __repr__(self):
        return f"KroneckerCovariance(dims={self.out_dims}, rank={self.rank})"


def from_cp(q: CpTensor) -> KroneckerCovariance:
    """Operator whose term ``k`` has the Toeplitz factors with first columns ``q_k^(l)``."""
    if q.rank == 0:
        return KroneckerCovariance.zeros(q.shape)
    terms = [[ToeplitzSym(f[:, k]) for f in q.factors] for k in range(q.rank)]
    return KroneckerCovariance(q.weights, terms)


def covariance_from_kernel(spec, grid, rule=None, tol=None) -> KroneckerCovariance:
    """Kronecker-Toeplitz covariance of a kernel on a collocation grid.

    The first columns are sinc skeleton vectors on the nonnegative lags
    (a single exact term for the Gaussian kernel); ``tol`` optionally
    compresses the skeleton CP tensor first.
    """
    from .sinc import SincRule, sinc_separate

    if rule is None:
        rule = SincRule(32)
    q = sinc_separate(spec, grid, rule, sector="lags")
    if tol:
        q = compress(q, tol)
    return from_cp(q)


def _apply_factor_block(f, col, n_in):
    if col.shape[0] % n_in:
        raise ShapeError(f"vector of length {col.shape[0]} does not fit factor size {n_in}")
    c = col.shape[0] // n_in
    if c == 1:
        return _fapply(f, col)
    r = col.shape[1]
    # (n_in * c, r) Fortran blocks -> (n_in, c * r)
    blk = col.reshape(c, n_in, r).transpose(1, 0, 2).reshape(n_in, c * r)
    out = _fapply(f, blk)
    n_out = out.shape[0]
    return out.reshape(n_out, c, r).transpose(1, 0, 2).reshape(n_out * c, r)


def matvec(c: KroneckerCovariance, z: CpTensor, tol: float | None = None) -> CpTensor:
    """``C z`` in CP format; rank ``R * rank(z)`` before optional compression.

    Term ``(k, j)`` of the result is ``w_k zeta_j (x)_l Q_k^(l) z_j^(l)``.
    """
    if z.ndim != c.ndim:
        raise ShapeError(f"operator of order {c.ndim} applied to tensor of order {z.ndim}")
    if c.rank == 0 or z.rank == 0:
        shape = [s // n_in * n_out for s, n_in, n_out in zip(z.shape, c.in_dims, c.out_dims)]
        return CpTensor.zeros(shape)
    weights = np.kron(c.weights, z.weights)
    factors = []
    for l in range(c.ndim):
        zl = np.asarray(z.factors[l])
        blocks = [_apply_factor_block(t[l], zl, c.in_dims[l]) for t in c.terms]
        factors.append(np.hstack(blocks))
    out = CpTensor(weights, factors)
    if tol:
        out = compress(out, tol)
    return out


def matvec_cost(c: KroneckerCovariance, z_rank: int) -> float:
    """Flop estimate of :func:`matvec`: ``R r_z sum_l cost(Q_l)``.

    A Toeplitz factor costs ``~ 10 n log2(2n)`` (two real FFTs of length
    ``2n`` and a product), a dense factor ``2 n_out n_in``.
    """
    total = 0.0
    for t in c.terms:
        for f in t:
            if isinstance(f, ToeplitzSym):
                total += 10.0 * f.n * math.log2(2 * f.n)
            else:
                total += 2.0 * f.shape[0] * f.shape[1]
    return total * z_rank


def diag(c: KroneckerCovariance) -> CpTensor:
    """Diagonal of ``C`` as a rank-R CP tensor."""
    if c.rank == 0:
        return CpTensor.zeros(c.dims)
    factors = [np.column_stack([_fdiag(t[l]) for t in c.terms]) for l in range(c.ndim)]
    return CpTensor(c.weights, factors)


def trace(c: KroneckerCovariance) -> float:
    """``sum_k w_k prod_l trace(Q_k^(l))`` in ``O(R d)`` for Toeplitz factors."""
    total = 0.0
    for w, t in zip(c.weights, c.terms):
        p = w
        for f in t:
            p *= _ftrace(f)
        total += p
    return float(total)


def log_trace(c: KroneckerCovariance) -> float:
    """``log trace(C)`` accumulated in log space; usable for huge ``d``."""
    if c.rank == 0:
        return -math.inf
    logs = np.empty(c.rank)
    signs = np.sign(c.weights)
    for k, t in enumerate(c.terms):
        tr = np.array([_ftrace(f) for f in t])
        signs[k] *= np.prod(np.sign(tr))
        with np.errstate(divide="ignore"):
            logs[k] = np.log(abs(c.weights[k])) + np.sum(np.log(np.abs(tr)))
    val, sign = special.logsumexp(logs, b=signs, return_sign=True)
    if sign <= 0:
        raise ParameterError("trace is not positive; log_trace undefined")
    return float(val)


def tucker_diag_trace(a: TuckerTensor):
    """Centre value ``A(x0)`` of a generating Tucker tensor and the trace.

    For a radial generating function on an odd grid ``n = 2k + 1`` the
    Toeplitz covariance has the constant diagonal ``A(x0)`` at the centre
    index ``(k, ..., k)``, so ``trace(C) = A(x0) prod n_l``.  Costs
    ``O(prod r_l)``.
    """
    shape = a.shape
    if any(n % 2 == 0 for n in shape):
        raise GridError("centre value needs odd n on every axis")
    value = a.entry(tuple(n // 2 for n in shape))
    return value, value * math.prod(shape)


@dataclass(frozen=True)
class SplitCovariance:
    """Exact splitting ``C = q0 I + C_hat`` with ``diag(C_hat) = 0``.

    ``q0`` is the scalar diagonal of ``C``.  With ``Q = D + Q_hat`` per
    factor (``D`` the constant diagonal), the product of each term expands
    into ``prod D`` (collected into ``q0``) and the ``2**d - 1`` mixed
    products containing at least one ``Q_hat``; those form ``hat``.
    """

    q0: float
    hat: KroneckerCovariance
    dims: tuple = field(default=())

    def dense(self):
        return self.q0 * np.eye(math.prod(self.dims)) + (self.hat.dense() if self.hat.rank else 0.0)


def _const_diag(f):
    dg = _fdiag(f)
    if not np.allclose(dg, dg[0], rtol=0, atol=1e-14 * max(1.0, abs(dg[0]))):
        raise ParameterError("split needs factors with constant diagonal")
    return float(dg[0])


def _hat_factor(f):
    if isinstance(f, ToeplitzSym):
        c = np.array(f.first_column)
        c[0] = 0.0
        return ToeplitzSym(c)
    a = np.array(f)
    np.fill_diagonal(a, 0.0)
    return a


def _fdiag_free(h):
    return h.first_column if isinstance(h, ToeplitzSym) else h


def _ident_factor(n, value):
    c = np.zeros(n)
    c[0] = value
    return ToeplitzSym(c)


def split(c: KroneckerCovariance) -> SplitCovariance:
    """Split a square operator into its scalar diagonal and a zero-diagonal rest."""
    dims = c.dims
    d = len(dims)
    q0 = 0.0
    weights, terms = [], []
    for w, t in zip(c.weights, c.terms):
        dg = [_const_diag(f) for f in t]
        hat = [_hat_factor(f) for f in t]
        zero = [not np.any(_fdiag_free(h)) for h in hat]
        q0 += w * math.prod(dg)
        for mask in range(1, 2**d):
            fac, scale = [], w
            if any(zero[l] for l in range(d) if mask >> l & 1):
                continue
            for l in range(d):
                if mask >> l & 1:
                    fac.append(hat[l])
                else:
                    fac.append(_ident_factor(dims[l], 1.0))
                    scale *= dg[l]
            if scale == 0:
                continue
            weights.append(scale)
            terms.append(fac)
    hat_op = KroneckerCovariance(weights, terms) if terms else KroneckerCovariance.zeros(dims)
    return SplitCovariance(float(q0), hat_op, tuple(dims))


class MatFun(str, Enum):
    INVERSE = "inverse"
    SQRT = "sqrt"


def _op_to_cp(a: KroneckerCovariance) -> CpTensor:
    factors = [np.column_stack([_fdense(t[l]).reshape(-1, order="F") for t in a.terms])
               for l in range(a.ndim)]
    return CpTensor(a.weights, factors)


def _cp_to_op(x: CpTensor, out_dims, in_dims) -> KroneckerCovariance:
    if x.rank == 0:
        return KroneckerCovariance.zeros(out_dims)
    terms = [[x.factors[l][:, k].reshape(out_dims[l], in_dims[l], order="F") for l in range(x.ndim)]
             for k in range(x.rank)]
    return KroneckerCovariance(x.weights, terms)


def operator_product(a: KroneckerCovariance, b: KroneckerCovariance) -> KroneckerCovariance:
    """``A B`` with dense factors, rank ``R_a R_b``."""
    if a.in_dims != b.out_dims:
        raise ShapeError("operator shapes do not chain")
    if a.rank == 0 or b.rank == 0:
        return KroneckerCovariance.zeros(a.out_dims)
    weights = np.kron(a.weights, b.weights)
    terms = [[_fapply(fa, _fdense(fb)) for fa, fb in zip(ta, tb)] for ta in a.terms for tb in b.terms]
    return KroneckerCovariance(weights, terms)


def compress_operator(a: KroneckerCovariance, tol: float, refine: bool = False) -> KroneckerCovariance:
    """Rank truncation of an operator, treating each factor as a vector of length ``n_out n_in``."""
    if a.rank <= 1 or not tol:
        return a
    return _cp_to_op(compress(_op_to_cp(a), tol, refine=refine), a.out_dims, a.in_dims)


def operator_norm(a: KroneckerCovariance) -> float:
    """Frobenius norm of the operator."""
    if a.rank == 0:
        return 0.0
    return norm(_op_to_cp(a))


def spectral_norm(a: KroneckerCovariance, iterations: int = 50, seed: int = 0) -> float:
    """Power-iteration estimate of ``||A||_2`` on dense vectors."""
    if a.rank == 0:
        return 0.0
    check_dense_size(a.in_dims)
    n = math.prod(a.in_dims)
    apply = lambda v: a.apply_dense(v).reshape(-1)
    return _power_norm(apply, apply, n, iterations, seed)


class _TuckerOperator:
    """Operator in Tucker form over vectorized factor matrices (series workspace).

    ``bases[l]`` has orthonormal columns of length ``n_l**2`` (Fortran
    vec of ``n_l x n_l`` matrices) and the operator is
    ``sum_{a} core[a] (x)_l mat(bases[l][:, a_l])``.
    """

    def __init__(self, core, bases, dims):
        self.core = core
        self.bases = bases
        self.dims = dims

    @classmethod
    def from_kron(cls, a: KroneckerCovariance):
        from .formats import _core_from_coeffs, _side_reduction

        x = _op_to_cp(a)
        bases, coeffs = _side_reduction(x)
        return cls(_core_from_coeffs(x.weights, coeffs), bases, a.dims)

    def norm(self):
        return float(np.linalg.norm(self.core))

    def scaled(self, alpha):
        return _TuckerOperator(self.core * alpha, self.bases, self.dims)

    def truncate(self, tol_abs):
        from .formats import _hosvd_core

        if tol_abs <= 0:
            return self
        tb, small, _ = _hosvd_core(self.core, tol_abs)
        return _TuckerOperator(small, [b @ t for b, t in zip(self.bases, tb)], self.dims)

    def _rebase(self, blocks, cores_per_block):
        # blocks[l]: list of (n^2 x r) column sets; cores: list of cores, one
        # per block index, combined along the block diagonal
        from .formats import mode_product

        new_bases, maps = [], []
        for l in range(len(self.dims)):
            m = np.hstack(blocks[l])
            u, sv, vt = linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
            keep = sv > 1e-15 * sv[0] if sv.size and sv[0] > 0 else np.zeros(sv.size, bool)
            keep[:1] = True
            u, coef = u[:, keep], sv[keep, None] * vt[keep]
            new_bases.append(u)
            offs = np.cumsum([0] + [b.shape[1] for b in blocks[l]])
            maps.append([coef[:, offs[i]:offs[i + 1]] for i in range(len(blocks[l]))])
        core = np.zeros([b.shape[1] for b in new_bases])
        for i, g in enumerate(cores_per_block):
            part = g
            for l in range(len(self.dims)):
                part = mode_product(part, maps[l][i], l)
            core += part
        return _TuckerOperator(core, new_bases, self.dims)

    def __add__(self, other):
        return self._rebase([[a, b] for a, b in zip(self.bases, other.bases)], [self.core, other.core])

    def times(self, a: KroneckerCovariance):
        """``self @ A`` for a Kronecker operator ``A``."""
        blocks = [[] for _ in self.dims]
        cores = []
        for w, t in zip(a.weights, a.terms):
            for l, f in enumerate(t):
                n = self.dims[l]
                mats = self.bases[l].reshape(n, n, -1, order="F")
                fd = _fdense(f)
                prod = np.einsum("ijr,jk->ikr", mats, fd)
                blocks[l].append(prod.reshape(n * n, -1, order="F"))
            cores.append(self.core * w)
        return self._rebase(blocks, cores)

    def to_kron(self) -> KroneckerCovariance:
        from .formats import _core_to_cp

        w, cols = _core_to_cp(self.core)
        if w.size == 0:
            return KroneckerCovariance.zeros(self.dims)
        x = CpTensor(w, [b @ c for b, c in zip(self.bases, cols)])
        return _cp_to_op(x, self.dims, self.dims)


def matfun_series(s: SplitCovariance, fun, terms: int = 30, trunc_tol: float = 1e-10,
                  info: dict | None = None) -> KroneckerCovariance:
    """Inverse or square root of ``C = q0 (I + A)``, ``A = C_hat / q0``, by power series.

    Neumann series ``sum (-A)^j`` for the inverse and the binomial series
    ``sum binom(1/2, j) A^j`` for the square root.  Powers and partial sums
    are kept in Tucker form over the vectorized factor matrices and
    truncated right after they are formed ("add and compress"); step ``j``
    truncates at ``trunc_tol max(2**-j, 1/terms)`` relative to the object
    being truncated.
    Summation stops once a term is below ``trunc_tol`` relative to the
    partial sum.  The result is returned as a Kronecker sum.

    The series is entered only if the cheap bound
    ``sum_k |w_k| prod_l ||Q_hat||_2 / q0`` or the power-iteration estimate
    of ``||A||_2`` is below one; otherwise :class:`DivergenceError` is raised
    with both numbers.  ``info`` (if a dict) receives ``terms_used``,
    ``bound``, ``estimate`` and the Tucker ranks of every partial sum.
    """
    fun = MatFun(fun)
    if not s.q0 > 0:
        raise ParameterError("series needs a positive diagonal q0")
    dims = s.dims
    a = s.hat.scaled(1.0 / s.q0)
    bound = sum(abs(w) * math.prod(_fnorm2(f) for f in t) for w, t in zip(a.weights, a.terms))
    estimate = bound
    if a.rank and bound >= 1.0:
        estimate = spectral_norm(a) if math.prod(dims) <= 2 * 10**6 else bound
        if estimate >= 1.0:
            raise DivergenceError(
                f"series precondition violated: bound {bound:.3g}, estimate {estimate:.3g}",
                norms={"bound": bound, "estimate": estimate})
    ident = _TuckerOperator.from_kron(KroneckerCovariance.identity(dims))
    x = ident
    power = ident
    ranks = [x.core.shape]
    used = 0
    step = a.scaled(-1.0) if fun is MatFun.INVERSE else a
    for j in range(1, terms + 1):
        if a.rank == 0:
            break
        tol_j = trunc_tol * max(0.5**j, 1.0 / terms)
        power = power.times(step)
        power = power.truncate(tol_j * power.norm())
        coef = 1.0 if fun is MatFun.INVERSE else float(special.binom(0.5, j))
        term = power.scaled(coef)
        used = j
        x = x + term
        x = x.truncate(tol_j * x.norm())
        ranks.append(x.core.shape)
        if term.norm() <= trunc_tol * x.norm():
            break
    prefactor = 1.0 / s.q0 if fun is MatFun.INVERSE else math.sqrt(s.q0)
    if info is not None:
        info.update(terms_used=used, bound=bound, estimate=estimate, ranks=ranks)
    return x.to_kron().scaled(prefactor)


def series_residual(c: KroneckerCovariance, x: KroneckerCovariance, fun) -> float:
    """Dense relative residual ``||C X - I||_F / sqrt(N)`` (inverse) or
    ``||X X - C||_F / ||C||_F`` (square root)."""
    fun = MatFun(fun)
    cd = c.dense()
    xd = x.dense()
    if fun is MatFun.INVERSE:
        return float(np.linalg.norm(cd @ xd - np.eye(cd.shape[0])) / math.sqrt(cd.shape[0]))
    return float(np.linalg.norm(xd @ xd - cd) / np.linalg.norm(cd))


def scaled_norms(c: KroneckerCovariance, iterations: int = 50):
    """Per-term diagnostic ``||Q0^-1 Q_hat_k^(1)||_2`` and its ``1/n`` scaling.

    ``Q0`` is the per-axis share ``q0**(1/d) I`` of the scalar diagonal,
    and term ``k`` contributes ``|w_k|**(1/d) Q_hat_k^(1)``.  Norms are
    estimated by ``iterations`` power steps.  Returns an array with rows
    ``(k, norm, scaled_norm)``.
    """
    s_q0 = sum(w * math.prod(_const_diag(f) for f in t) for w, t in zip(c.weights, c.terms))
    d = c.ndim
    q0_axis = abs(s_q0) ** (1.0 / d)
    rows = []
    for k, (w, t) in enumerate(zip(c.weights, c.terms)):
        f = _hat_factor(t[0])
        n = _fshape(f)[0]
        nrm = _power_norm(lambda v: _fapply(f, v), lambda v: _fapply_t(f, v), n, iterations)
        nrm *= abs(w) ** (1.0 / d) / q0_axis
        rows.append((k, nrm, nrm / n))
    return np.array(rows)
