"""Tensor grids, dense collocation/projection of radial kernels and sensor subgrids."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import BoundsError, GridError, ParameterError, ShapeError, SingularityError, SizeError
from .formats import CpTensor, TuckerTensor, check_dense_size
from .kernels import KernelSpec, eval_radial

__all__ = [
    "Mode",
    "TensorGrid",
    "SensorSet",
    "collocate",
    "restrict",
    "pairwise_covariance",
]

MAX_DENSE_ORDER = 4


class Mode(str, Enum):
    COLLOCATION = "collocation"
    PROJECTION = "projection"


def _per_axis(value, dim, name, cast=float):
    if np.isscalar(value):
        return (cast(value),) * dim
    value = tuple(cast(v) for v in value)
    if len(value) != dim:
        raise GridError(f"{name} has {len(value)} entries for dim={dim}")
    return value


@dataclass(frozen=True)
class TensorGrid:
    """Uniform tensor grid on ``[-b_1, b_1] x ... x [-b_d, b_d]``.

    Collocation grids carry nodes ``-b + i h`` with ``h = 2b/(n-1)``;
    projection grids carry ``n`` cells of width ``h = 2b/n`` represented by
    their midpoints.
    """

    dim: int = 3
    half_widths: float | tuple[float, ...] = 1.0
    points_per_axis: int | tuple[int, ...] = 33
    mode: Mode = Mode.COLLOCATION

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise GridError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        try:
            object.__setattr__(self, "mode", Mode(self.mode))
        except ValueError:
            raise GridError(f"unknown grid mode {self.mode!r}") from None
        b = _per_axis(self.half_widths, self.dim, "half_widths")
        n = _per_axis(self.points_per_axis, self.dim, "points_per_axis", cast=int)
        if min(b) <= 0:
            raise GridError("half widths must be positive")
        if min(n) < 2:
            raise GridError("need at least 2 points per axis")
        object.__setattr__(self, "half_widths", b)
        object.__setattr__(self, "points_per_axis", n)

    @classmethod
    def uniform(cls, dim, n, b=1.0, mode=Mode.COLLOCATION):
        return cls(dim=dim, half_widths=b, points_per_axis=n, mode=mode)

    @property
    def shape(self):
        return self.points_per_axis

    @property
    def size(self):
        return int(np.prod(self.points_per_axis))

    def spacing(self, axis):
        b, n = self.half_widths[axis], self.points_per_axis[axis]
        return 2.0 * b / (n - 1) if self.mode is Mode.COLLOCATION else 2.0 * b / n

    def nodes(self, axis):
        """Node coordinates (collocation) or cell midpoints (projection)."""
        b, n = self.half_widths[axis], self.points_per_axis[axis]
        h = self.spacing(axis)
        if self.mode is Mode.COLLOCATION:
            x = -b + h * np.arange(n)
            # exact symmetry about the origin
            if n % 2 == 1:
                x[n // 2] = 0.0
            x[(n + 1) // 2:] = -x[n // 2 - 1::-1]
            return x
        x = -b + h * (np.arange(n) + 0.5)
        x[n // 2:] = -x[(n - 1) // 2::-1]
        return x

    def cell_edges(self, axis):
        if self.mode is not Mode.PROJECTION:
            raise GridError("cell edges exist only in projection mode")
        x = self.nodes(axis)
        h = self.spacing(axis)
        return x - 0.5 * h, x + 0.5 * h

    def lags(self, axis):
        """Nonnegative lags ``i h``, ``i = 0..n-1``, the first column of Toeplitz factors."""
        return self.spacing(axis) * np.arange(self.points_per_axis[axis])

    def origin_index(self):
        if any(n % 2 == 0 for n in self.points_per_axis):
            raise GridError("the origin is a node only when every n is odd")
        return tuple(n // 2 for n in self.points_per_axis)

    def has_origin_node(self):
        return self.mode is Mode.COLLOCATION and all(n % 2 == 1 for n in self.points_per_axis)

    def to_dict(self):
        return {"dim": self.dim, "half_widths": list(self.half_widths),
                "points_per_axis": list(self.points_per_axis), "mode": self.mode.value}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"dim", "half_widths", "points_per_axis", "mode"}
        if unknown:
            raise ParameterError(f"unknown TensorGrid keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SensorSet:
    """Tensor subgrid of sensor nodes (0-based indices per axis) and noise variance."""

    indices: tuple
    noise_variance: float = 0.0

    def __post_init__(self):
        idx = []
        for l, ix in enumerate(self.indices):
            a = np.asarray(ix, dtype=int).reshape(-1)
            if a.size == 0:
                raise ParameterError(f"axis {l} has no sensors")
            if np.any(np.diff(a) <= 0):
                raise ParameterError(f"sensor indices on axis {l} must be strictly increasing")
            if a[0] < 0:
                raise BoundsError(f"negative sensor index on axis {l}")
            a.setflags(write=False)
            idx.append(a)
        if not idx:
            raise ParameterError("sensor set needs at least one axis")
        if not self.noise_variance >= 0:
            raise ParameterError("noise variance must be nonnegative")
        object.__setattr__(self, "indices", tuple(idx))
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    @classmethod
    def full(cls, shape, noise_variance=0.0):
        return cls(tuple(np.arange(n) for n in shape), noise_variance)

    @classmethod
    def strided(cls, shape, counts, noise_variance=0.0):
        """``counts[l]`` nodes spread evenly over axis ``l``."""
        counts = _per_axis(counts, len(shape), "counts", cast=int)
        idx = []
        for n, m in zip(shape, counts):
            if not 1 <= m <= n:
                raise BoundsError(f"cannot place {m} sensors on {n} nodes")
            idx.append(np.unique(np.round(np.linspace(0, n - 1, m + 2)[1:-1]).astype(int))
                       if m < n else np.arange(n))
        return cls(tuple(idx), noise_variance)

    @property
    def shape(self):
        return tuple(a.size for a in self.indices)

    @property
    def size(self):
        return int(np.prod(self.shape))

    def check(self, shape):
        if len(shape) != len(self.indices):
            raise ShapeError(f"sensor set of order {len(self.indices)} on a tensor of order {len(shape)}")
        for l, (a, n) in enumerate(zip(self.indices, shape)):
            if a[-1] >= n:
                raise BoundsError(f"sensor index {a[-1]} out of range for axis {l} of size {n}")

    def to_dict(self):
        return {"indices": [a.tolist() for a in self.indices], "noise_variance": self.noise_variance}

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"indices", "noise_variance"}
        if unknown:
            raise ParameterError(f"unknown SensorSet keys: {sorted(unknown)}")
        return cls(tuple(data["indices"]), data.get("noise_variance", 0.0))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _check_feasible(spec, grid):
    if spec.dim != grid.dim:
        raise ShapeError(f"kernel dim {spec.dim} differs from grid dim {grid.dim}")
    if grid.dim > MAX_DENSE_ORDER:
        raise SizeError(f"dense collocation supports d <= {MAX_DENSE_ORDER}")
    check_dense_size(grid.shape)


def _radial_on(spec, coords):
    # coords: per-axis 1D arrays; returns kernel on the outer grid
    scales = spec.axis_scales
    r2 = np.zeros(())
    for l, x in enumerate(coords):
        shp = [1] * len(coords)
        shp[l] = x.size
        r2 = r2 + (x / scales[l]).reshape(shp) ** 2
    return eval_radial(spec, np.sqrt(r2))


def collocate(spec: KernelSpec, grid: TensorGrid, quad_points: int = 8) -> np.ndarray:
    """Dense tensor of kernel samples.

    Collocation mode samples the kernel at the nodes.  Projection mode
    returns cell averages computed with a ``quad_points``-point
    Gauss-Legendre tensor rule per cell; the default even rule has no node
    at a cell midpoint, so singular kernels stay finite on the origin cell.
    """
    _check_feasible(spec, grid)
    if grid.mode is Mode.COLLOCATION:
        if spec.singular_at_origin and grid.has_origin_node():
            raise SingularityError("grid contains the origin; use projection mode or exclude it")
        return _radial_on(spec, [grid.nodes(l) for l in range(grid.dim)])
    check_dense_size(tuple(n * quad_points for n in grid.shape))
    g, wg = np.polynomial.legendre.leggauss(quad_points)
    out = np.zeros(grid.shape)
    offsets = [0.5 * grid.spacing(l) * g for l in range(grid.dim)]
    # loop over the quadrature points of one cell; each pass is a shifted grid
    for idx in np.ndindex(*(quad_points,) * grid.dim):
        coords = [grid.nodes(l) + offsets[l][idx[l]] for l in range(grid.dim)]
        w = np.prod([wg[i] for i in idx]) / 2.0**grid.dim
        out += w * _radial_on(spec, coords)
    return out


def pairwise_covariance(spec: KernelSpec, grid: TensorGrid) -> np.ndarray:
    """Dense ``N x N`` covariance ``C_ij = k(x_i - x_j)`` from node coordinates.

    Rows follow C-order raveling of the grid.
    """
    if spec.dim != grid.dim:
        raise ShapeError(f"kernel dim {spec.dim} differs from grid dim {grid.dim}")
    check_dense_size((grid.size, grid.size))
    pts = np.stack(np.meshgrid(*[grid.nodes(l) for l in range(grid.dim)], indexing="ij"), axis=-1)
    pts = pts.reshape(-1, grid.dim) / np.asarray(spec.axis_scales)
    diff = pts[:, None, :] - pts[None, :, :]
    return eval_radial(spec, np.sqrt(np.sum(diff**2, axis=-1)))


def _restrict_tucker(t, idx):
    core = np.asarray(t.core)
    factors = []
    from .formats import mode_product

    for l, (f, ix) in enumerate(zip(t.factors, idx)):
        q, r = np.linalg.qr(f[ix])
        core = mode_product(core, r, l)
        factors.append(q)
    return TuckerTensor(core, factors)


def restrict(obj, sensors: SensorSet):
    """Restrict a tensor or Kronecker operator to the sensor subgrid.

    Dense arrays are sliced, CP and Tucker factors are row-sliced (Tucker
    factors are re-orthonormalized by QR and the triangular factors absorbed
    into the core), and Kronecker covariances get their factors restricted
    to the sensor rows and columns.  CP ranks are unchanged.
    """
    from .kroncov import KroneckerCovariance

    idx = sensors.indices
    if isinstance(obj, np.ndarray):
        sensors.check(obj.shape)
        return obj[np.ix_(*idx)].copy()
    if isinstance(obj, CpTensor):
        sensors.check(obj.shape)
        return CpTensor(obj.weights, [f[ix] for f, ix in zip(obj.factors, idx)])
    if isinstance(obj, TuckerTensor):
        sensors.check(obj.shape)
        return _restrict_tucker(obj, idx)
    if isinstance(obj, KroneckerCovariance):
        sensors.check(obj.dims)
        return obj.submatrix(idx, idx)
    raise TypeError(f"cannot restrict {type(obj).__name__}")
