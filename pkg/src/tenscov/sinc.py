"""Sinc-quadrature exponential sums and the inverse-Fourier route.

A kernel with mixture representation

    q(rho) = int_0^inf mu(tau) exp(-tau rho**2) dtau

is approximated by the exponential sum ``sum_k w_k exp(-tau_k rho**2)``,
and since ``exp(-tau ||x||**2)`` factorizes over the axes every term is a
rank-1 tensor on a tensor grid.

Two node sets are available.  The default (``"de"``) places the nodes at
``log tau_k = u0 + gamma sinh(k h)`` with ``h = C0 log(M)/M``, which handles
both the algebraic and the exponential tails of the integrands and gives
exponential convergence in ``M``.  The ``"plain"`` rule uses ``t_k = k h``
directly in the Gaussian form ``int a(t) exp(-rho**2 t**2) dt`` and, for
even integrands, folds to ``M + 1`` terms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ParameterError, ShapeError, SymmetryError, UnsupportedRepresentation
from .formats import CpTensor, check_dense_size
from .grid import Mode, TensorGrid, collocate
from .kernels import Decay, Family, KernelSpec, LaplaceIntegrand, laplace_integrand

__all__ = [
    "SincRule",
    "exponential_sum",
    "sinc_separate",
    "sinc_errors",
    "spectral_frequencies",
    "spectral_to_covariance",
    "dense_inverse_dft",
]


@dataclass(frozen=True)
class SincRule:
    """Sinc quadrature rule with ``2M + 1`` nodes and step ``h = C0 log(M)/M``.

    ``scheme`` is ``"de"`` (sinh-mapped nodes in ``log tau``, the default)
    or ``"plain"`` (``t_k = k h``).  ``gamma`` is the sinh amplitude of the
    ``"de"`` map; ``fold`` collapses symmetric pairs of an even plain rule.
    """

    M: int
    C0: float = 1.0
    scheme: str = "de"
    gamma: float = 2.0
    fold: bool = True

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ParameterError(f"M must be a positive integer, got {self.M}")
        if not self.C0 > 0:
            raise ParameterError("C0 must be positive")
        if self.scheme not in ("de", "plain"):
            raise ParameterError(f"unknown sinc scheme {self.scheme!r}")
        if not self.gamma > 0:
            raise ParameterError("gamma must be positive")

    @property
    def step(self) -> float:
        # log(1) = 0 would give a zero step
        return self.C0 * math.log(max(self.M, 2)) / self.M

    def points(self) -> np.ndarray:
        """Nodes ``k h`` for ``k = -M..M``."""
        return self.step * np.arange(-self.M, self.M + 1)

    def plain_weights(self, a) -> tuple[np.ndarray, np.ndarray]:
        """Points ``t_k`` and weights ``a(t_k) h`` of the unfolded plain rule."""
        t = self.points()
        return t, a(t) * self.step


def _plain_sum(li: LaplaceIntegrand, rule: SincRule):
    if li.decay is not Decay.GAUSSIAN or not li.even:
        raise UnsupportedRepresentation("the plain rule needs an even Gaussian-decay integrand")
    h = rule.step
    k = np.arange(0 if rule.fold else -rule.M, rule.M + 1)
    t = k * h
    w = li.weight(np.abs(t)) * h
    if rule.fold:
        w[1:] *= 2.0
    # the integrand over the whole line is twice the half-line integral
    return t**2, 0.5 * w


def exponential_sum(li: LaplaceIntegrand, rule: SincRule, lo: float, hi: float):
    """Exponents and weights with ``q(rho) ~ sum_k w_k exp(-tau_k rho**2)``.

    ``[lo, hi]`` is the range of distances on which the sum is used; it sets
    the centre of the node distribution in the ``"de"`` scheme.
    """
    if not hi > 0 or lo < 0 or lo > hi:
        raise ParameterError(f"invalid distance range [{lo}, {hi}]")
    if rule.scheme == "plain":
        return _plain_sum(li, rule)
    lo = max(lo, li.a0, 1e-12 * hi)
    h = rule.step
    v = rule.points()
    # the integrand exponent is in tau = t**2 for Gaussian decay, t otherwise
    u0 = li.center(lo, hi)
    if li.decay is Decay.GAUSSIAN:
        u0 = 2.0 * u0
    u = u0 + rule.gamma * np.sinh(v)
    tau = np.exp(u)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        w = h * rule.gamma * np.cosh(v) * li.density(tau) * tau
    keep = np.isfinite(w) & np.isfinite(tau) & (w > 0)
    return tau[keep], w[keep]


def _axis_factor(tau, grid: TensorGrid, axis, scale, sector):
    """``exp(-tau x**2 / scale**2)`` on the nodes (or cell averages), one column per tau."""
    if sector == "lags":
        x = grid.lags(axis) / scale
        return np.exp(-np.outer(x**2, tau))
    x = grid.nodes(axis) / scale
    if grid.mode is Mode.COLLOCATION:
        return np.exp(-np.outer(x**2, tau))
    lo, hi = grid.cell_edges(axis)
    lo, hi = lo / scale, hi / scale
    st = np.sqrt(tau)
    width = hi - lo
    # cell average of exp(-tau x^2): sqrt(pi)/(2 sqrt(tau)) [erf(sqrt(tau) x)]
    diff = special.erf(np.outer(hi, st)) - special.erf(np.outer(lo, st))
    # for large sqrt(tau)|x| the erf difference cancels; use erfc on the far side
    pos = lo >= 0
    neg = hi <= 0
    if np.any(pos):
        diff[pos] = special.erfc(np.outer(lo[pos], st)) - special.erfc(np.outer(hi[pos], st))
    if np.any(neg):
        diff[neg] = special.erfc(np.outer(-hi[neg], st)) - special.erfc(np.outer(-lo[neg], st))
    return math.sqrt(math.pi) / 2.0 * diff / st / width[:, None]


def _distance_range(spec: KernelSpec, grid: TensorGrid, sector):
    scales = spec.axis_scales
    hi = math.sqrt(sum((grid.half_widths[l] * (2.0 if sector == "lags" else 1.0) / scales[l]) ** 2
                       for l in range(grid.dim)))
    lo = min(grid.spacing(l) / scales[l] for l in range(grid.dim))
    if grid.mode is Mode.PROJECTION and sector != "lags":
        lo *= 0.5
    return lo, hi


def sinc_separate(spec: KernelSpec, grid: TensorGrid, rule: SincRule, sector: str = "nodes",
                  a0: float | None = None) -> CpTensor:
    """Canonical approximation of a collocated or projected radial kernel.

    Every quadrature term contributes the rank-1 tensor
    ``w_k exp(-tau_k x_1**2) o ... o exp(-tau_k x_d**2)`` (or its cell
    averages in projection mode), ordered by increasing ``tau``.  For
    isotropic kernels all modes share the same skeleton vectors.

    Parameters
    ----------
    sector : {"nodes", "lags"}
        Sample on the grid nodes, or on the nonnegative lags ``i h`` that
        form the first columns of Toeplitz covariance factors.
    a0 : float, optional
        Lower end of the distance range; defaults to the smallest grid
        spacing.
    """
    if spec.dim != grid.dim:
        raise ShapeError(f"kernel dim {spec.dim} differs from grid dim {grid.dim}")
    if sector not in ("nodes", "lags"):
        raise ParameterError(f"unknown sector {sector!r}")
    scales = spec.axis_scales
    if spec.family is Family.GAUSSIAN:
        tau = np.array([1.0])
        w = np.array([spec.sigma2])
    elif spec.family is Family.PSLATER and spec.p == 2.0:
        tau = np.array([1.0])
        w = np.array([spec.sigma2])
    else:
        lo, hi = _distance_range(spec, grid, sector)
        if a0 is not None:
            lo = a0
        li = laplace_integrand(spec, a0=lo)
        tau, w = exponential_sum(li, rule, lo, hi)
        order = np.argsort(tau, kind="stable")
        tau, w = tau[order], w[order]
    factors = []
    cache = {}
    for l in range(grid.dim):
        key = (grid.half_widths[l], grid.points_per_axis[l], scales[l])
        if key not in cache:
            cache[key] = _axis_factor(tau, grid, l, scales[l], sector)
        factors.append(cache[key])
    return CpTensor(w, factors)


def sinc_errors(spec: KernelSpec, grid: TensorGrid, Ms, C0=1.0, scheme="de", exclude_origin=True):
    """Max-norm and Frobenius relative errors of :func:`sinc_separate` against
    dense collocation, one ``(M, rank, max_err, fro_err)`` tuple per ``M``.

    When ``exclude_origin`` is set and the grid has a node at the origin,
    the singular kernel is compared on all other nodes.
    """
    from .formats import reconstruct

    if spec.singular_at_origin and grid.has_origin_node():
        mask = np.ones(grid.shape, dtype=bool)
        mask[grid.origin_index()] = False
        if not exclude_origin:
            raise ParameterError("singular kernel on a grid containing the origin")
        ref = np.zeros(grid.shape)
        coords = np.meshgrid(*[grid.nodes(l) for l in range(grid.dim)], indexing="ij")
        r = np.sqrt(sum(c**2 for c in coords))
        from .kernels import eval_radial

        ref[mask] = eval_radial(spec, r[mask])
    else:
        mask = np.ones(grid.shape, dtype=bool)
        ref = collocate(spec, grid)
    out = []
    for M in Ms:
        cp = sinc_separate(spec, grid, SincRule(int(M), C0=C0, scheme=scheme))
        approx = reconstruct(cp)
        diff = (approx - ref)[mask]
        max_err = float(np.max(np.abs(diff)) / np.max(np.abs(ref[mask])))
        fro_err = float(np.linalg.norm(diff) / np.linalg.norm(ref[mask]))
        out.append((int(M), cp.rank, max_err, fro_err))
    return out


# ----------------------------------------------------------------------------
# inverse-Fourier route


def spectral_frequencies(grid: TensorGrid, axis: int) -> np.ndarray:
    """Symmetric frequency grid ``xi_j = 2 pi j / (n h)`` matching the spatial nodes.

    Ordered like the spatial nodes, i.e. ``j`` runs from ``-(n//2)`` upward,
    so ``ifftshift`` moves ``xi = 0`` to the front.
    """
    n = grid.points_per_axis[axis]
    h = grid.spacing(axis)
    return 2.0 * math.pi / (n * h) * (np.arange(n) - n // 2)


def _ifft_columns(u, scale):
    shifted = np.fft.ifftshift(u, axes=0)
    x = np.fft.fftshift(np.fft.ifft(shifted, axis=0, norm="ortho"), axes=0)
    return x * scale


def spectral_to_covariance(u: CpTensor, grid: TensorGrid, physical: bool = False,
                           imag_tol: float = 1e-10) -> CpTensor:
    """Map spectral-density samples in CP form to covariance samples.

    A unitary 1D inverse DFT is applied to every factor column; the CP rank
    is unchanged.  Samples must be even on the symmetric frequency grid
    (``u[j] = u[-j]``), which makes the transform real; the imaginary
    residue is checked against ``imag_tol`` relative to the column norm and
    then discarded.  With ``physical`` each mode is scaled by
    ``dxi * sqrt(n) / (2 pi)`` so that the result approximates the
    continuous inverse Fourier transform of the density.  Output entry
    ``j`` belongs to the lattice point ``(j - n//2) h``: these are the grid
    nodes for odd ``n`` and the nodes shifted by ``h/2`` for even ``n``.
    """
    if u.shape != grid.shape:
        raise ShapeError(f"CP shape {u.shape} does not match grid {grid.shape}")
    factors = []
    for l, f in enumerate(u.factors):
        n = f.shape[0]
        f = np.asarray(f)
        mirror = np.roll(f[::-1], 1 if n % 2 == 0 else 0, axis=0)
        if n % 2 == 0:
            # the Nyquist entry at index 0 has no partner
            ok = np.allclose(f[1:], mirror[1:], rtol=1e-12, atol=1e-14 * np.max(np.abs(f), initial=0.0))
        else:
            ok = np.allclose(f, mirror, rtol=1e-12, atol=1e-14 * np.max(np.abs(f), initial=0.0))
        if not ok:
            raise SymmetryError(f"mode {l} samples are not even about the zero frequency")
        scale = 1.0
        if physical:
            dxi = 2.0 * math.pi / (n * grid.spacing(l))
            scale = dxi * math.sqrt(n) / (2.0 * math.pi)
        x = _ifft_columns(f, scale)
        ref = np.linalg.norm(x.real, axis=0)
        resid = np.max(np.abs(x.imag) / np.where(ref > 0, ref, 1.0), initial=0.0)
        if resid > imag_tol:
            raise SymmetryError(f"imaginary residue {resid:.2e} in mode {l}")
        factors.append(x.real)
    return CpTensor(u.weights, factors)


def dense_inverse_dft(u: np.ndarray) -> np.ndarray:
    """d-dimensional unitary inverse DFT of centred samples (oracle for the CP route)."""
    check_dense_size(u.shape)
    x = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(u), norm="ortho"))
    return x.real
