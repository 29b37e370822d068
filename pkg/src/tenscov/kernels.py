"""Radial generating functions and their Laplace-type integral representations.

Every kernel ``q`` handled here is a function of a (possibly axis-scaled)
distance ``rho``.  The families are

* ``Matern``: ``sigma2 * 2**(1-nu)/Gamma(nu) * x**nu * K_nu(x)`` with
  ``x = sqrt(2 nu) r / ell``;
* ``PSlater``: ``sigma2 * exp(-(r/ell)**p)``;
* ``Gaussian``: ``sigma2 * exp(-(r/ell)**2)``;
* ``Newton``: ``sigma2 / r``;
* ``MaternSpectralDensity``: the Matern spectral density ``f_{alpha,nu}``
  in ``dim`` dimensions, treated as a radial function of the frequency.

For the low-rank constructions in :mod:`tenscov.sinc` each supported kernel
is written as a Gaussian mixture

    q(rho) = integral_0^inf mu(tau) exp(-tau rho**2) dtau,

which is what makes the sinc-quadrature terms separable along the axes.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy import special

from .errors import (
    KernelRangeError,
    ParameterError,
    SingularityError,
    UnsupportedRepresentation,
)

__all__ = [
    "Family",
    "Decay",
    "KernelSpec",
    "LaplaceIntegrand",
    "eval_kernel",
    "eval_radial",
    "eval_spectral_density",
    "laplace_integrand",
    "matern_alpha",
    "matern_density_integrand",
    "newton_integrand",
    "slater_integrand",
]

# accuracy envelope of the Bessel evaluation
NU_MAX = 50.0
SCALED_R_MAX = 100.0


class Family(str, Enum):
    MATERN = "Matern"
    PSLATER = "PSlater"
    NEWTON = "Newton"
    SPECTRAL = "MaternSpectralDensity"
    GAUSSIAN = "Gaussian"


class Decay(str, Enum):
    """How the Laplace variable enters the integrand.

    ``GAUSSIAN`` means ``a(t) exp(-p**2 t**2)`` with ``p = rho``;
    ``EXPONENTIAL`` means ``a(t) exp(-p t)`` with ``p = rho**2``.
    """

    GAUSSIAN = "gaussian"
    EXPONENTIAL = "exponential"


_SPEC_KEYS = ("family", "nu", "ell", "p", "alpha", "dim", "sigma2")


@dataclass(frozen=True)
class KernelSpec:
    """Parameters of a radial generating function.

    ``ell`` may be a scalar or one length per axis (diagonal anisotropy);
    it is ignored by the Newton and spectral-density families.
    """

    family: Family
    nu: float = 0.5
    ell: float | tuple[float, ...] = 1.0
    p: float = 1.0
    alpha: float = 1.0
    dim: int = 3
    sigma2: float = 1.0

    def __post_init__(self):
        try:
            fam = Family(self.family)
        except ValueError:
            raise ParameterError(f"unknown kernel family {self.family!r}") from None
        object.__setattr__(self, "family", fam)
        if isinstance(self.ell, (list, tuple, np.ndarray)):
            ell = tuple(float(v) for v in self.ell)
            if len(ell) != self.dim:
                raise ParameterError(f"ell has {len(ell)} entries for dim={self.dim}")
        else:
            ell = float(self.ell)
        object.__setattr__(self, "ell", ell)
        if int(self.dim) != self.dim or self.dim < 1:
            raise ParameterError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if not self.sigma2 > 0:
            raise ParameterError("sigma2 must be positive")
        if min(self.ell_per_axis) <= 0:
            raise ParameterError("ell must be positive")
        if fam is Family.MATERN and not self.nu > 0:
            raise ParameterError("Matern smoothness nu must be positive")
        if fam is Family.PSLATER and not 0 < self.p <= 2:
            raise ParameterError("Slater exponent p must lie in (0, 2]")
        if fam is Family.SPECTRAL and not (self.alpha > 0 and self.nu > 0):
            raise ParameterError("spectral density needs alpha > 0 and nu > 0")

    @property
    def ell_per_axis(self) -> tuple[float, ...]:
        if isinstance(self.ell, tuple):
            return self.ell
        return (self.ell,) * self.dim

    @property
    def isotropic(self) -> bool:
        return len(set(self.ell_per_axis)) == 1

    @property
    def uses_length_scale(self) -> bool:
        return self.family in (Family.MATERN, Family.PSLATER, Family.GAUSSIAN)

    @property
    def axis_scales(self) -> tuple[float, ...]:
        """Per-axis divisor applied to coordinates before taking the norm."""
        if self.uses_length_scale:
            return self.ell_per_axis
        return (1.0,) * self.dim

    @property
    def singular_at_origin(self) -> bool:
        return self.family is Family.NEWTON

    def to_dict(self) -> dict:
        out = asdict(self)
        out["family"] = self.family.value
        if isinstance(self.ell, tuple):
            out["ell"] = list(self.ell)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        unknown = set(data) - set(_SPEC_KEYS)
        if unknown:
            raise ParameterError(f"unknown KernelSpec keys: {sorted(unknown)}")
        if "family" not in data:
            raise ParameterError("KernelSpec needs a 'family'")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "KernelSpec":
        return cls.from_dict(json.loads(text))


def matern_alpha(nu: float, ell: float) -> float:
    """Spectral parameter alpha matching a Matern kernel with range ``ell``."""
    return math.sqrt(2.0 * nu) / ell


def _matern_unit(nu, rho):
    # Matern with ell = 1 as a function of rho = r/ell
    if not 0 < nu <= NU_MAX:
        raise KernelRangeError(f"nu={nu} outside the supported range (0, {NU_MAX}]")
    rho = np.asarray(rho, dtype=float)
    if np.any(rho > SCALED_R_MAX):
        raise KernelRangeError(f"r/ell above {SCALED_R_MAX} is outside the supported range")
    x = math.sqrt(2.0 * nu) * rho
    out = np.ones_like(x)
    pos = x > 0
    xp = x[pos]
    logc = (1.0 - nu) * math.log(2.0) - special.gammaln(nu)
    with np.errstate(over="ignore"):
        k = special.kve(nu, xp)
    # kve overflows only for tiny x, where the kernel equals 1 to double precision
    ok = np.isfinite(k)
    val = np.ones_like(xp)
    val[ok] = np.exp(logc + nu * np.log(xp[ok]) + np.log(k[ok]) - xp[ok])
    out[pos] = np.minimum(val, 1.0)
    return out


def _spectral_unit(nu, alpha, dim, rho):
    eta = nu + dim / 2.0
    logc = (special.gammaln(eta) + 2.0 * nu * math.log(alpha)
            - 0.5 * dim * math.log(math.pi) - special.gammaln(nu))
    rho = np.asarray(rho, dtype=float)
    return np.exp(logc - eta * np.log(alpha**2 + rho**2))


def eval_radial(spec: KernelSpec, rho) -> np.ndarray:
    """Evaluate the kernel at already axis-scaled distances ``rho``.

    For families with a length scale, ``rho`` is ``||x / ell||``; otherwise
    it is the plain Euclidean distance.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ParameterError("distances must be nonnegative")
    fam = spec.family
    if fam is Family.MATERN:
        val = _matern_unit(spec.nu, rho)
    elif fam is Family.PSLATER:
        val = np.exp(-(rho**spec.p))
    elif fam is Family.GAUSSIAN:
        val = np.exp(-(rho**2))
    elif fam is Family.NEWTON:
        if np.any(rho == 0):
            raise SingularityError("Newton kernel 1/r is singular at r = 0")
        val = 1.0 / rho
    else:
        val = _spectral_unit(spec.nu, spec.alpha, spec.dim, rho)
    return spec.sigma2 * val


def eval_kernel(spec: KernelSpec, r):
    """Kernel value ``C(r)`` at distance ``r`` (scalar or array).

    Anisotropic specs have no scalar-distance form; evaluate them through
    :func:`tenscov.grid.collocate` instead.
    """
    if spec.uses_length_scale and not spec.isotropic:
        raise ParameterError("eval_kernel needs an isotropic spec; use collocate for anisotropy")
    scale = spec.ell_per_axis[0] if spec.uses_length_scale else 1.0
    out = eval_radial(spec, np.asarray(r, dtype=float) / scale)
    return float(out) if np.ndim(out) == 0 else out


def eval_spectral_density(spec: KernelSpec, rho):
    """Matern spectral density

        f(rho) = Gamma(nu + d/2) alpha**(2 nu) / (pi**(d/2) Gamma(nu))
                 * (alpha**2 + rho**2) ** (-nu - d/2),

    scaled by ``sigma2``.  A ``Matern`` spec is accepted as well and mapped
    to ``alpha = sqrt(2 nu) / ell``; with this normalization the density
    integrates to ``sigma2`` over R^d.
    """
    if spec.family is Family.SPECTRAL:
        alpha = spec.alpha
    elif spec.family is Family.MATERN and spec.isotropic:
        alpha = matern_alpha(spec.nu, spec.ell_per_axis[0])
    else:
        raise ParameterError("spectral density is defined for MaternSpectralDensity or isotropic Matern specs")
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ParameterError("frequency magnitude must be nonnegative")
    out = spec.sigma2 * _spectral_unit(spec.nu, alpha, spec.dim, rho)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LaplaceIntegrand:
    """Integral representation ``q(p) = int_0^inf a(t) exp(-decay(p, t)) dt``.

    ``weight`` is ``a(t)``; ``decay`` says whether the exponent is
    ``p**2 t**2`` (with ``p = rho``) or ``p t`` (with ``p = rho**2``).
    ``a0`` is the lower end of the distance range on which the
    representation is used for quadrature (0 when the kernel is bounded at
    the origin).  ``exact`` evaluates the represented function at ``rho``
    and ``center`` returns the log of a characteristic value of
    ``tau = t**2`` (Gaussian decay) or ``tau = t`` (exponential decay) for
    distances in ``[lo, hi]``.
    """

    weight: Callable[[np.ndarray], np.ndarray]
    decay: Decay
    a0: float
    exact: Callable[[np.ndarray], np.ndarray]
    center: Callable[[float, float], float] = field(repr=False)
    even: bool = False

    def density(self, tau):
        """Mixture density ``mu(tau)`` with ``q(rho) = int mu(tau) e^{-tau rho^2} dtau``."""
        tau = np.asarray(tau, dtype=float)
        if self.decay is Decay.EXPONENTIAL:
            return self.weight(tau)
        st = np.sqrt(tau)
        with np.errstate(divide="ignore"):
            return self.weight(st) / (2.0 * st)

    def integrand(self, p, t):
        """``a(t) exp(-decay(p, t))`` in the original variables."""
        t = np.asarray(t, dtype=float)
        if self.decay is Decay.GAUSSIAN:
            return self.weight(t) * np.exp(-(p**2) * t**2)
        return self.weight(t) * np.exp(-p * t)


def newton_integrand(sigma2=1.0, a0=1e-2):
    """``sigma2 / rho = sigma2 * 2/sqrt(pi) int_0^inf exp(-rho**2 t**2) dt``."""
    c = 2.0 / math.sqrt(math.pi) * sigma2

    def weight(t):
        return np.full_like(np.asarray(t, dtype=float), c)

    return LaplaceIntegrand(
        weight=weight,
        decay=Decay.GAUSSIAN,
        a0=a0,
        exact=lambda rho: sigma2 / np.asarray(rho, dtype=float),
        center=lambda lo, hi: -math.log(lo * hi),
        even=True,
    )


def slater_integrand(alpha, sigma2=1.0, a0=0.0):
    """Slater function ``sigma2 * exp(-2 sqrt(alpha s))`` with ``s = rho**2``,

        exp(-2 sqrt(alpha s)) = sqrt(alpha/pi) int t**-1.5 exp(-alpha/t) exp(-s t) dt.
    """
    if not alpha > 0:
        raise ParameterError("Slater alpha must be positive")
    c = math.sqrt(alpha / math.pi) * sigma2

    def weight(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = c * t[pos] ** -1.5 * np.exp(-alpha / t[pos])
        return out

    return LaplaceIntegrand(
        weight=weight,
        decay=Decay.EXPONENTIAL,
        a0=a0,
        exact=lambda rho: sigma2 * np.exp(-2.0 * np.sqrt(alpha) * np.asarray(rho, dtype=float)),
        center=lambda lo, hi: 0.5 * math.log(alpha) - 0.5 * math.log(max(lo, 1e-300) * hi),
    )


def matern_density_integrand(nu, alpha, dim, sigma2=1.0):
    """Matern spectral density in the variable ``s = rho**2``,

        (alpha**2 + s)**-eta = 1/Gamma(eta) int t**(eta-1) exp(-alpha**2 t) exp(-s t) dt,

    with ``eta = nu + dim/2``.  Only integer and half-integer ``eta`` are
    accepted.
    """
    eta = nu + dim / 2.0
    twice = 2.0 * eta
    if abs(twice - round(twice)) > 1e-12:
        raise UnsupportedRepresentation(
            f"nu + d/2 = {eta} is neither an integer nor a half-integer")
    logc = 2.0 * nu * math.log(alpha) - 0.5 * dim * math.log(math.pi) - special.gammaln(nu)
    a = alpha**2

    def weight(t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = sigma2 * np.exp(logc + (eta - 1.0) * np.log(t[pos]) - a * t[pos])
        return out

    return LaplaceIntegrand(
        weight=weight,
        decay=Decay.EXPONENTIAL,
        a0=0.0,
        exact=lambda rho: sigma2 * _spectral_unit(nu, alpha, dim, rho),
        center=lambda lo, hi: math.log(eta) - 0.5 * math.log(a * (a + hi**2)),
    )


def laplace_integrand(spec: KernelSpec, a0: float = 1e-2) -> LaplaceIntegrand:
    """Integral representation of a supported kernel.

    Supported: Newton (Gaussian decay), the exponential kernel (``PSlater``
    with ``p = 1`` or ``Matern`` with ``nu = 1/2``) through its Slater form
    ``exp(-2 sqrt(alpha p))`` with ``p = rho**2``, and the Matern spectral
    density when ``nu + d/2`` is an integer or half-integer.  ``rho`` is
    the axis-scaled distance, so the Slater form uses ``alpha = 1/4``.
    """
    fam = spec.family
    if fam is Family.NEWTON:
        if not a0 > 0:
            raise ParameterError("Newton representation needs a0 > 0")
        return newton_integrand(spec.sigma2, a0)
    if (fam is Family.PSLATER and spec.p == 1.0) or (fam is Family.MATERN and spec.nu == 0.5):
        return slater_integrand(0.25, spec.sigma2, max(a0, 0.0))
    if fam is Family.SPECTRAL:
        return matern_density_integrand(spec.nu, spec.alpha, spec.dim, spec.sigma2)
    raise UnsupportedRepresentation(
        f"no exact Laplace representation for {fam.value} with nu={spec.nu}, p={spec.p}")
