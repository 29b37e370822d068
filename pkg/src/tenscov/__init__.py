"""Rank-structured tensor approximation of covariance kernels.

Canonical and Tucker approximations of Matern/Slater-type kernels by sinc
quadrature and HOSVD/ALS, Kronecker-Toeplitz covariance operators and
spatial-statistics operations that work on the factors only.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BoundsError,
    DivergenceError,
    FactorizationError,
    GridError,
    KernelRangeError,
    NonConvergenceError,
    NumericalError,
    ParameterError,
    RankError,
    ShapeError,
    SingularityError,
    SizeError,
    SymmetryError,
    TenscovError,
    UnsupportedRepresentation,
)
from .kernels import KernelSpec, eval_kernel, eval_spectral_density, laplace_integrand  # noqa: E402
from .grid import SensorSet, TensorGrid, collocate, restrict  # noqa: E402
from .formats import (  # noqa: E402
    CpTensor,
    TuckerTensor,
    add,
    compress,
    frobenius_error,
    inner_product,
    reconstruct,
    scalar_mul,
)
from .decomp import (  # noqa: E402
    TuckerConfig,
    canonical_to_tucker,
    hosvd,
    multigrid_tucker,
    tucker_als,
    tucker_to_canonical,
)
from .sinc import SincRule, sinc_separate, spectral_to_covariance  # noqa: E402
from .kroncov import (  # noqa: E402
    KroneckerCovariance,
    ToeplitzSym,
    diag,
    from_cp,
    matfun_series,
    matvec,
    split,
    trace,
    tucker_diag_trace,
)
from .statops import (  # noqa: E402
    KrigingProblem,
    Rank1Kron,
    chol_rank1,
    conditional_cov,
    design_criteria,
    inv_rank1,
    krige,
    logdet_rank1,
    loglikelihood_rank1,
    quadratic_form,
    solve_cov,
)
