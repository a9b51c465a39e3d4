"""Gaussian expectations of nonlinear and generalized functions and their
derivatives with respect to covariance entries (generalized Price theorem)."""
from .clipstudy import (
    ClipCurve,
    LinearBoundReport,
    check_linear_bound,
    clip_correlation,
    clip_pair,
    continuity_modulus,
    f_tau_curve,
    f_tau_second_derivative,
)
from .covparam import (
    CovCoords,
    CovMatrix,
    CovMultiindex,
    SymMatrix,
    covariance,
    flatten,
    index_pairs,
    omega_pack,
    omega_unpack,
    parallel_weight,
    sigma_alpha,
    validate_pd,
)
from .errors import (
    AtomsNotSampleable,
    DerivativeUnavailable,
    DimensionMismatch,
    GausspriceError,
    InvalidParameter,
    NodeBudgetExceeded,
    NotPositiveDefinite,
    NotSymmetric,
    OrderTooLarge,
    ParseError,
    StencilLeavesPDCone,
)
from .expectation import Estimate, QuadratureSpec, isserlis_moment, pair, pair_mc
from .gaussian import GaussianModel, characteristic, characteristic_deriv, density, sample
from .nonlinearity import (
    GeneralizedFunction,
    clip_1d,
    constant,
    dirac,
    indicator,
    monomial,
    parse,
    relu,
    sign,
    tensor,
    weak_derivative,
)
from .price import PriceReport, fd_derivative, mcmahon_derivative, price_derivative, verify

__version__ = "0.1.0"
