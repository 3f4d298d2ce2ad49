"""Order certification of short-time Feynman-Kac approximations by covariance matching."""
from .covariance import (
    ENDPOINT,
    BridgeBasis,
    CovarianceKernel,
    QuadratureRule,
    SchemeSpec,
    check_scheme_symmetry,
    eval_bm_covariance,
    eval_scheme_covariance,
    load_scheme,
    make_scheme,
    psd_check,
)
from .errors import CapacityError, CovmatchError, EvaluationError, InputError
from .moments import (
    DiophantineIndex,
    apply_D_zeta,
    bm_moment_polynomial,
    certify_order,
    enumerate_indices,
    generalized_moment_via_polynomial,
    index_stats,
    scheme_moment_polynomial,
)
from .polynomial import MomentPolynomial, Polynomial

__version__ = "0.1.0"

__all__ = [
    "ENDPOINT",
    "BridgeBasis",
    "CapacityError",
    "CovarianceKernel",
    "CovmatchError",
    "DiophantineIndex",
    "EvaluationError",
    "InputError",
    "MomentPolynomial",
    "Polynomial",
    "QuadratureRule",
    "SchemeSpec",
    "apply_D_zeta",
    "bm_moment_polynomial",
    "certify_order",
    "check_scheme_symmetry",
    "enumerate_indices",
    "eval_bm_covariance",
    "eval_scheme_covariance",
    "generalized_moment_via_polynomial",
    "index_stats",
    "load_scheme",
    "make_scheme",
    "psd_check",
    "scheme_moment_polynomial",
]
