"""Selective rank verification for multivariate Gaussian observations.

Given X ~ N(mu, sigma) with sigma known, decide whether the k largest
observations came from means exceeding all the others by more than a margin
delta, with error at most alpha conditional on which indices were selected.
"""

__version__ = "0.1.0"

from .baselines import HsdQuantile, hsd_quantile, hsd_verify
from .clb import LowerBound, clb_exact, clb_fast
from .errors import (
    BoundaryTieError,
    DegenerateTruncationError,
    DomainError,
    InsufficientConditioningError,
    ModelValidationError,
    NotPSDError,
    RankVerifyError,
    SelectionError,
    SigmaMismatchError,
)
from .model import (
    CovFamilyTag,
    GaussianModel,
    classify_covariance,
    cov_ar1,
    cov_diagonal,
    cov_equicorrelated,
    multinomial_gaussian_approx,
    sample_covariance,
    validate,
)
from .numerics import sf_ratio, std_normal_cdf, std_normal_quantile, std_normal_sf
from .selection import PairStat, Selection, cross_correlation, min_pair, pair_stat, top_k
from .sim import Scenario, SimResult, estimate_conditional, mvn_sample, scenario_appendix_a, scenario_tightness
from .verifier import (
    FastCheckResult,
    SelectivePValue,
    VerificationReport,
    fast_check,
    reduction_applies,
    selective_p_value,
    verify,
)

__all__ = [name for name in dir() if not name.startswith("_")]
