"""Standard-normal primitives.

Every tail probability in the package goes through this module. The survival
function is evaluated from the complementary error function directly, never
as ``1 - cdf``, because selective p-values divide tail masses that can be as
small as 1e-300.

Infinite endpoints are accepted wherever an interval endpoint is expected, so
an empty max/min (``-inf`` / ``+inf``) flows through without special casing.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import DegenerateTruncationError, DomainError

# direct ratio when the denominator mass is at least this, log-space otherwise
LOG_PATH_THRESHOLD = 1e-250

_PROB_SLACK = 1e-15
_SQRT1_2 = math.sqrt(0.5)


def probability(value: float) -> float:
    """Validate ``value`` as a probability.

    Values within 1e-15 outside of [0, 1] are clamped; anything further out
    (or NaN) raises :class:`DomainError`.
    """
    value = float(value)
    if math.isnan(value):
        raise DomainError("probability is NaN")
    if value < 0.0:
        if value < -_PROB_SLACK:
            raise DomainError(f"probability {value!r} is below 0")
        return 0.0
    if value > 1.0:
        if value > 1.0 + _PROB_SLACK:
            raise DomainError(f"probability {value!r} exceeds 1")
        return 1.0
    return value


def std_normal_cdf(x: float) -> float:
    """Phi(x). Raises :class:`DomainError` for non-finite input."""
    x = float(x)
    if not math.isfinite(x):
        raise DomainError(f"std_normal_cdf needs a finite argument, got {x!r}")
    return float(special.ndtr(x))


def std_normal_sf(x: float) -> float:
    """1 - Phi(x), computed without cancellation. Accepts +-inf."""
    x = float(x)
    if math.isnan(x):
        raise DomainError("std_normal_sf got NaN")
    return float(special.ndtr(-x))


def std_normal_quantile(p: float) -> float:
    """Inverse of :func:`std_normal_cdf` on the open interval (0, 1)."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"std_normal_quantile needs 0 < p < 1, got {p!r}")
    return float(special.ndtri(p))


def log_sf(x):
    """log(1 - Phi(x)), accurate deep into the upper tail."""
    return special.log_ndtr(np.negative(x))


def interval_mass(lo, hi):
    """P(lo < Z < hi) for a standard normal Z, elementwise.

    Each branch uses the tail in which the difference is computed without
    cancellation: survival functions right of zero, cdfs left of zero, and an
    erf sum for intervals straddling zero.
    """
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    out = np.empty(lo.shape)
    right = lo >= 0.0
    left = ~right & (hi <= 0.0)
    mid = ~(right | left)
    out[right] = special.ndtr(-lo[right]) - special.ndtr(-hi[right])
    out[left] = special.ndtr(hi[left]) - special.ndtr(lo[left])
    out[mid] = 0.5 * (special.erf(hi[mid] * _SQRT1_2) - special.erf(lo[mid] * _SQRT1_2))
    return np.maximum(out, 0.0)


def log_interval_mass(lo, hi):
    """log P(lo < Z < hi), usable when the mass underflows double precision."""
    lo, hi = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    out = np.empty(lo.shape)
    right = lo >= 0.0
    left = ~right & (hi <= 0.0)
    mid = ~(right | left)
    with np.errstate(divide="ignore", invalid="ignore"):
        # right tail: log sf(lo) + log(1 - sf(hi)/sf(lo))
        la = special.log_ndtr(-lo[right])
        lb = special.log_ndtr(-hi[right])
        out[right] = la + np.log(-np.expm1(lb - la))
        # left tail mirrors onto the right one
        la = special.log_ndtr(hi[left])
        lb = special.log_ndtr(lo[left])
        out[left] = la + np.log(-np.expm1(lb - la))
        out[mid] = np.log(
            0.5 * (special.erf(hi[mid] * _SQRT1_2) - special.erf(lo[mid] * _SQRT1_2))
        )
    # equal endpoints give nan from (-inf) - (-inf); the mass is zero there
    out[np.isnan(out) & (lo >= hi)] = -np.inf
    return out


def _ratio_direct(num_lo, num_hi, den_lo, den_hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        return interval_mass(num_lo, num_hi) / interval_mass(den_lo, den_hi)


def _ratio_log(num_lo, num_hi, den_lo, den_hi):
    with np.errstate(invalid="ignore"):
        return np.exp(log_interval_mass(num_lo, num_hi) - log_interval_mass(den_lo, den_hi))


def sf_ratio_array(num_lo, num_hi, den_lo, den_hi):
    """Vectorized :func:`sf_ratio`; preconditions are checked by the caller."""
    num_lo, num_hi, den_lo, den_hi = np.broadcast_arrays(
        *(np.asarray(a, dtype=float) for a in (num_lo, num_hi, den_lo, den_hi))
    )
    if np.any(den_hi <= den_lo):
        raise DegenerateTruncationError("denominator interval has zero width")
    den = interval_mass(den_lo, den_hi)
    direct = den >= LOG_PATH_THRESHOLD
    out = np.empty(den.shape)
    if np.any(direct):
        out[direct] = interval_mass(num_lo[direct], num_hi[direct]) / den[direct]
    if not np.all(direct):
        tail = ~direct
        out[tail] = _ratio_log(num_lo[tail], num_hi[tail], den_lo[tail], den_hi[tail])
    return np.clip(out, 0.0, 1.0)


def sf_ratio(num_lo: float, num_hi: float, den_lo: float, den_hi: float) -> float:
    """[sf(num_lo) - sf(num_hi)] / [sf(den_lo) - sf(den_hi)].

    Requires ``den_lo <= num_lo <= num_hi <= den_hi``; infinite endpoints are
    allowed. Switches to log space when the denominator mass drops below
    ``LOG_PATH_THRESHOLD``.
    """
    vals = [float(v) for v in (num_lo, num_hi, den_lo, den_hi)]
    if any(math.isnan(v) for v in vals):
        raise DomainError("sf_ratio got NaN")
    num_lo, num_hi, den_lo, den_hi = vals
    if den_hi <= den_lo:
        raise DegenerateTruncationError(
            f"denominator interval [{den_lo!r}, {den_hi!r}] has zero width"
        )
    if not den_lo <= num_lo <= num_hi <= den_hi:
        raise DomainError(
            f"numerator interval [{num_lo!r}, {num_hi!r}] is not inside "
            f"[{den_lo!r}, {den_hi!r}]"
        )
    return float(sf_ratio_array(num_lo, num_hi, den_lo, den_hi))
