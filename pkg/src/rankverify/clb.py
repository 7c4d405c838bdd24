"""Conditional confidence lower bounds on min_{i in S} mu_i - max_{j not in S} mu_j.

The exact bound inverts the selective test over the margin delta: selective
p-values are non-decreasing in delta, so the set of margins where the test
fails to reject is an up-set and its infimum is found by bisection. The fast
bound inverts the closest-pair condition in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from . import numerics
from .model import GaussianModel
from .selection import PairGeometry, TiePolicy, top_k
from .verifier import TruncationGeometry, _check_alpha, full_test_reject

MAX_EXPANSIONS = 60

BoundStatus = Literal["finite", "minus-infinity", "unbounded"]


@dataclass(frozen=True)
class LowerBound:
    """A 1 - alpha lower confidence bound, valid conditional on the selection.

    ``value`` is ``-inf`` when ``status == "minus-infinity"`` and ``+inf``
    when the test rejects at every margin tried (``status == "unbounded"``).
    ``iterations`` counts test evaluations (0 for the closed-form bound).
    """

    value: float
    alpha: float
    method: Literal["exact", "fast"]
    iterations: int
    bracket: tuple[float, float]
    status: BoundStatus


def default_tol(model: GaussianModel) -> float:
    return 1e-8 * (1.0 + float(np.max(np.abs(model.x))))


def initial_bracket(model: GaussianModel, geo: PairGeometry) -> tuple[float, float]:
    spread = float(np.max(model.x) - np.min(model.x))
    pad = 10.0 * float(np.max(geo.v))
    return -spread - pad, spread + pad


def search_root(reject, lo: float, hi: float, tol: float) -> tuple[float, tuple[float, float], int, BoundStatus]:
    """Infimum of {delta : not reject(delta)} for a monotone decision.

    Expands ``[lo, hi]`` geometrically (factor 2, at most ``MAX_EXPANSIONS``
    times per side) until ``reject(lo)`` and ``not reject(hi)``, then bisects
    to width ``tol`` keeping that invariant. Returns the midpoint.
    """
    calls = 0
    width = hi - lo

    step = width
    ok = False
    for _ in range(MAX_EXPANSIONS + 1):
        calls += 1
        if reject(lo):
            ok = True
            break
        hi_known_fail = lo
        lo -= step
        step *= 2.0
        hi = hi_known_fail
    if not ok:
        return -math.inf, (lo, hi), calls, "minus-infinity"

    step = width
    ok = False
    for _ in range(MAX_EXPANSIONS + 1):
        calls += 1
        if not reject(hi):
            ok = True
            break
        lo = hi
        hi += step
        step *= 2.0
    if not ok:
        return math.inf, (lo, hi), calls, "unbounded"

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        calls += 1
        if reject(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), (lo, hi), calls, "finite"


def clb_exact(
    model: GaussianModel,
    k: int,
    alpha: float = 0.05,
    tol: float | None = None,
    ties: TiePolicy = "error",
) -> LowerBound:
    """Smallest margin at which the full selective test fails to reject."""
    alpha = _check_alpha(alpha)
    if tol is None:
        tol = default_tol(model)
    if not tol > 0:
        raise ValueError("tol must be positive")
    geo = TruncationGeometry(model, top_k(model, k, ties=ties))
    lo, hi = initial_bracket(model, geo)
    value, bracket, calls, status = search_root(
        lambda delta: full_test_reject(geo, delta, alpha), lo, hi, tol
    )
    return LowerBound(value=value, alpha=alpha, method="exact", iterations=calls, bracket=bracket, status=status)


def clb_fast(model: GaussianModel, k: int, alpha: float = 0.05, ties: TiePolicy = "error") -> LowerBound:
    """Closed-form bound from the closest-pair condition.

    ``-inf`` if 1 - Phi(min D^0) > alpha/2; otherwise the margin at which the
    smallest one-sided pair p-value first reaches alpha/2, i.e.
    ``min_{i,j} (x_i - x_j - v_ij z_{1-alpha/2})``.
    """
    alpha = _check_alpha(alpha)
    geo = PairGeometry(model, top_k(model, k, ties=ties))
    d0_min = float(np.min(geo.d0))
    if numerics.std_normal_sf(d0_min) > alpha / 2.0:
        return LowerBound(
            value=-math.inf, alpha=alpha, method="fast", iterations=0,
            bracket=(-math.inf, -math.inf), status="minus-infinity",
        )
    z = numerics.std_normal_quantile(1.0 - alpha / 2.0)
    value = float(np.min(geo.diff - geo.v * z))
    return LowerBound(value=value, alpha=alpha, method="fast", iterations=0, bracket=(value, value), status="finite")
