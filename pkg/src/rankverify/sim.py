"""Scenario presets and conditional Monte Carlo estimates.

Every rate here is conditional on the selection event: only draws whose top-k
set equals ``target_s`` count as replicates.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .baselines import cholesky_factor, hsd_quantile, hsd_verify
from .clb import clb_exact, clb_fast
from .errors import InsufficientConditioningError
from .model import GaussianModel, validate
from .selection import Selection
from .verifier import TruncationGeometry, _fast_from_geometry, full_test_reject

MIN_CONDITIONING_EVENTS = 50

Estimand = Literal["power", "false-rejection", "clb-coverage"]
SimMethod = Literal["full", "fast-only", "hsd", "exact", "fast"]


@dataclass(frozen=True)
class Scenario:
    mu: np.ndarray
    sigma: np.ndarray
    k: int
    name: str

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        if mu.ndim != 1 or sigma.shape != (mu.size, mu.size):
            raise ValueError("mu and sigma dimensions disagree")
        if not 1 <= self.k <= mu.size - 1:
            raise ValueError(f"k must be in [1, {mu.size - 1}]")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class SimResult:
    scenario: str
    estimand: Estimand
    method: SimMethod
    target_s: tuple[int, ...]
    reps: int
    replicates: int
    conditioning_event_rate: float
    conditional_rate: float
    std_error: float
    seed: int
    alpha: float
    delta: float
    boundary_leakage: int | None = None


def mvn_sample(scenario: Scenario, reps: int, seed: int) -> np.ndarray:
    """``reps`` draws of N(mu, sigma) as a (reps x n) array."""
    chol = cholesky_factor(scenario.sigma)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((reps, scenario.mu.size))
    return scenario.mu + z @ chol.T


def scenario_appendix_a() -> Scenario:
    """n = 5, K = 1 scenario where the fast check loses most of its power.

    X_1 = s1 Z_1 + mu_1, X_2 = s2 Z_2 + mu_2, X_j = -s2 Z_2 + s3 Z_j + mu_j
    (j > 2) with s1^2 = 1, s2^2 = 5, s3^2 = 0.1, mu = (5, 3, 0, 0, 0).
    The covariance is formed as A A^T from these loadings.
    """
    n = 5
    s1, s2, s3 = 1.0, math.sqrt(5.0), math.sqrt(0.1)
    loadings = np.zeros((n, n))
    loadings[0, 0] = s1
    loadings[1, 1] = s2
    for j in range(2, n):
        loadings[j, 1] = -s2
        loadings[j, j] = s3
    mu = np.array([5.0, 3.0, 0.0, 0.0, 0.0])
    return Scenario(mu=mu, sigma=loadings @ loadings.T, k=1, name="appendix-a")


def scenario_tightness(n: int = 5, k: int = 1, delta: float = 0.0, sigma=None, spread: float = 20.0) -> Scenario:
    """Means at which the union null is true and the test is exactly size alpha.

    The first k-1 means sit at +spread*scale, mean k at ``delta``, mean k+1 at
    0 and the rest at -spread*scale, with scale = max_i sqrt(sigma_ii). A
    spread of 20 stands in for infinity.
    """
    if sigma is None:
        sigma = np.eye(n)
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (n, n):
        raise ValueError("sigma must be n x n")
    scale = math.sqrt(float(np.max(np.diag(sigma))))
    mu = np.empty(n)
    mu[: k - 1] = spread * scale
    mu[k - 1] = delta
    mu[k] = 0.0
    mu[k + 1:] = -spread * scale
    return Scenario(mu=mu, sigma=sigma, k=k, name="tightness")


def true_gap(mu, target_s) -> float:
    inside = np.zeros(len(mu), dtype=bool)
    inside[list(target_s)] = True
    return float(np.min(mu[inside]) - np.max(mu[~inside]))


def _leakage(scenario: Scenario, top_sets: np.ndarray) -> int:
    """Draws where a +spread mean fell out of S or a -spread mean got in."""
    k = scenario.k
    high = set(range(k - 1))
    low = set(range(k + 1, scenario.mu.size))
    count = 0
    for row in top_sets:
        s = set(row.tolist())
        if not high <= s or s & low:
            count += 1
    return count


def estimate_conditional(
    scenario: Scenario,
    target_s=None,
    delta: float = 0.0,
    alpha: float = 0.1,
    method: SimMethod = "full",
    estimand: Estimand = "power",
    reps: int = 10_000,
    seed: int = 0,
    workers: int = 1,
    hsd_reps: int = 100_000,
    tol: float | None = None,
) -> SimResult:
    """Conditional rejection rate (or CLB coverage) on the event S = target_s.

    ``method`` is one of full / fast-only / hsd for the power and
    false-rejection estimands and exact / fast for clb-coverage. The HSD
    quantile is estimated once from ``scenario.sigma`` with the same seed.
    """
    k = scenario.k
    target = tuple(sorted(int(i) for i in (range(k) if target_s is None else target_s)))
    if len(target) != k:
        raise ValueError(f"target_s must have {k} indices")
    if reps < 100:
        raise ValueError("reps must be at least 100")
    if estimand == "clb-coverage":
        if method not in ("exact", "fast"):
            raise ValueError("clb-coverage needs method 'exact' or 'fast'")
    elif estimand in ("power", "false-rejection"):
        if method not in ("full", "fast-only", "hsd"):
            raise ValueError("method must be full, fast-only or hsd")
    else:
        raise ValueError(f"unknown estimand {estimand!r}")

    gap = true_gap(scenario.mu, target)
    if estimand == "false-rejection" and not gap <= delta:
        raise ValueError(
            f"scenario means give gap {gap:.6g} > delta={delta}; the union null is false on target_s"
        )

    base = validate(scenario.mu, scenario.sigma)
    sigma = base.sigma
    draws = mvn_sample(scenario, reps, seed)
    order = np.argsort(-draws, axis=1, kind="stable")
    top_sets = np.sort(order[:, :k], axis=1)
    hit = np.all(top_sets == np.asarray(target), axis=1)
    n_hit = int(np.count_nonzero(hit))
    if n_hit < MIN_CONDITIONING_EVENTS:
        raise InsufficientConditioningError(n_hit, reps, MIN_CONDITIONING_EVENTS)
    leakage = _leakage(scenario, top_sets) if scenario.name == "tightness" else None

    outside = tuple(i for i in range(scenario.mu.size) if i not in target)
    h = None
    if method == "hsd":
        h = hsd_quantile(sigma, alpha=alpha, reps=hsd_reps, seed=seed, workers=workers)

    def one(x) -> bool:
        model = GaussianModel(x=x, sigma=sigma)
        xs = np.sort(x)[::-1]
        sel = Selection(k=k, inside=target, outside=outside, boundary_gap=float(xs[k - 1] - xs[k]))
        if estimand == "clb-coverage":
            bound = clb_exact(model, k, alpha, tol=tol) if method == "exact" else clb_fast(model, k, alpha)
            return bool(gap >= bound.value)
        if method == "hsd":
            return hsd_verify(model, k, alpha, h)
        geo = TruncationGeometry(model, sel)
        if method == "fast-only":
            return _fast_from_geometry(geo, delta, alpha).passes
        return full_test_reject(geo, delta, alpha)

    rows = draws[hit]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, rows))
    else:
        outcomes = [one(x) for x in rows]
    successes = sum(outcomes)

    rate = successes / n_hit
    return SimResult(
        scenario=scenario.name,
        estimand=estimand,
        method=method,
        target_s=target,
        reps=int(reps),
        replicates=n_hit,
        conditioning_event_rate=n_hit / reps,
        conditional_rate=rate,
        std_error=math.sqrt(rate * (1.0 - rate) / n_hit),
        seed=int(seed),
        alpha=float(alpha),
        delta=float(delta),
        boundary_leakage=leakage,
    )
