"""Simultaneous-inference comparator: a Tukey-HSD style rule.

Rejects when X_I >= X_J + v_IJ * h, with h the 1 - alpha quantile of
max_{i != j} |Z_i - Z_j| / v_ij for Z ~ N(0, sigma), estimated by Monte Carlo.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import NotPSDError, SigmaMismatchError
from .model import GaussianModel
from .selection import min_pair, top_k

# keep each chunk of the (draws x pairs) working array around this many floats
_CHUNK_FLOATS = 4_000_000


@dataclass(frozen=True)
class HsdQuantile:
    h: float
    alpha: float
    reps: int
    seed: int
    std_error: float
    workers: int
    sigma_checksum: str


def sigma_checksum(sigma) -> str:
    sigma = np.ascontiguousarray(sigma, dtype=np.float64)
    return hashlib.sha256(sigma.tobytes() + repr(sigma.shape).encode()).hexdigest()[:16]


def cholesky_factor(sigma) -> np.ndarray:
    """Lower-triangular factor of sigma, retrying once with a tiny ridge.

    The ridge is 1e-12 * trace / n, enough for singular PSD matrices such as
    the multinomial covariance; anything needing more raises NotPSDError.
    """
    sigma = np.asarray(sigma, dtype=float)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    n = sigma.shape[0]
    jitter = 1e-12 * float(np.trace(sigma)) / n
    try:
        return np.linalg.cholesky(sigma + jitter * np.eye(n))
    except np.linalg.LinAlgError:
        raise NotPSDError("covariance is not positive semi-definite; cannot sample") from None


def order_statistic_index(alpha: float, reps: int) -> int:
    """0-based position of the ceil((1 - alpha) * reps)-th order statistic."""
    # guard against (1 - 0.1) * 1e5 = 90000.00000000001
    rank = math.ceil(round((1.0 - alpha) * reps, 9))
    return min(max(rank, 1), reps) - 1


def _max_pairwise(z: np.ndarray, iu, v_pairs: np.ndarray) -> np.ndarray:
    return np.max(np.abs(z[:, iu[0]] - z[:, iu[1]]) / v_pairs, axis=1)


def hsd_quantile(sigma, alpha: float = 0.1, reps: int = 100_000, seed: int = 0, workers: int = 1) -> HsdQuantile:
    """Monte Carlo estimate of the HSD quantile h_{1-alpha}.

    All normal draws come from a single seeded stream, so ``h`` is
    bit-identical for a given (sigma, alpha, reps, seed) whatever the worker
    count; workers only split the reduction over chunks of draws.
    """
    sigma = np.asarray(sigma, dtype=float)
    n = sigma.shape[0]
    if n < 2:
        raise ValueError("need n >= 2")
    if reps < 1000:
        raise ValueError("reps must be at least 1000")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    chol = cholesky_factor(sigma)
    d = np.diag(sigma)
    iu = np.triu_indices(n, 1)
    v_pairs = np.sqrt(d[iu[0]] - 2.0 * sigma[iu] + d[iu[1]])

    rng = np.random.default_rng(seed)
    z = rng.standard_normal((reps, n)) @ chol.T

    chunk = max(1, _CHUNK_FLOATS // max(1, iu[0].size))
    starts = range(0, reps, chunk)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: _max_pairwise(z[s:s + chunk], iu, v_pairs), starts))
    else:
        parts = [_max_pairwise(z[s:s + chunk], iu, v_pairs) for s in starts]
    m = np.sort(np.concatenate(parts))

    idx = order_statistic_index(alpha, reps)
    # binomial approximation: one standard deviation of the rank of the quantile
    spread = int(math.ceil(math.sqrt(reps * alpha * (1.0 - alpha))))
    lo, hi = max(idx - spread, 0), min(idx + spread, reps - 1)
    return HsdQuantile(
        h=float(m[idx]),
        alpha=float(alpha),
        reps=int(reps),
        seed=int(seed),
        std_error=float(m[hi] - m[lo]) / 2.0,
        workers=int(workers),
        sigma_checksum=sigma_checksum(sigma),
    )


def hsd_verify(model: GaussianModel, k: int, alpha: float, h: HsdQuantile, ties="error") -> bool:
    """True when X_I >= X_J + v_IJ * h for the closest inside/outside pair."""
    if sigma_checksum(model.sigma) != h.sigma_checksum:
        raise SigmaMismatchError("HSD quantile was computed for a different covariance")
    if not math.isclose(alpha, h.alpha, rel_tol=0, abs_tol=1e-15):
        raise ValueError(f"HSD quantile is for alpha={h.alpha}, not {alpha}")
    sel = top_k(model, k, ties=ties)
    i, j, _ = min_pair(model, sel, 0.0)
    s = model.sigma
    v = math.sqrt(s[i, i] - 2.0 * s[i, j] + s[j, j])
    return bool(model.x[i] >= model.x[j] + v * h.h)
