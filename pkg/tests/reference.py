"""Independent reference implementations used as test oracles.

Nothing here calls into the library's verifier or bound code.
"""

import math

import mpmath as mp
import numpy as np
from scipy import special


def n2_exact_bound(g, var_sum, alpha):
    """Exact bound for two observations with gap g and Var(X_1 - X_2) = var_sum.

    With a single pair the truncation keeps D^delta above -delta/v, so the
    selective p-value is sf((g - delta)/v) / sf(-delta/v); solve p = alpha.
    """
    mp.mp.dps = 50
    v = mp.sqrt(mp.mpf(var_sum))
    g = mp.mpf(g)

    def f(delta):
        return mp.ncdf(-(g - delta) / v) / mp.ncdf(delta / v) - alpha

    lo, hi = g - 40 * v, g
    for _ in range(400):
        mid = (lo + hi) / 2
        if f(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return float((lo + hi) / 2)


def pair_offsets(x, sigma, k):
    """Per-pair (i, j, diff, v, c_lo, c_hi) by explicit loops."""
    n = len(x)
    order = sorted(range(n), key=lambda a: (-x[a], a))
    inside = sorted(order[:k])
    outside = sorted(order[k:])
    pairs = [(i, j) for i in inside for j in outside]

    def v(a, b):
        return math.sqrt(sigma[a][a] - 2 * sigma[a][b] + sigma[b][b])

    out = []
    for i, j in pairs:
        c_lo, c_hi = math.inf, math.inf
        for kk, ll in pairs:
            if (kk, ll) == (i, j):
                r = 1.0
            else:
                r = (sigma[i][kk] - sigma[i][ll] - sigma[j][kk] + sigma[j][ll]) / (v(i, j) * v(kk, ll))
            d0 = (x[kk] - x[ll]) / v(kk, ll)
            if r > 1e-12:
                c_lo = min(c_lo, d0 / r)
            elif r < -1e-12:
                c_hi = min(c_hi, d0 / -r)
        out.append((i, j, x[i] - x[j], v(i, j), c_lo, c_hi))
    return out


def _log_mass(a, b):
    """log P(a < Z < b), reflecting to the upper tail so nothing underflows."""
    flip = a + b < 0
    a, b = np.where(flip, -b, a), np.where(flip, -a, b)
    la, lb = special.log_ndtr(-a), special.log_ndtr(-b)
    with np.errstate(divide="ignore"):
        return la + np.log1p(-np.exp(lb - la))


def max_pvalue_on_grid(offsets, deltas):
    """Largest selective p-value at every margin in ``deltas``."""
    worst = np.zeros_like(deltas)
    for _, _, diff, v, c_lo, c_hi in offsets:
        d = (diff - deltas) / v
        lo, hi = d - c_lo, d + c_hi
        p = np.exp(_log_mass(d, hi) - _log_mass(lo, hi))
        worst = np.maximum(worst, p)
    return worst


def grid_scan_bound(x, sigma, k, alpha, tol, points=100_000):
    """Smallest non-rejected margin, located by repeated 10^5-point grid scans.

    Each scan keeps only the cell where the decision first flips and rescans
    it, until the grid spacing is below tol / 10.
    """
    offsets = pair_offsets(list(x), [list(r) for r in sigma], k)
    vmax = max(o[3] for o in offsets)
    spread = max(x) - min(x)
    lo, hi = -spread - 10 * vmax, spread + 10 * vmax
    for _ in range(60):
        if max_pvalue_on_grid(offsets, np.array([lo]))[0] <= alpha:
            break
        lo -= hi - lo
    else:
        return -math.inf
    while True:
        grid = np.linspace(lo, hi, points)
        fail = max_pvalue_on_grid(offsets, grid) > alpha
        if not fail.any():
            return math.inf
        first = int(np.argmax(fail))
        if grid[1] - grid[0] <= tol / 10:
            return float(grid[first])
        lo, hi = grid[first - 1], grid[first]
