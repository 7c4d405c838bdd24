"""Top-k selection event and the pairwise statistics built on it.

Indices are 0-based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np

from .errors import BoundaryTieError, SelectionError
from .model import GaussianModel

TiePolicy = Literal["error", "break-low-index"]


@dataclass(frozen=True)
class Selection:
    """Indices of the k largest observations (``inside``) and the rest.

    ``boundary_gap`` is the k-th largest minus the (k+1)-th largest value.
    ``tie_broken`` is set when that gap is zero and the tie was resolved in
    favour of the lower index.
    """

    k: int
    inside: tuple[int, ...]
    outside: tuple[int, ...]
    boundary_gap: float
    tie_broken: bool = False


@dataclass(frozen=True)
class PairStat:
    i: int
    j: int
    v: float
    d_delta: float
    delta: float


def top_k(model: GaussianModel, k: int, ties: TiePolicy = "error") -> Selection:
    n = model.n
    if not 1 <= k <= n - 1:
        raise SelectionError(f"k must be in [1, {n - 1}], got {k}")
    if ties not in ("error", "break-low-index"):
        raise SelectionError(f"unknown tie policy {ties!r}")
    x = model.x
    # descending by value, ascending by index among equal values
    order = np.lexsort((np.arange(n), -x))
    gap = float(x[order[k - 1]] - x[order[k]])
    tie_broken = False
    if gap <= 0.0:
        if ties == "error":
            raise BoundaryTieError(
                f"observations {int(order[k - 1])} and {int(order[k])} tie at the "
                f"top-{k} boundary (value {x[order[k]]!r})"
            )
        tie_broken = True
    inside = tuple(sorted(int(i) for i in order[:k]))
    outside = tuple(sorted(int(j) for j in order[k:]))
    return Selection(k=k, inside=inside, outside=outside, boundary_gap=gap, tie_broken=tie_broken)


def _check_sides(sel: Selection, i: int, j: int) -> None:
    if i not in sel.inside:
        raise SelectionError(f"index {i} is not in the selected set {sel.inside}")
    if j not in sel.outside:
        raise SelectionError(f"index {j} is not outside the selected set")


def pair_stat(model: GaussianModel, sel: Selection, i: int, j: int, delta: float = 0.0) -> PairStat:
    _check_sides(sel, i, j)
    s = model.sigma
    v = math.sqrt(s[i, i] - 2.0 * s[i, j] + s[j, j])
    d = ((model.x[i] - model.x[j]) - delta) / v
    return PairStat(i=i, j=j, v=v, d_delta=float(d), delta=float(delta))


def cross_correlation(model: GaussianModel, pair_a: tuple[int, int], pair_b: tuple[int, int]) -> float:
    """Correlation between D_ij and D_kl."""
    (i, j), (k, l) = pair_a, pair_b
    if i == j or k == l:
        raise SelectionError("pairs must have distinct indices")
    if (i, j) == (k, l):
        return 1.0
    s = model.sigma
    v_ij = math.sqrt(s[i, i] - 2.0 * s[i, j] + s[j, j])
    v_kl = math.sqrt(s[k, k] - 2.0 * s[k, l] + s[l, l])
    c = s[i, k] - s[i, l] - s[j, k] + s[j, l]
    return float(min(1.0, max(-1.0, c / (v_ij * v_kl))))


class PairGeometry:
    """All inside/outside pairs of one selection, flattened in (i, j) order.

    Holds everything that does not depend on the margin delta, so a search
    over delta pays for the P x P correlation matrix once.
    """

    def __init__(self, model: GaussianModel, sel: Selection):
        inside = np.asarray(sel.inside)
        outside = np.asarray(sel.outside)
        self.ii = np.repeat(inside, outside.size)
        self.jj = np.tile(outside, inside.size)
        s = model.sigma
        self.v = np.sqrt(s[self.ii, self.ii] - 2.0 * s[self.ii, self.jj] + s[self.jj, self.jj])
        self.diff = model.x[self.ii] - model.x[self.jj]
        self.d0 = self.diff / self.v
        self._sigma = s

    @cached_property
    def rho(self) -> np.ndarray:
        """P x P correlations between the standardized differences."""
        s, ii, jj = self._sigma, self.ii, self.jj
        cov = (
            s[np.ix_(ii, ii)] - s[np.ix_(ii, jj)] - s[np.ix_(jj, ii)] + s[np.ix_(jj, jj)]
        )
        rho = np.clip(cov / np.outer(self.v, self.v), -1.0, 1.0)
        np.fill_diagonal(rho, 1.0)
        return rho

    def __len__(self) -> int:
        return self.ii.size

    def d_delta(self, delta: float) -> np.ndarray:
        return (self.diff - delta) / self.v

    def pair(self, p: int) -> tuple[int, int]:
        return int(self.ii[p]), int(self.jj[p])

    def argmin(self, delta: float) -> int:
        # first minimum in row-major order is the lexicographically smallest (i, j)
        return int(np.argmin(self.d_delta(delta)))


def min_pair(model: GaussianModel, sel: Selection, delta: float = 0.0) -> tuple[int, int, float]:
    """Inside/outside pair with the smallest standardized difference.

    Ties go to the lexicographically smallest (i, j).
    """
    geo = PairGeometry(model, sel)
    p = geo.argmin(delta)
    i, j = geo.pair(p)
    return i, j, float(geo.d_delta(delta)[p])
