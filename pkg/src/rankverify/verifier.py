"""Selective rank verification test.

For every pair (i in S, j not in S) the one-sided p-value 1 - Phi(D^delta_ij)
is renormalized to the interval of D^delta_ij values that keep the observed
top-k set selected. The union null is rejected when every such selective
p-value is at most alpha.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np

from . import numerics
from .errors import DegenerateTruncationError, DomainError
from .model import CovFamilyTag, GaussianModel, classify_covariance, is_psd
from .selection import PairGeometry, Selection, TiePolicy, _check_sides, top_k

# |rho| below this is treated as exactly zero: that pair's selection
# constraint does not involve D_ij
ZERO_RHO = 1e-12
CONTAINMENT_SLACK = 1e-9

Method = Literal["full", "fast-only"]


@dataclass(frozen=True)
class SelectivePValue:
    i: int
    j: int
    p: float
    trunc_lo: float
    trunc_hi: float
    d_delta: float


@dataclass(frozen=True)
class FastCheckResult:
    i: int
    j: int
    d_plus: float
    p_two_sided: float
    passes: bool


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of :func:`verify`.

    With ``method="fast-only"`` no selective p-values are computed;
    ``worst_p`` then holds the two-sided fast p-value, which upper-bounds the
    full test's statistic, and ``worst_p_kind`` says so.
    """

    reject: bool
    alpha: float
    delta: float
    k: int
    method: Method
    selected: tuple[int, ...]
    worst_pair: tuple[int, int]
    worst_p: float
    worst_p_kind: Literal["selective", "fast-upper-bound"]
    fast_check: FastCheckResult
    all_pairs: tuple[SelectivePValue, ...] = ()
    reduction_detected: CovFamilyTag | None = None
    tie_broken: bool = False
    rho_threshold_hits: int = 0
    psd: bool = True
    notes: tuple[str, ...] = field(default=())


class TruncationGeometry(PairGeometry):
    """Pair geometry plus the delta-free truncation offsets.

    On the selection event the admissible range of D^delta_ij is
    ``[d - c_lo, d + c_hi]`` where ``c_lo = min d0_kl / rho`` over positively
    correlated pairs (the pair itself included, rho = 1) and
    ``c_hi = min d0_kl / |rho|`` over negatively correlated ones.
    """

    @cached_property
    def offsets(self) -> tuple[np.ndarray, np.ndarray, int]:
        rho = self.rho
        d0 = self.d0[None, :]
        pos = rho > ZERO_RHO
        neg = rho < -ZERO_RHO
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = d0 / np.abs(rho)
        c_lo = np.min(np.where(pos, ratio, np.inf), axis=1)
        c_hi = np.min(np.where(neg, ratio, np.inf), axis=1)
        hits = int(np.count_nonzero((rho != 0.0) & ~pos & ~neg))
        return c_lo, c_hi, hits

    def row_offsets(self, p: int) -> tuple[float, float]:
        """Offsets for one pair without forming the full correlation matrix."""
        if "rho" in self.__dict__:
            c_lo, c_hi, _ = self.offsets
            return float(c_lo[p]), float(c_hi[p])
        s, ii, jj = self._sigma, self.ii, self.jj
        i, j = ii[p], jj[p]
        cov = s[i, ii] - s[i, jj] - s[j, ii] + s[j, jj]
        rho = np.clip(cov / (self.v[p] * self.v), -1.0, 1.0)
        rho[p] = 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = self.d0 / np.abs(rho)
        c_lo = np.min(np.where(rho > ZERO_RHO, ratio, np.inf))
        c_hi = np.min(np.where(rho < -ZERO_RHO, ratio, np.inf))
        return float(c_lo), float(c_hi)

    def pvalues(self, delta: float, rows=None):
        """Selective p-values (and truncation bounds) for the given rows."""
        c_lo, c_hi, _ = self.offsets
        d = self.d_delta(delta)
        if rows is not None:
            d, c_lo, c_hi = d[rows], c_lo[rows], c_hi[rows]
        lo = d - c_lo
        hi = d + c_hi
        bad = ~(hi > lo)
        if np.any(bad):
            p = int(np.flatnonzero(bad)[0]) if rows is None else int(np.asarray(rows)[bad][0])
            raise DegenerateTruncationError(
                f"empty truncation interval for pair {self.pair(p)}: the observed "
                "selection is inconsistent with the covariance"
            )
        return numerics.sf_ratio_array(d, hi, lo, hi), lo, hi, d


def _check_alpha(alpha: float) -> float:
    alpha = numerics.probability(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha}")
    return alpha


def selective_p_value(
    model: GaussianModel, sel: Selection, i: int, j: int, delta: float = 0.0
) -> SelectivePValue:
    geo = TruncationGeometry(model, sel)
    matches = np.flatnonzero((geo.ii == i) & (geo.jj == j))
    if matches.size == 0:
        _check_sides(sel, i, j)
    return _row_pvalue(geo, int(matches[0]), float(delta))


def _row_pvalue(geo: TruncationGeometry, p: int, delta: float) -> SelectivePValue:
    c_lo, c_hi = geo.row_offsets(p)
    d = float(geo.d_delta(delta)[p])
    lo, hi = d - c_lo, d + c_hi
    if not hi > lo:
        raise DegenerateTruncationError(f"empty truncation interval for pair {geo.pair(p)}")
    assert lo <= d + CONTAINMENT_SLACK and d <= hi + CONTAINMENT_SLACK
    pval = numerics.sf_ratio(d, hi, lo, hi)
    return SelectivePValue(*geo.pair(p), p=pval, trunc_lo=lo, trunc_hi=hi, d_delta=d)


def _fast_from_geometry(geo: PairGeometry, delta: float, alpha: float) -> FastCheckResult:
    delta_plus = max(float(delta), 0.0)
    p = geo.argmin(delta_plus)
    d = float(geo.d_delta(delta_plus)[p])
    sf = numerics.std_normal_sf(d)
    i, j = geo.pair(p)
    return FastCheckResult(
        i=i, j=j, d_plus=d, p_two_sided=min(1.0, 2.0 * sf), passes=bool(sf <= alpha / 2.0)
    )


def fast_check(model: GaussianModel, sel: Selection, delta: float, alpha: float) -> FastCheckResult:
    """Sufficient condition for rejection: 1 - Phi(D_IJ) <= alpha/2.

    (I, J) minimizes D over inside/outside pairs at margin max(delta, 0).
    """
    alpha = _check_alpha(alpha)
    return _fast_from_geometry(PairGeometry(model, sel), delta, alpha)


def reduction_applies(tag: CovFamilyTag, k: int, n: int) -> bool:
    """Whether the full test is known to coincide with the fast check at delta = 0."""
    if tag.kind in ("diagonal", "equicorrelated"):
        return True
    if tag.kind == "ar1":
        return tag.parameter is not None and abs(tag.parameter) <= 0.5 and k in (1, n - 1)
    if tag.kind == "multinomial-approx":
        return k == 1
    return False


def full_test_reject(geo: TruncationGeometry, delta: float, alpha: float) -> bool:
    """Decision of the full test only; used by the confidence-bound search."""
    p, _, _, _ = geo.pvalues(delta)
    return bool(np.max(p) <= alpha)


def verify(
    model: GaussianModel,
    k: int,
    delta: float = 0.0,
    alpha: float = 0.05,
    method: Method = "full",
    ties: TiePolicy = "error",
    early_exit: bool = False,
) -> VerificationReport:
    """Test whether the top-k observations came from means more than ``delta``
    above all the others, at level ``alpha`` conditional on the selection.

    ``method="full"`` evaluates the selective p-value of all k(n-k) pairs.
    ``method="fast-only"`` only checks the closest pair, which is valid but
    can lose power. With ``early_exit`` the full test stops at the first pair
    whose p-value exceeds alpha, visiting pairs in increasing D^delta order;
    ``all_pairs`` then lists only the pairs evaluated.
    """
    alpha = _check_alpha(alpha)
    delta = float(delta)
    if not math.isfinite(delta):
        raise DomainError("delta must be finite")
    if method not in ("full", "fast-only"):
        raise ValueError(f"unknown method {method!r}")
    sel = top_k(model, k, ties=ties)
    geo = TruncationGeometry(model, sel)
    fast = _fast_from_geometry(geo, delta, alpha)

    notes = []
    psd = is_psd(model.sigma)
    if not psd:
        warnings.warn(
            "covariance is not positive semi-definite; no Gaussian has it, "
            "so the p-values are formal",
            RuntimeWarning,
            stacklevel=2,
        )
        notes.append("covariance not PSD")
    if sel.tie_broken:
        notes.append("boundary tie broken by lower index")

    tag = classify_covariance(model.sigma)
    reduction = tag if reduction_applies(tag, k, model.n) else None

    if method == "fast-only":
        return VerificationReport(
            reject=fast.passes,
            alpha=alpha,
            delta=delta,
            k=k,
            method=method,
            selected=sel.inside,
            worst_pair=(fast.i, fast.j),
            worst_p=fast.p_two_sided,
            worst_p_kind="fast-upper-bound",
            fast_check=fast,
            reduction_detected=reduction,
            tie_broken=sel.tie_broken,
            psd=psd,
            notes=tuple(notes),
        )

    if early_exit:
        evaluated = {}
        for p in np.argsort(geo.d_delta(delta), kind="stable"):
            evaluated[int(p)] = _row_pvalue(geo, int(p), delta)
            if evaluated[int(p)].p > alpha:
                break
        all_pairs = tuple(evaluated[p] for p in sorted(evaluated))
        hits = 0
    else:
        pvals, los, his, ds = geo.pvalues(delta)
        all_pairs = tuple(
            SelectivePValue(*geo.pair(p), p=float(pvals[p]), trunc_lo=float(los[p]),
                            trunc_hi=float(his[p]), d_delta=float(ds[p]))
            for p in range(len(geo))
        )
        _, _, hits = geo.offsets

    # pairs are in row-major (i, j) order, so argmax picks the lexicographically
    # first maximum and the result does not depend on evaluation order
    w = int(np.argmax([sp.p for sp in all_pairs]))
    worst_p = all_pairs[w].p
    if hits:
        notes.append(f"{hits} correlations below {ZERO_RHO:g} treated as zero")
    return VerificationReport(
        reject=bool(worst_p <= alpha),
        alpha=alpha,
        delta=delta,
        k=k,
        method=method,
        selected=sel.inside,
        worst_pair=(all_pairs[w].i, all_pairs[w].j),
        worst_p=worst_p,
        worst_p_kind="selective",
        fast_check=fast,
        all_pairs=all_pairs,
        reduction_detected=reduction,
        tie_broken=sel.tie_broken,
        rho_threshold_hits=hits,
        psd=psd,
        notes=tuple(notes),
    )
