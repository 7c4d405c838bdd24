import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankverify import (
    BoundaryTieError,
    CovFamilyTag,
    DomainError,
    cov_ar1,
    cov_equicorrelated,
    fast_check,
    reduction_applies,
    selective_p_value,
    top_k,
    validate,
    verify,
)
from rankverify.sim import mvn_sample, scenario_appendix_a

from conftest import random_instance


def brute_force_pvalue(x, sigma, inside, i, j, delta):
    """Literal transcription of the truncated-normal construction, in mpmath."""
    mp.mp.dps = 50
    outside = [l for l in range(len(x)) if l not in inside]

    def v(a, b):
        return mp.sqrt(mp.mpf(sigma[a][a]) - 2 * mp.mpf(sigma[a][b]) + mp.mpf(sigma[b][b]))

    def rho(a, b, c, e):
        cov = mp.mpf(sigma[a][c]) - mp.mpf(sigma[a][e]) - mp.mpf(sigma[b][c]) + mp.mpf(sigma[b][e])
        return cov / (v(a, b) * v(c, e))

    d = (mp.mpf(x[i]) - mp.mpf(x[j]) - mp.mpf(delta)) / v(i, j)
    lo, hi = -mp.inf, mp.inf
    for k in inside:
        for l in outside:
            r = mp.mpf(1) if (k, l) == (i, j) else rho(i, j, k, l)
            if abs(r) < 1e-12:
                continue
            d0 = (mp.mpf(x[k]) - mp.mpf(x[l])) / v(k, l)
            bound = d - d0 / r
            if r > 0:
                lo = max(lo, bound)
            else:
                hi = min(hi, bound)

    def sf(t):
        return mp.ncdf(-t)

    return (sf(d) - sf(hi)) / (sf(lo) - sf(hi)), lo, hi


def test_n2_examples():
    m = validate([2, 0], np.eye(2))
    r = verify(m, 1, alpha=0.1)
    assert not r.reject and r.worst_p == pytest.approx(2 * (1 - 0.9213504), abs=2e-7)
    r = verify(validate([3.5, 0], np.eye(2)), 1, alpha=0.1)
    assert r.reject and r.worst_p == pytest.approx(0.0133, abs=5e-5)
    sp = r.all_pairs[0]
    assert sp.trunc_lo == 0.0 and sp.trunc_hi == math.inf


def test_n2_selective_pvalue_closed_form():
    for g in (0.1, 1.0, 3.0, 8.0):
        m = validate([g, 0], np.eye(2))
        sp = selective_p_value(m, top_k(m, 1), 0, 1, 0.0)
        d = g / math.sqrt(2)
        assert sp.p == pytest.approx(float(2 * mp.ncdf(-d)), rel=1e-12)


def test_self_pair_forces_nonnegative_lower_bound():
    rng = np.random.default_rng(0)
    for _ in range(200):
        m, k = random_instance(rng)
        for sp in verify(m, k, alpha=0.5).all_pairs:
            assert sp.trunc_lo >= -1e-12


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(11)
    for _ in range(150):
        m, k = random_instance(rng, n_max=6)
        delta = float(rng.choice([-0.5, 0.0, 0.5, 1.0]))
        sel = top_k(m, k)
        r = verify(m, k, delta=delta, alpha=0.5)
        for sp in r.all_pairs:
            want, lo, hi = brute_force_pvalue(m.x.tolist(), m.sigma.tolist(), sel.inside, sp.i, sp.j, delta)
            assert sp.trunc_lo == pytest.approx(float(lo), rel=1e-9, abs=1e-9)
            assert sp.trunc_hi == pytest.approx(float(hi), rel=1e-9, abs=1e-9)
            assert sp.p == pytest.approx(float(want), rel=1e-8, abs=1e-14)
            single = selective_p_value(m, sel, sp.i, sp.j, delta)
            assert single.p == pytest.approx(sp.p, rel=1e-12, abs=1e-15)


def test_report_invariants_and_containment():
    rng = np.random.default_rng(12)
    for _ in range(300):
        m, k = random_instance(rng)
        alpha = float(rng.uniform(0.01, 0.5))
        r = verify(m, k, delta=float(rng.uniform(-1, 1)), alpha=alpha)
        assert len(r.all_pairs) == k * (m.n - k)
        assert r.worst_p == max(sp.p for sp in r.all_pairs)
        assert r.reject == (r.worst_p <= alpha)
        for sp in r.all_pairs:
            assert 0.0 <= sp.p <= 1.0
            assert sp.trunc_lo <= sp.d_delta + 1e-9 and sp.d_delta <= sp.trunc_hi + 1e-9


def test_early_exit_same_decision():
    rng = np.random.default_rng(13)
    for _ in range(300):
        m, k = random_instance(rng)
        alpha = float(rng.uniform(0.01, 0.5))
        full = verify(m, k, alpha=alpha)
        quick = verify(m, k, alpha=alpha, early_exit=True)
        assert quick.reject == full.reject
        if full.reject:
            assert quick.worst_p == full.worst_p


def test_fast_check_examples():
    m = validate([3.29, 0], np.eye(2))
    fc = fast_check(m, top_k(m, 1), 0.0, 0.1)
    assert fc.d_plus == pytest.approx(2.3264, abs=1e-4) and fc.passes
    assert fc.p_two_sided == pytest.approx(0.02, abs=1e-4)
    m = validate([0.3, 2.0, 1.5, -1.0], cov_equicorrelated(4, 1.0, 0.4))
    sel = top_k(m, 2)
    fc = fast_check(m, sel, 0.0, 0.1)
    assert (fc.i, fc.j) == (2, 0)
    assert fast_check(m, sel, -5.0, 0.1) == fast_check(m, sel, 0.0, 0.1)


def test_fast_check_clamps_p_two_sided():
    m = validate([0.01, 0], np.eye(2))
    # a negative margin is clamped to zero, so p stays just below 1
    assert fast_check(m, top_k(m, 1), -10.0, 0.1).p_two_sided <= 1.0


def test_reduction_applies():
    assert reduction_applies(CovFamilyTag("diagonal"), 3, 7)
    assert reduction_applies(CovFamilyTag("equicorrelated", -0.1), 2, 5)
    assert not reduction_applies(CovFamilyTag("ar1", 0.6), 1, 5)
    assert not reduction_applies(CovFamilyTag("ar1", 0.4), 2, 5)
    assert reduction_applies(CovFamilyTag("ar1", -0.5), 4, 5)
    assert reduction_applies(CovFamilyTag("multinomial-approx", 100.0), 1, 4)
    assert not reduction_applies(CovFamilyTag("multinomial-approx", 100.0), 2, 4)
    assert not reduction_applies(CovFamilyTag("general"), 1, 2)


def test_report_annotates_reduction():
    m = validate([3, 1, 0], np.eye(3))
    assert verify(m, 1).reduction_detected == CovFamilyTag("diagonal")
    m = validate([3, 1, 0], cov_ar1(3, 1, 0.7))
    assert verify(m, 1).reduction_detected is None


def test_fast_only_method():
    m = validate([3.5, 0, -1], np.eye(3))
    r = verify(m, 1, alpha=0.1, method="fast-only")
    assert r.worst_p_kind == "fast-upper-bound" and r.all_pairs == ()
    assert r.reject == r.fast_check.passes
    assert r.worst_p == r.fast_check.p_two_sided


def test_argument_errors():
    m = validate([1, 0], np.eye(2))
    for alpha in (0.0, 1.0, 1.5):
        with pytest.raises(DomainError):
            verify(m, 1, alpha=alpha)
    with pytest.raises(DomainError):
        verify(m, 1, delta=math.inf)
    with pytest.raises(ValueError):
        verify(m, 1, method="slow")
    with pytest.raises(BoundaryTieError):
        verify(validate([1, 1, 0], np.eye(3)), 1)
    r = verify(validate([1, 1, 0], np.eye(3)), 1, ties="break-low-index")
    assert r.tie_broken and r.notes


def test_non_psd_warns_and_proceeds():
    s = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
    m = validate([2.0, 0.0, -1.0], s)
    with pytest.warns(RuntimeWarning, match="positive semi-definite"):
        r = verify(m, 1)
    assert not r.psd


def test_rho_threshold_hits_reported():
    # X_0 - X_2 and X_1 - X_3 are uncorrelated under the identity; dust on
    # sigma[0, 3] makes their correlation about -5e-15
    s = np.eye(4)
    s[0, 3] = s[3, 0] = 1e-14
    m = validate([3.0, 2.0, 0.0, -1.0], s)
    r = verify(m, 2)
    assert r.rho_threshold_hits > 0
    assert any("treated as zero" in note for note in r.notes)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.5, 1.0]))
def test_fast_implies_full(seed, delta):
    rng = np.random.default_rng(seed)
    m, k = random_instance(rng)
    alpha = float(rng.uniform(0.001, 0.5))
    r = verify(m, k, delta=delta, alpha=alpha)
    if r.fast_check.passes:
        assert r.reject


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pvalue_monotone_in_delta(seed):
    rng = np.random.default_rng(seed)
    m, k = random_instance(rng)
    prev = None
    for delta in np.linspace(-3, 3, 40):
        ps = np.array([sp.p for sp in verify(m, k, delta=float(delta), alpha=0.5).all_pairs])
        if prev is not None:
            assert np.all(ps >= prev - 1e-12)
        prev = ps


def test_appendix_a_truncation_from_negative_correlation():
    sc = scenario_appendix_a()
    x = mvn_sample(sc, 50, seed=2)
    for row in x:
        m = validate(row, sc.sigma)
        if top_k(m, 1).inside != (0,):
            continue
        r = verify(m, 1, alpha=0.1)
        pair12 = next(sp for sp in r.all_pairs if sp.j == 1)
        # X_2 is pulled in the opposite direction of X_3..X_5, so D_12 gets an upper bound
        assert math.isfinite(pair12.trunc_hi)


def test_appendix_a_matches_brute_force():
    sc = scenario_appendix_a()
    for x in mvn_sample(sc, 80, seed=1):
        m = validate(x, sc.sigma)
        if top_k(m, 1).inside != (0,):
            continue
        for sp in verify(m, 1, alpha=0.1).all_pairs:
            want, _, _ = brute_force_pvalue(x.tolist(), sc.sigma.tolist(), (0,), sp.i, sp.j, 0.0)
            assert sp.p == pytest.approx(float(want), rel=1e-10)
            # the pair itself bounds D below by D - D^0 = 0 at zero margin
            assert sp.trunc_lo >= -1e-12
