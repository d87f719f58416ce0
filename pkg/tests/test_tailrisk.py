import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from netrobust.errors import BadConfig, NotNonnegative, TooFewHits
from netrobust.tailrisk import (
    ShockDistribution,
    aggregate_output_sample,
    assess_sequence,
    centrality_report,
    gramian_l1_criterion,
    macro_diagnostic,
    macro_tail_ratio,
    output_histogram,
    sequence_verdict,
    tail_risk_rate,
    tail_risk_report,
    wilson_interval,
)
from netrobust.topologies import regular, star

# 2 Phi(-2) and -(1/4) log of it, from erfc
P_TWO_SIGMA = 0.04550026389635843
RATE_ZERO_4 = 0.7725092882805216
# log P(L < -3) / log Phi(-3) for the unit-variance logistic, from its CDF
LOGISTIC_RATIO_3 = 0.8241446404446328


def rank_one(n):
    a = np.zeros((n, n))
    a[:, 0] = 0.5
    return a


def test_distribution_moments():
    rng = np.random.default_rng(0)
    for fam in ("gaussian", "logistic"):
        x = ShockDistribution(fam).sample(rng, 400_000)
        assert abs(x.mean()) < 0.01
        assert x.var() == pytest.approx(1.0, abs=0.01)
    with pytest.raises(BadConfig):
        ShockDistribution("cauchy")
    with pytest.raises(BadConfig):
        ShockDistribution(standardized=False)


def test_wilson_interval_contains_estimate():
    lo, hi = wilson_interval(30, 1000)
    assert lo < 0.03 < hi
    assert wilson_interval(0, 100)[0] == 0.0


def test_sample_variance_rank_one():
    # c = (n + 1, 1, ..., 1), so Var x_inf = (n + 1)^2 + n - 1
    x = aggregate_output_sample(rank_one(5), samples=200_000, seed=1)
    assert x.var() == pytest.approx(40.0, rel=0.02)


def test_sample_independent_of_threads():
    a = regular(300, 0.5)
    x1 = aggregate_output_sample(a, samples=20_000, seed=3, threads=1)
    x4 = aggregate_output_sample(a, samples=20_000, seed=3, threads=4)
    assert np.array_equal(x1, x4)


def test_gaussian_rate_oracle():
    r = tail_risk_rate(np.zeros((4, 4)), z=1.0, samples=400_000, seed=2)
    assert r.exact == pytest.approx(RATE_ZERO_4, rel=1e-12)
    assert r.p_hat == pytest.approx(P_TWO_SIGMA, rel=0.03)
    assert r.ci[0] <= RATE_ZERO_4 <= r.ci[1]


def test_no_hits_gives_infinite_rate():
    with pytest.warns(TooFewHits):
        r = tail_risk_rate(np.zeros((4, 4)), z=5.0, samples=1000, seed=0)
    assert r.hits == 0 and math.isinf(r.rate) and math.isinf(r.ci[1])


def test_macro_ratio_gaussian_is_one():
    assert macro_tail_ratio(star(8, 0.5), 3.0).ratio == 1.0


def test_macro_ratio_logistic_oracle():
    m = macro_tail_ratio(np.zeros((1, 1)), 3.0, ShockDistribution("logistic"), samples=1_000_000, seed=5)
    assert m.ci[0] <= LOGISTIC_RATIO_3 <= m.ci[1]
    assert m.ratio == pytest.approx(LOGISTIC_RATIO_3, abs=0.01)
    with pytest.raises(BadConfig):
        macro_tail_ratio(np.zeros((1, 1)), 4.5, ShockDistribution("logistic"))


def test_diagnostic_closed_forms():
    assert macro_diagnostic(regular(20, 0.5)) == pytest.approx(1.0, rel=1e-12)
    # rank one at n = 5: c = (6, 1, 1, 1, 1)
    assert macro_diagnostic(rank_one(5)) == pytest.approx(6 * math.sqrt(5) / math.sqrt(40), rel=1e-12)


def test_gramian_l1_regular():
    # A / lambda is doubly stochastic with eigenvalue 1 on the ones vector
    assert gramian_l1_criterion(regular(16, 0.5)) == pytest.approx(2.0, rel=1e-8)
    with pytest.raises(NotNonnegative):
        gramian_l1_criterion(-regular(4, 0.5))


@given(st.integers(4, 60), st.floats(0.1, 0.9))
def test_centrality_of_regular_is_one(n, g):
    assert centrality_report(regular(n, g)).ratio == pytest.approx(1.0, abs=1e-8)


def test_report_flags_and_histogram():
    rep = tail_risk_report(-regular(6, 0.5), samples=5000, seed=1, histogram_bins=10, z_grid=[0.25, 1.0])
    assert "not-nonnegative" in rep.flags
    assert rep.gramian_l1 is None and rep.verdict == "inconclusive"
    assert len(rep.histogram) == 10 and set(rep.z_sensitivity) == {"0.25", "1"}
    rep = tail_risk_report(star(20, 0.5), tau=4.5, dist=ShockDistribution("logistic"), samples=2000, seed=1)
    assert "tau-above-mc-range" in rep.flags


def test_histogram_integrates_to_one():
    x = np.random.default_rng(0).standard_normal(50_000) * 3.0
    h = output_histogram(x, 9, 40)
    width = h[1, 0] - h[0, 0]
    assert h[:, 1].sum() * width == pytest.approx(1.0)
    assert np.allclose(h[:, 2], np.exp(-h[:, 0] ** 2 / 2) / math.sqrt(2 * math.pi))


def test_sequence_verdicts():
    grid = [16, 32, 64, 128]
    assert sequence_verdict(grid, [2.0] * 4, [1.0] * 4) == "no-tail-risk"
    assert sequence_verdict(grid, None, [math.sqrt(n) for n in grid]) == "tail-risk"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TooFewHits)
        reps, verdict = assess_sequence([star(n, 0.5) for n in (8, 16)], samples=1000, seed=0)
    assert verdict == "inconclusive"
    assert all("grid-too-small-for-verdict" in r.flags for r in reps)


def test_star_diagnostic_slope():
    from netrobust.scaling import fit_values

    grid = (16, 32, 64, 128, 256)
    f = fit_values(grid, [macro_diagnostic(star(n, 0.9)) for n in grid])
    assert f.slope == pytest.approx(0.5, abs=0.1)


def test_star_centrality_grows():
    ratios = [centrality_report(star(n, 0.9)).ratio for n in (10, 20, 40)]
    assert ratios[0] > 1
    assert ratios[0] < ratios[1] < ratios[2]
