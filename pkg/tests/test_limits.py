"""Recursion-based samplers of the limit law and the smoothing weight."""

import math

import numpy as np
import pytest

from delayedyule.core import CapacityError
from delayedyule.limits import (
    RecursionConfig,
    WeightSample,
    depth_convergence_diagnostic,
    empirical_moment,
    sample_limit_recursive,
    sample_w,
)
from delayedyule.stats import ks_one_sample, ks_two_sample, mean_se

LN2 = math.log(2.0)


def exp_cdf(x):
    return -np.expm1(-np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# smoothing weight
# ---------------------------------------------------------------------------


def test_sample_w_degenerate_half():
    w = sample_w(0.5, 500, 3).values
    assert (w == 1.0).all()


def test_sample_w_beta_one_uniform_and_mean():
    w = sample_w(1.0, 10_000, 5).values
    mean, se = mean_se(w)
    assert abs(mean - 1.0) <= 3 * se
    # half the weight is uniform on (0, 1)
    rep = ks_one_sample(w / 2.0, lambda x: np.clip(x, 0.0, 1.0))
    assert rep.passed
    y = w * np.log(w)
    mean, se = mean_se(y)
    assert abs(mean - (LN2 - 0.5)) <= 3 * se


def test_sample_w_range_invariants():
    w_hi = sample_w(0.8, 5000, 7).values
    assert w_hi.max() <= 1.6 + 1e-12 and w_hi.min() > 0
    w_lo = sample_w(0.25, 5000, 7).values
    assert w_lo.min() >= 0.5 - 1e-12
    with pytest.raises(ValueError):
        WeightSample(0.8, np.array([1.7]))
    with pytest.raises(ValueError):
        WeightSample(0.25, np.array([0.4]))


def test_w_loglog_criterion_bracketing():
    n = 30_000
    for beta in (0.25, 0.5, 1.0):
        w = sample_w(beta, n, 11).values
        mean, se = mean_se(w * np.log(np.maximum(w, 1e-300)))
        assert mean < LN2 - 3 * se, beta
    # below 1/2 the direct estimator is dominated by rare huge weights
    # (W ln W has tail index 1/(1-2*beta) barely above one near zero), so the
    # subcritical side uses an exponentially tilted proposal with rate
    # theta = 2*beta, which has finite variance for theta < 4*beta
    for beta in (0.05, 0.15):
        theta = 2.0 * beta
        rng = np.random.Generator(np.random.Philox(key=13))
        t = rng.standard_exponential(n) / theta
        w = 2.0 * beta * np.exp((1.0 - 2.0 * beta) * t)
        x = w * np.log(w) * np.exp(-(1.0 - theta) * t) / theta
        mean, se = mean_se(x)
        assert mean > LN2 + 3 * se, beta
        from delayedyule.analytic import w_loglog_moment

        assert abs(mean - w_loglog_moment(beta)) <= 4 * se


# ---------------------------------------------------------------------------
# recursion sampler
# ---------------------------------------------------------------------------


def test_recursive_degenerate_half_is_exactly_one():
    for method in ("exact", "pool"):
        x = sample_limit_recursive(
            RecursionConfig(0.5, 12, 300, seed=17, method=method)
        )
        assert (x == 1.0).all()


def test_recursive_depth_one_is_the_weight_law():
    # depth 1: value = beta * exp(-(2b-1)T) * (1 + 1) = W, uniform on (0,2) at beta=1
    x = sample_limit_recursive(RecursionConfig(1.0, 1, 5000, seed=19, method="exact"))
    assert ks_one_sample(x / 2.0, lambda u: np.clip(u, 0.0, 1.0)).passed


def test_recursive_beta_one_is_exponential():
    x = sample_limit_recursive(RecursionConfig(1.0, 20, 10_000, seed=23))
    assert ks_one_sample(x, exp_cdf).passed


def test_recursive_exact_and_pool_agree():
    a = sample_limit_recursive(RecursionConfig(0.75, 12, 2000, seed=29, method="exact"))
    b = sample_limit_recursive(RecursionConfig(0.75, 12, 4000, seed=31, method="pool"))
    assert ks_two_sample(a, b).passed


def test_recursive_mean_one_preserved_across_depths():
    for depth in (3, 10, 20):
        x = sample_limit_recursive(RecursionConfig(0.75, depth, 8000, seed=37))
        mean, se = mean_se(x)
        assert abs(mean - 1.0) <= 3 * se, depth


def test_depth_convergence_diagnostic():
    a, b = depth_convergence_diagnostic(0.75, 20, 5000, 41)
    assert ks_two_sample(a, b).passed


def test_recursive_determinism_and_budget():
    cfg = RecursionConfig(0.9, 8, 100, seed=43, method="exact")
    assert (sample_limit_recursive(cfg) == sample_limit_recursive(cfg)).all()
    with pytest.raises(CapacityError):
        sample_limit_recursive(
            RecursionConfig(0.9, 24, 10_000, seed=1, method="exact")
        )


def test_smoothing_fixed_point_in_distribution():
    # one application of the smoothing map to the sample law reproduces it
    rng = np.random.Generator(np.random.Philox(key=99))
    for beta in (0.75, 1.0):
        x = sample_limit_recursive(RecursionConfig(beta, 18, 6000, seed=47))
        w = sample_w(beta, x.size, 53).values
        plus = x[rng.integers(0, x.size, x.size)]
        minus = x[rng.integers(0, x.size, x.size)]
        mapped = w * 0.5 * (plus + minus)
        assert ks_two_sample(mapped, x).passed, beta


# ---------------------------------------------------------------------------
# empirical moments
# ---------------------------------------------------------------------------


def test_empirical_moment_examples():
    assert empirical_moment([1.0, 1.0, 1.0], 2.0) == (1.0, 0.0)
    rng = np.random.Generator(np.random.Philox(key=3))
    mean, se = empirical_moment(rng.standard_exponential(10_000), 2.0)
    assert abs(mean - 2.0) <= 3 * se


def test_empirical_moment_validation():
    with pytest.raises(ValueError):
        empirical_moment([], 2.0)
    with pytest.raises(ValueError):
        empirical_moment([1.0, -1.0], 2.0)
    with pytest.raises(ValueError):
        empirical_moment([1.0], 0.0)


def test_empirical_moment_stable_in_uniformly_integrable_regime():
    # p = 1.5 at beta = 0.75 satisfies (2b-1)p + 1 - 2 b**p > 0: finite moment
    assert 0.5 * 1.5 + 1 - 2 * 0.75**1.5 > 0
    estimates = []
    for depth in (10, 15, 20):
        x = sample_limit_recursive(RecursionConfig(0.75, depth, 8000, seed=59))
        estimates.append(empirical_moment(x, 1.5)[0])
    lo, hi = min(estimates), max(estimates)
    assert hi / lo <= 1.1 / 0.9
