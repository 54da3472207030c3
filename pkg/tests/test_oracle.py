import numpy as np
import pytest
from numpy.testing import assert_allclose

from scalecp import asymptotics, dgp
from scalecp import estimators as est
from scalecp.exceptions import DomainError

import oracle


def test_naive_pairwise_stats():
    gmd, diffs = oracle.naive_pairwise_stats([0, 1, 3])
    assert_allclose(gmd, 2.0)
    assert_allclose(diffs, [1, 2, 3])
    gmd, diffs = oracle.naive_pairwise_stats([2.0] * 5)
    assert gmd == 0 and np.all(diffs == 0)
    with pytest.raises(DomainError):
        oracle.naive_pairwise_stats([1.0])


def test_naive_matches_fast_gini():
    x = np.random.default_rng(0).standard_normal(200)
    gmd, _ = oracle.naive_pairwise_stats(x)
    assert_allclose(est.gini_mean_difference(x), gmd, rtol=1e-10)


def test_hoeffding_examples():
    parts = oracle.empirical_hoeffding([0, 1, 3], lambda a, b: np.abs(a - b))
    assert_allclose(parts.reconstructed, 2.0, rtol=1e-15)
    parts = oracle.empirical_hoeffding([0, 1, 2], lambda a, b: np.abs(a - b))
    assert_allclose(parts.reconstructed, 4 / 3, rtol=1e-15)
    x = np.random.default_rng(1).standard_normal(30)
    t = 0.7
    parts = oracle.empirical_hoeffding(x, lambda a, b: (np.abs(a - b) <= t).astype(float))
    _, diffs = oracle.naive_pairwise_stats(x)
    assert_allclose(parts.reconstructed, np.mean(diffs <= t), atol=1e-12)
    parts = oracle.empirical_hoeffding([0.5, 2.0], lambda a, b: np.abs(a - b))
    assert_allclose(parts.reconstructed, 1.5)
    assert_allclose(parts.linear.sum(), 0, atol=1e-15)


def test_hoeffding_reconstruction_arbitrary_kernels():
    rng = np.random.default_rng(2)
    kernels = [
        lambda a, b: np.abs(a - b),
        lambda a, b: np.minimum(np.abs(a - b), 1.0),
        lambda a, b: np.cos(a) * np.cos(b) + np.sin(a + b),
    ]
    for _ in range(50):
        x = rng.uniform(-3, 3, int(rng.integers(2, 40)))
        for kern in kernels:
            parts = oracle.empirical_hoeffding(x, kern)
            assert abs(parts.reconstructed - parts.u_stat) < 1e-10


@pytest.mark.slow
def test_bahadur_remainder_decreases():
    rep = oracle.bahadur_check(lambda n, rng: rng.standard_normal(n), 0.8, [100, 400, 1600], runs=100, inner=10)
    assert rep.skipped == 0
    assert rep.decreasing_fraction >= 0.8


def test_qn_concentrates_at_population_value():
    q = asymptotics.q_alpha_population(dgp.normal(), 0.5)
    rng = np.random.default_rng(3)
    close = [abs(est.qn_alpha(rng.standard_normal(400), 0.5) - q) < 0.2 for _ in range(200)]
    assert np.mean(close) >= 0.95


def test_bahadur_constant_stream_skipped():
    rep = oracle.bahadur_check(lambda n, rng: np.zeros(n), 0.5, [10, 20], runs=3, inner=2)
    assert rep.skipped == 12
    assert np.all(np.isnan(rep.scaled_remainder))
