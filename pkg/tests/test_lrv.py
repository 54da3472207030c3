import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from scalecp import dgp, lrv
from scalecp.dgp import SeriesSpec
from scalecp.estimators import EstimatorKind
from scalecp.exceptions import DegenerateDensityError, DomainError
from scalecp.lrv import LrvConfig

STUDENTIZED = [EstimatorKind.parse(s) for s in ("md", "gmd", "mad", "qn-orig", "qn:0.8")]


def test_hac_weights():
    assert lrv.hac_weight("quartic", 0.0) == 1
    assert lrv.hac_weight("quartic", 0.5) == 0.5625
    assert lrv.hac_weight("quartic", 1.5) == 0
    assert lrv.hac_weight("bartlett", 2.0) == 0
    assert lrv.hac_weight("bartlett", 0.25) == 0.75
    assert_allclose(lrv.hac_weight("quartic", [0, 1, 2]), [1, 0, 0])
    with pytest.raises(DomainError):
        lrv.hac_weight("parzen", 0.1)


def test_andrews_bandwidth():
    assert lrv.andrews_bandwidth(0.0, 500) == 0
    assert_allclose(lrv.andrews_bandwidth(0.5, 1000), 1.447 * 10 * (16 / 9) ** (1 / 3), rtol=1e-12)
    assert_allclose(lrv.andrews_bandwidth(0.8, 64), 1.447 * 4 * (2.56 / 0.1296) ** (1 / 3), rtol=1e-12)
    with pytest.raises(DomainError):
        lrv.andrews_bandwidth(1.0, 10)
    # clamped into [1, sqrt(n) / 2]
    assert LrvConfig(andrews_rho=0.0).hac_bandwidth(400) == 1.0
    assert LrvConfig(andrews_rho=0.99).hac_bandwidth(400) == 10.0
    assert_allclose(LrvConfig().hac_bandwidth(500), 2 * 500 ** (1 / 3))
    assert LrvConfig(bandwidth=4).hac_bandwidth(500) == 4


def test_config_validation():
    with pytest.raises(DomainError):
        LrvConfig(hac_kernel="parzen")
    with pytest.raises(DomainError):
        LrvConfig(bandwidth=4, andrews_rho=0.5)
    with pytest.raises(DomainError):
        LrvConfig(bandwidth=0)
    with pytest.raises(DomainError):
        LrvConfig(density_bandwidth=-1)


def test_kde_point():
    assert_allclose(lrv.kde_point([2.0], 2.0, 0.5), 0.75 / 0.5)
    assert lrv.kde_point([0.0, 1.0], 10.0, 0.5) == 0
    with pytest.raises(DomainError):
        lrv.kde_point([1.0], 0.0, 0.0)


def test_pairwise_kde_matches_brute_force():
    x = np.random.default_rng(0).standard_normal(300)
    i, j = np.triu_indices(300, 1)
    d = np.abs(x[i] - x[j])
    for t, h in ((0.3, 0.1), (1.0, 0.5), (4.0, 2.0)):
        assert_allclose(lrv.pairwise_kde_point(x, t, h), lrv.kde_point(d, t, h), rtol=1e-12)


def test_pairwise_kde_recovers_u_density():
    x = np.random.default_rng(1).standard_normal(10_000)
    t = math.sqrt(2) * 0.6744897501960817  # population median of |X - Y|
    u = math.sqrt(2) * math.exp(-t * t / 4) / math.sqrt(2 * math.pi)
    h = 0.05
    assert abs(lrv.pairwise_kde_point(x, t, h) / u - 1) < 0.05


def test_influence_examples():
    infl = lrv.influence_series([-1.0, 1.0], EstimatorKind("variance"))
    assert_allclose(infl.xi, [-1, -1])
    assert infl.scale_factor == 1
    assert_allclose(lrv.influence_series(np.full(10, 3.0), EstimatorKind("gini")).xi, 0)
    x = np.random.default_rng(2).standard_normal(200)
    for a in (0.2, 0.8):
        infl = lrv.influence_series(x, EstimatorKind.qn(a))
        assert np.all(infl.xi >= -a) and np.all(infl.xi <= 1 - a)
    assert lrv.influence_series(x, EstimatorKind("gini")).scale_factor == 4
    for kind in ("variance", "mean_dev", "gini"):
        xi = lrv.influence_series(x, EstimatorKind(kind)).xi
        assert abs(xi.mean()) < 5 / x.size


def test_gini_influence_brute_force():
    x = np.random.default_rng(3).laplace(size=80)
    phi = np.abs(x[:, None] - x[None, :]).mean(axis=1)
    g = np.abs(x[:, None] - x[None, :]).sum() / (80 * 79)
    assert_allclose(lrv.influence_series(x, EstimatorKind("gini")).xi, phi - g, atol=1e-12)


def test_qn_influence_brute_force():
    x = np.random.default_rng(4).standard_normal(90)
    kind = EstimatorKind.qn(0.7)
    q = np.sort(np.abs(x[:, None] - x[None, :])[np.triu_indices(90, 1)])[math.ceil(0.7 * 4005) - 1]
    psi = (np.abs(x[:, None] - x[None, :]) <= q).mean(axis=1) - 0.7
    assert_allclose(lrv.influence_series(x, kind).xi, psi, atol=1e-14)


def test_degenerate_density():
    x = np.array([0.0] * 20 + [1.0])
    with pytest.raises(DegenerateDensityError):
        lrv.influence_series(x, EstimatorKind("mad"))
    with pytest.raises(DegenerateDensityError):
        lrv.influence_series(x, EstimatorKind.qn(0.5))


def test_hac_sum_matches_direct_formula():
    rng = np.random.default_rng(5)
    xi = rng.standard_normal(60)
    b = 4.7
    n = xi.size
    direct = sum(
        float(lrv.hac_weight("quartic", abs(k) / b)) * np.dot(xi[: n - abs(k)], xi[abs(k):]) / n
        for k in range(-(n - 1), n)
    )
    assert_allclose(lrv.hac_sum(xi, b, "quartic"), direct, rtol=1e-12)


@pytest.mark.slow
def test_lrv_large_sample_moment_targets():
    x = dgp.sample_series(SeriesSpec(dgp.normal(), 100_000, seed=6))
    assert abs(lrv.lrv_estimate(x, EstimatorKind("variance")) / 2 - 1) < 0.1
    assert abs(lrv.lrv_estimate(x, EstimatorKind("mean_dev")) / (1 - 2 / math.pi) - 1) < 0.1


def test_floor_clamp():
    res = lrv.lrv_details(np.full(12, 5.0), EstimatorKind("variance"))
    assert res.clamped and res.value == 1e-12 and res.raw == 0


@pytest.mark.parametrize("kind", STUDENTIZED + [EstimatorKind("variance")], ids=lambda k: k.short_name)
def test_studentizer_equivariance(kind):
    x = dgp.sample_series(SeriesSpec(dgp.student_t(5), 300, rho=0.4, seed=7))
    a = 3.7
    power = 4 if kind.kind == "variance" else 2
    assert_allclose(lrv.lrv_estimate(a * x, kind), a**power * lrv.lrv_estimate(x, kind), rtol=1e-8)


@pytest.mark.parametrize("kind", [EstimatorKind("gini"), EstimatorKind.qn(0.5)], ids=str)
def test_shift_invariance(kind):
    x = np.random.default_rng(8).standard_normal(200)
    assert_allclose(lrv.lrv_estimate(x + 11.0, kind), lrv.lrv_estimate(x, kind), rtol=1e-10)


@settings(max_examples=50, deadline=None)
@given(
    x=st.lists(st.floats(-100, 100, allow_nan=False), min_size=4, max_size=80),
    b=st.floats(0.5, 30),
)
def test_bartlett_nonnegative(x, b):
    cfg = LrvConfig(hac_kernel="bartlett", bandwidth=b)
    for kind in (EstimatorKind("variance"), EstimatorKind("gini"), EstimatorKind("mean_dev")):
        assert lrv.lrv_details(x, kind, cfg).raw >= -1e-9 * max(1.0, np.max(np.abs(x)) ** 4)


def test_input_validation():
    with pytest.raises(DomainError):
        lrv.lrv_estimate([1.0, 2.0, 3.0], EstimatorKind("gini"))
    with pytest.raises(DomainError):
        lrv.lrv_estimate([1.0, 2.0, np.inf, 3.0, 4.0], EstimatorKind("gini"))
