"""Population scale values, asymptotic variances and relative efficiencies.

For ``X, Y`` independent from ``F``, ``U`` is the cdf and ``u`` the density
of ``|X - Y|`` and ``Q^alpha = U^{-1}(alpha)``.  The asymptotic variance of
the pairwise-difference quantile at an i.i.d. sample is

    ASV(Q_n^alpha) = 4 E psi(X)^2 / u(Q^alpha)^2,
    E psi(X)^2 = int {F(x + Q) - F(x - Q)}^2 f(x) dx - alpha^2.

Closed forms are used for the normal, Cauchy and Laplace families where
they exist; anything else goes through adaptive quadrature
(:func:`scipy.integrate.quad`, which maps infinite intervals onto finite
ones internally).  All supported laws are symmetric about their location.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

from scalecp import dgp
from scalecp.dgp import DistributionSpec
from scalecp.estimators import EstimatorKind
from scalecp.exceptions import DomainError, NumericError

__all__ = [
    "AsvReport",
    "MAD_NORMAL_EFFICIENCY",
    "u_density",
    "u_cdf",
    "q_alpha_population",
    "psi_second_moment",
    "asv_qn_alpha",
    "asv_qn_laplace_closed_form",
    "gini_population",
    "asv_gini",
    "moments",
    "asv_moment_estimators",
    "blowup_factors",
    "t_scale_mle_asv",
    "t_scale_fisher_information",
    "are",
    "reference_mle",
    "are_curve",
]

# efficiency of the MAD relative to the sd at the normal, as usually quoted
MAD_NORMAL_EFFICIENCY = 0.37

_EPS = 1e-12


@dataclass(frozen=True)
class AsvReport:
    estimator: EstimatorKind
    dist: DistributionSpec
    population_value: float
    asv: float
    method: str  # "closed_form" or "quadrature"


def _integrate(func, breaks) -> float:
    """Integrate over the real line, splitting at ``breaks``."""
    pts = sorted(set(float(b) for b in breaks))
    edges = [-math.inf, *pts, math.inf]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if lo == hi:
            continue
        val, err, info = integrate.quad(func, lo, hi, epsabs=_EPS, epsrel=_EPS, limit=400, full_output=1)[:3]
        if not math.isfinite(val) or err > 1e-8 * max(1.0, abs(val)):
            raise NumericError(f"quadrature on [{lo}, {hi}] did not converge (err={err:.2e})")
        total += val
    return total


def _center(dist: DistributionSpec) -> float:
    return dist["mu"] if dist.family in ("normal", "laplace") else 0.0


def _is_cauchy(dist: DistributionSpec) -> bool:
    return dist.family == "student_t" and dist["nu"] == 1.0


def _check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie strictly inside (0, 1)")


def u_density(dist: DistributionSpec, x: float) -> float:
    """Density of ``|X - Y|`` at ``x >= 0``: ``u(x) = 2 int f(t) f(t - x) dt``."""
    if x < 0:
        raise DomainError("u is defined for x >= 0")
    if dist.family == "normal":
        s = math.sqrt(2.0 * dist["sigma2"])
        return 2.0 * math.exp(-0.5 * (x / s) ** 2) / (s * math.sqrt(2.0 * math.pi))
    if dist.family == "laplace":
        a = dist["scale"]
        z = x / a
        return 0.5 * (1.0 + z) * math.exp(-z) / a
    if _is_cauchy(dist):
        return 4.0 / (math.pi * (x * x + 4.0))
    c = _center(dist)
    return 2.0 * _integrate(lambda t: dgp.density(dist, t) * dgp.density(dist, t - x), [c, c + x])


def u_cdf(dist: DistributionSpec, x: float) -> float:
    """``U(x) = P(|X - Y| <= x)``."""
    if x <= 0:
        return 0.0
    if dist.family == "normal":
        return 2.0 * special.ndtr(x / math.sqrt(2.0 * dist["sigma2"])) - 1.0
    if dist.family == "laplace":
        z = x / dist["scale"]
        return 1.0 - math.exp(-z) - 0.5 * z * math.exp(-z)
    if _is_cauchy(dist):
        return 2.0 / math.pi * math.atan(x / 2.0)
    c = _center(dist)
    return _integrate(
        lambda y: dgp.density(dist, y) * (dgp.cdf(dist, y + x) - dgp.cdf(dist, y - x)),
        [c - x, c, c + x],
    )


def q_alpha_population(dist: DistributionSpec, alpha: float) -> float:
    """Population alpha-quantile of ``|X - Y|``."""
    _check_alpha(alpha)
    if dist.family == "normal":
        return math.sqrt(2.0 * dist["sigma2"]) * special.ndtri((alpha + 1.0) / 2.0)
    if _is_cauchy(dist):
        return 2.0 * math.tan(math.pi * alpha / 2.0)
    hi = 1.0
    while u_cdf(dist, hi) <= alpha:
        hi *= 2.0
        if hi > 1e12:
            raise NumericError("could not bracket the quantile")
    return optimize.brentq(lambda q: u_cdf(dist, q) - alpha, 0.0, hi, xtol=1e-14, rtol=1e-13)


def psi_second_moment(dist: DistributionSpec, alpha: float, q: float | None = None) -> float:
    """``E psi(X)^2`` with ``psi(x) = P(|x - Y| <= Q^alpha) - alpha``."""
    if q is None:
        q = q_alpha_population(dist, alpha)
    c = _center(dist)
    inner = _integrate(
        lambda x: (dgp.cdf(dist, x + q) - dgp.cdf(dist, x - q)) ** 2 * dgp.density(dist, x),
        [c - q, c, c + q],
    )
    return inner - alpha * alpha


def asv_qn_alpha(dist: DistributionSpec, alpha: float) -> AsvReport:
    """Asymptotic variance of ``Q_n^alpha`` by quadrature of ``E psi^2``."""
    q = q_alpha_population(dist, alpha)
    e_psi2 = psi_second_moment(dist, alpha, q)
    u = u_density(dist, q)
    return AsvReport(EstimatorKind.qn(alpha), dist, q, 4.0 * e_psi2 / u**2, "quadrature")


def asv_qn_laplace_closed_form(alpha: float, scale: float = 1.0) -> AsvReport:
    """Closed-form asymptotic variance of ``Q_n^alpha`` at ``L(0, scale)``."""
    dist = dgp.laplace(0.0, scale)
    q = q_alpha_population(dist, alpha) / scale
    e = math.exp(-q)
    num = 1.0 - (1.0 + q) * e - e * (1.0 - e) ** 2 / 6.0 - alpha * alpha
    asv = 16.0 * num / ((1.0 + q) ** 2 * e * e)
    return AsvReport(EstimatorKind.qn(alpha), dist, q * scale, asv * scale**2, "closed_form")


def _mean_abs_diff_from(dist: DistributionSpec, x: float) -> float:
    """``E|x - Y|``."""
    if dist.family == "normal":
        s = math.sqrt(dist["sigma2"])
        z = (x - dist["mu"]) / s
        return s * (2.0 * math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi) + z * (2 * special.ndtr(z) - 1))
    if dist.family == "laplace":
        a = dist["scale"]
        z = abs(x - dist["mu"]) / a
        return a * (z + math.exp(-z))
    # symmetric about 0: E|x - Y| = x (2 F(x) - 1) + 2 int_x^inf y f(y) dy
    if dist.family == "normal_mixture":
        g, e = dist["gamma"], dist["eps"]
        tail = (e * g * math.exp(-0.5 * (x / g) ** 2) + (1 - e) * math.exp(-0.5 * x * x)) / math.sqrt(2 * math.pi)
    else:
        nu = dist["nu"]
        tail = (nu + x * x) / (nu - 1.0) * float(dgp.density(dist, x))
    return x * (2.0 * float(dgp.cdf(dist, x)) - 1.0) + 2.0 * tail


def _check_gini_moments(dist: DistributionSpec, order: int) -> None:
    if dist.family == "student_t" and dist["nu"] <= order:
        raise DomainError(f"t{dist['nu']:g} lacks the moment of order {order}")


def gini_population(dist: DistributionSpec) -> float:
    """``g(F) = E|X - Y|``."""
    _check_gini_moments(dist, 1)
    if dist.family == "normal":
        return 2.0 * math.sqrt(dist["sigma2"] / math.pi)
    if dist.family == "laplace":
        return 1.5 * dist["scale"]
    c = _center(dist)
    return _integrate(lambda x: _mean_abs_diff_from(dist, x) * dgp.density(dist, x), [c])


def asv_gini(dist: DistributionSpec) -> AsvReport:
    """``4 Var(E|X - Y| given X)`` by (nested) quadrature."""
    _check_gini_moments(dist, 2)
    g = gini_population(dist)
    c = _center(dist)
    second = _integrate(lambda x: _mean_abs_diff_from(dist, x) ** 2 * dgp.density(dist, x), [c])
    return AsvReport(EstimatorKind("gini"), dist, g, 4.0 * (second - g * g), "quadrature")


def moments(dist: DistributionSpec) -> tuple[float, float, float]:
    """``(E(Y - c)^2, E(Y - c)^4, E|Y - c|)`` about the center ``c``.

    Raises DomainError when one of them is infinite.
    """
    f = dist.family
    if f == "normal":
        s2 = dist["sigma2"]
        return s2, 3.0 * s2 * s2, math.sqrt(2.0 * s2 / math.pi)
    if f == "normal_mixture":
        g, e = dist["gamma"], dist["eps"]
        return (
            e * g**2 + 1 - e,
            3.0 * (e * g**4 + 1 - e),
            math.sqrt(2.0 / math.pi) * (e * g + 1 - e),
        )
    if f == "laplace":
        a = dist["scale"]
        return 2.0 * a * a, 24.0 * a**4, a
    nu = dist["nu"]
    if nu <= 4:
        raise DomainError(f"t{nu:g} has no finite fourth moment")
    m1 = 2.0 * math.sqrt(nu) * math.exp(special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2))
    m1 /= math.sqrt(math.pi) * (nu - 1)
    return nu / (nu - 2), 3.0 * nu * nu / ((nu - 2) * (nu - 4)), m1


def asv_moment_estimators(dist: DistributionSpec, kind: str = "variance") -> float:
    """Asymptotic variance of the sample variance, sd or mean deviation.

    ``variance``: ``E Y^4 - (E Y^2)^2``; ``sd``: that divided by
    ``4 E Y^2``; ``mean_dev``: ``E Y^2 - (E|Y|)^2`` (symmetric laws).
    """
    m2, m4, m1 = moments(dist)
    if kind == "variance":
        return m4 - m2 * m2
    if kind == "sd":
        return (m4 - m2 * m2) / (4.0 * m2)
    if kind == "mean_dev":
        return m2 - m1 * m1
    raise DomainError(f"no moment formula for {kind!r}")


def blowup_factors(gamma: float = 2.0) -> dict:
    """Long-run variances targeted when the scale jumps by ``gamma`` halfway.

    The pooled series behaves like ``NM(gamma, 1/2)``.  Returned are the
    raw asymptotic variances there and their ratios to ``N(0, 1)``.
    """
    mix = dgp.normal_mixture(gamma, 0.5)
    ref = dgp.normal()
    out = {}
    for kind in ("variance", "mean_dev"):
        raw = asv_moment_estimators(mix, kind)
        out[kind] = {"raw": raw, "ratio": raw / asv_moment_estimators(ref, kind)}
    return out


def t_scale_mle_asv(nu: float, s: float = 1.0) -> float:
    """Asymptotic variance ``(nu + 3) s^2 / (2 nu)`` of the t scale MLE."""
    if not nu > 0 or not s > 0:
        raise DomainError("nu and s must be positive")
    return (nu + 3.0) * s * s / (2.0 * nu)


def t_scale_fisher_information(nu: float, s: float = 1.0) -> float:
    """Fisher information about ``s`` in the t scale family, by quadrature."""
    if not nu > 0 or not s > 0:
        raise DomainError("nu and s must be positive")
    logc = -0.5 * math.log(nu) - special.betaln(nu / 2, 0.5)

    def integrand(x):
        z2 = (x / s) ** 2
        score = ((nu + 1.0) * z2 / (nu + z2) - 1.0) / s
        logf = logc - math.log(s) - (nu + 1) / 2 * math.log1p(z2 / nu)
        return score * score * math.exp(logf)

    half, err = integrate.quad(integrand, 0.0, math.inf, epsabs=1e-13, epsrel=1e-12, limit=400)
    if err > 1e-9:
        raise NumericError("Fisher information quadrature did not converge")
    return 2.0 * half


def are(asv1: float, val1: float, asv2: float, val2: float) -> float:
    """Efficiency of estimator 1 relative to estimator 2, after normalizing
    each by its population value: ``asv2 / asv1 * (val1 / val2)^2``."""
    if min(asv1, val1, asv2, val2) <= 0:
        raise DomainError("asymptotic variances and population values must be positive")
    return asv2 / asv1 * (val1 / val2) ** 2


def reference_mle(dist: DistributionSpec) -> tuple[float, float]:
    """``(ASV, population value)`` of the family's scale MLE.

    Normal: the sd; Laplace: the mean deviation; t: the t scale MLE at s = 1.
    """
    if dist.family == "normal":
        return dist["sigma2"] / 2.0, math.sqrt(dist["sigma2"])
    if dist.family == "laplace":
        a = dist["scale"]
        return a * a, a
    if dist.family == "student_t":
        return t_scale_mle_asv(dist["nu"]), 1.0
    raise DomainError(f"no scale MLE reference for {dist.family}")


def are_curve(dist: DistributionSpec, alpha_grid) -> np.ndarray:
    """ARE of ``Q_n^alpha`` relative to the scale MLE, as rows ``(alpha, are)``."""
    ref_asv, ref_val = reference_mle(dist)
    grid = np.asarray(alpha_grid, dtype=np.float64)
    if np.any((grid <= 0) | (grid >= 1)):
        raise DomainError("alpha grid must lie inside (0, 1)")
    out = np.empty((grid.size, 2))
    for i, a in enumerate(grid):
        rep = asv_qn_alpha(dist, float(a))
        out[i] = a, are(rep.asv, rep.population_value, ref_asv, ref_val)
    return out
