"""Kernel (HAC) long-run variance estimators for each scale estimator.

Every estimator is written as ``scale_factor * sum_k W(|k| / b_n) gamma_k``
with ``gamma_k = (1/n) sum_i xi_i xi_{i+|k|}`` for an estimator-specific
influence series ``xi``:

=============  ===========================================  ==================
kind           xi_i                                         scale_factor
=============  ===========================================  ==================
variance       ``(x_i - mean)^2 - var``                     1
sd             same as variance                             ``1 / (4 var)``
mean_dev       ``|x_i - median| - d_n``                     1
gini           ``mean_j |x_i - x_j| - g_n``                 4
mad            ``1{|x_i - median| <= m_n} - 1/2``           ``1 / f_hat(m_n)^2``
qn_alpha       ``mean_j 1{|x_i - x_j| <= Q_n} - alpha``     ``4 / u_hat(Q_n)^2``
=============  ===========================================  ==================

``f_hat`` and ``u_hat`` are Epanechnikov kernel density estimates of
``|x_i - median|`` and of the pairwise differences, with bandwidth
``IQR * n^(-1/3)`` by default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scalecp import _kernels
from scalecp import estimators as est
from scalecp.estimators import EstimatorKind
from scalecp.exceptions import DegenerateDensityError, DomainError

__all__ = [
    "LrvConfig",
    "InfluenceSeries",
    "LrvEstimate",
    "hac_weight",
    "andrews_bandwidth",
    "epanechnikov",
    "kde_point",
    "pairwise_kde_point",
    "influence_series",
    "hac_sum",
    "lrv_estimate",
    "lrv_details",
]

HAC_KERNELS = ("quartic", "bartlett")
DEFAULT_FLOOR = 1e-12


@dataclass(frozen=True)
class LrvConfig:
    """Settings for long-run variance estimation.

    The HAC bandwidth is ``bandwidth`` when given, the AR(1) plug-in rule
    when ``andrews_rho`` is given, and ``2 n^(1/3)`` otherwise.  The density
    bandwidth is ``density_bandwidth`` when given and ``IQR * n^(-1/3)``
    otherwise.
    """

    hac_kernel: str = "quartic"
    bandwidth: float | None = None
    andrews_rho: float | None = None
    density_bandwidth: float | None = None
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        if self.hac_kernel not in HAC_KERNELS:
            raise DomainError(f"unknown HAC kernel {self.hac_kernel!r}")
        if self.bandwidth is not None and self.andrews_rho is not None:
            raise DomainError("give either a fixed bandwidth or andrews_rho, not both")
        if self.bandwidth is not None and not self.bandwidth > 0:
            raise DomainError("bandwidth must be positive")
        if self.andrews_rho is not None and not -1 < self.andrews_rho < 1:
            raise DomainError("andrews_rho must lie in (-1, 1)")
        if self.density_bandwidth is not None and not self.density_bandwidth > 0:
            raise DomainError("density bandwidth must be positive")
        if not self.floor > 0:
            raise DomainError("floor must be positive")

    def hac_bandwidth(self, n: int) -> float:
        if self.bandwidth is not None:
            return float(self.bandwidth)
        if self.andrews_rho is not None:
            b = andrews_bandwidth(self.andrews_rho, n)
            return min(max(b, 1.0), math.sqrt(n) / 2)
        return 2.0 * n ** (1 / 3)


@dataclass(frozen=True)
class InfluenceSeries:
    xi: np.ndarray
    scale_factor: float


@dataclass(frozen=True)
class LrvEstimate:
    value: float
    raw: float
    clamped: bool
    bandwidth: float
    influence: InfluenceSeries


def hac_weight(kernel: str, t):
    """HAC weight ``W(t)`` for ``t >= 0``; ``W(0) = 1``."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    if kernel == "quartic":
        out = np.where(t <= 1, (1 - t * t) ** 2, 0.0)
    elif kernel == "bartlett":
        out = np.maximum(0.0, 1 - t)
    else:
        raise DomainError(f"unknown HAC kernel {kernel!r}")
    return out[()] if out.ndim == 0 else out


def andrews_bandwidth(rho: float, n: int) -> float:
    """AR(1) plug-in bandwidth for the Bartlett kernel, unclamped."""
    if not -1 < rho < 1:
        raise DomainError("rho must lie in (-1, 1)")
    return 1.447 * n ** (1 / 3) * (4 * rho**2 / (1 - rho**2) ** 2) ** (1 / 3)


def epanechnikov(t):
    t = np.asarray(t, dtype=np.float64)
    out = np.where(np.abs(t) <= 1, 0.75 * (1 - t * t), 0.0)
    return out[()] if out.ndim == 0 else out


def kde_point(values, t: float, h: float) -> float:
    """Epanechnikov kernel density estimate of ``values`` at ``t``."""
    if not h > 0:
        raise DomainError("density bandwidth must be positive")
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise DomainError("need at least one value")
    return float(epanechnikov((v - t) / h).sum() / (v.size * h))


def pairwise_kde_point(x, t: float, h: float) -> float:
    """Density estimate of the ``C(n, 2)`` values ``|x_i - x_j|`` at ``t``.

    Only pairs whose difference lies within ``h`` of ``t`` are visited.
    """
    if not h > 0:
        raise DomainError("density bandwidth must be positive")
    ys = np.sort(np.asarray(x, dtype=np.float64))
    n = ys.size
    return float(2.0 * _kernels.epanechnikov_pair_sum(ys, float(t), float(h)) / (n * (n - 1) * h))


def _inverse_ecdf_iqr(values) -> float:
    q1, q3 = np.quantile(values, [0.25, 0.75], method="inverted_cdf")
    return float(q3 - q1)


def _pairwise_iqr(x) -> float:
    n = len(x)
    q1 = est.pairwise_order_statistic(x, est.pair_rank(0.25, n))
    q3 = est.pairwise_order_statistic(x, est.pair_rank(0.75, n))
    return q3 - q1


def _density_bandwidth(cfg: LrvConfig, iqr: float, n: int) -> float:
    if cfg.density_bandwidth is not None:
        return cfg.density_bandwidth
    return iqr * n ** (-1 / 3)


def influence_series(x, kind: EstimatorKind, cfg: LrvConfig | None = None) -> InfluenceSeries:
    """Centered empirical influence values and the factor multiplying the HAC sum."""
    cfg = cfg or LrvConfig()
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise DomainError("need a one-dimensional sample with at least 2 observations")
    if not np.all(np.isfinite(arr)):
        raise DomainError("sample contains non-finite values")
    n = arr.size

    if kind.kind in ("variance", "sd"):
        var = est.sample_variance(arr)
        xi = (arr - arr.mean()) ** 2 - var
        if kind.kind == "variance":
            return InfluenceSeries(xi, 1.0)
        if var <= 0:
            raise DomainError("sd influence undefined for a constant series")
        return InfluenceSeries(xi, 1.0 / (4.0 * var))

    if kind.kind == "mean_dev":
        return InfluenceSeries(np.abs(arr - np.median(arr)) - est.mean_deviation(arr), 1.0)

    if kind.kind == "gini":
        c = arr - np.median(arr)
        order = np.argsort(c, kind="mergesort")
        ys = c[order]
        csum = np.concatenate(([0.0], np.cumsum(ys)))
        r = np.arange(n)
        # sum_j |y_r - y_j| split into the r values below and n - r - 1 above
        tot = ys * r - csum[:-1] + (csum[-1] - csum[1:]) - ys * (n - r - 1)
        phi = np.empty(n)
        phi[order] = tot / n - est.gini_mean_difference(arr)
        return InfluenceSeries(phi, 4.0)

    if kind.kind == "mad":
        med = np.median(arr)
        dev = np.abs(arr - med)
        m = float(np.median(dev))
        xi = (dev <= m).astype(np.float64) - 0.5
        h = _density_bandwidth(cfg, _inverse_ecdf_iqr(dev), n)
        if not h > 0:
            raise DegenerateDensityError("zero density bandwidth (IQR of |x - median| is 0)")
        f = kde_point(dev, m, h)
        if not f > 0:
            raise DegenerateDensityError(f"density estimate at the MAD is {f}")
        return InfluenceSeries(xi, 1.0 / f**2)

    # pairwise-difference quantiles
    alpha = est.effective_alpha(kind, n)
    q = est.estimate(arr, kind)
    order = np.argsort(arr, kind="mergesort")
    counts = np.empty(n)
    counts[order] = _kernels.count_pairs_within(arr[order], q)
    psi = counts / n - alpha
    h = _density_bandwidth(cfg, _pairwise_iqr(arr), n)
    if not h > 0:
        raise DegenerateDensityError("zero density bandwidth (IQR of pairwise differences is 0)")
    u = pairwise_kde_point(arr, q, h)
    if not u > 0:
        raise DegenerateDensityError(f"density estimate of pairwise differences at Q is {u}")
    return InfluenceSeries(psi, 4.0 / u**2)


def hac_sum(xi, bandwidth: float, kernel: str = "quartic") -> float:
    """``sum_{|k| < n} W(|k| / b) (1/n) sum_i xi_i xi_{i+|k|}``."""
    xi = np.asarray(xi, dtype=np.float64)
    n = xi.size
    total = float(xi @ xi) / n
    max_lag = min(n - 1, math.ceil(bandwidth))
    for k in range(1, max_lag + 1):
        w = float(hac_weight(kernel, k / bandwidth))
        if w != 0.0:
            total += 2.0 * w * float(xi[:-k] @ xi[k:]) / n
    return total


def lrv_details(x, kind: EstimatorKind, cfg: LrvConfig | None = None) -> LrvEstimate:
    cfg = cfg or LrvConfig()
    if np.ndim(x) != 1 or len(x) < 4:
        raise DomainError("need a one-dimensional series with at least 4 observations")
    infl = influence_series(x, kind, cfg)
    b = cfg.hac_bandwidth(len(infl.xi))
    raw = infl.scale_factor * hac_sum(infl.xi, b, cfg.hac_kernel)
    clamped = not raw >= cfg.floor
    return LrvEstimate(
        value=cfg.floor if clamped else raw,
        raw=raw,
        clamped=clamped,
        bandwidth=b,
        influence=infl,
    )


def lrv_estimate(x, kind: EstimatorKind, cfg: LrvConfig | None = None) -> float:
    """Long-run variance estimate, clamped below at ``cfg.floor``."""
    return lrv_details(x, kind, cfg).value
