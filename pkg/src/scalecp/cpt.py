"""CUSUM change-point test for a change in scale.

The test statistic is ``max_k k / sqrt(n) |s_{1:k} - s_{1:n}|`` divided by
the square root of a long-run variance estimate; under the null it
converges to the supremum of a Brownian bridge, whose distribution
function is evaluated by :func:`kolmogorov_cdf`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from scalecp import estimators as est
from scalecp.estimators import EstimatorKind
from scalecp.exceptions import DomainError
from scalecp.lrv import LrvConfig, lrv_details

__all__ = [
    "TestResult",
    "cusum_curve",
    "kolmogorov_cdf",
    "kolmogorov_sf",
    "detect",
]

SHORT_SERIES = 20
_TERM_TOL = 1e-14


@dataclass(frozen=True)
class TestResult:
    """Outcome of :func:`detect`.

    ``curve[i]`` belongs to ``k = i + 2``; ``change_index`` is the first
    ``k`` attaining the maximum.
    """

    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    change_index: int
    curve: np.ndarray
    lrv: float
    estimator: EstimatorKind
    bandwidth: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def ks(self) -> np.ndarray:
        return np.arange(2, len(self.curve) + 2)

    def rejects(self, level: float = 0.05) -> bool:
        return self.p_value < level


def cusum_curve(x, kind: EstimatorKind) -> np.ndarray:
    """``(k / sqrt(n)) |s_{1:k} - s_{1:n}|`` for ``k = 2..n``."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 4:
        raise DomainError("need a one-dimensional series with at least 4 observations")
    n = arr.size
    prefix = est.prefix_estimates(arr, kind)
    ks = prefix.ks
    return ks / math.sqrt(n) * np.abs(prefix.values - prefix.values[-1])


def _alternating(q: float) -> float:
    # 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 q^2)
    acc = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * q * q)
        acc += term if k % 2 else -term
        if term < _TERM_TOL:
            return 2.0 * acc
        k += 1


def _theta_dual(q: float) -> float:
    # sqrt(2 pi) / q sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 q^2))
    acc = 0.0
    k = 1
    c = math.pi**2 / (8.0 * q * q)
    while True:
        term = math.exp(-((2 * k - 1) ** 2) * c)
        acc += term
        if term < _TERM_TOL * max(acc, 1e-300):
            return math.sqrt(2.0 * math.pi) / q * acc
        k += 1


def kolmogorov_cdf(q: float) -> float:
    """``P(sup_t |B(t)| <= q)`` for a standard Brownian bridge ``B``."""
    if q <= 0:
        return 0.0
    if q < 1.0:
        return min(1.0, _theta_dual(q))
    return 1.0 - _alternating(q)


def kolmogorov_sf(q: float) -> float:
    """``1 - kolmogorov_cdf(q)`` without cancellation in the upper tail."""
    if q <= 0:
        return 1.0
    if q < 1.0:
        return 1.0 - kolmogorov_cdf(q)
    return min(1.0, max(0.0, _alternating(q)))


def detect(x, kind: EstimatorKind, cfg: LrvConfig | None = None) -> TestResult:
    """Studentized CUSUM test for a change in scale."""
    cfg = cfg or LrvConfig()
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 4:
        raise DomainError("need a one-dimensional series with at least 4 observations")
    if not np.all(np.isfinite(arr)):
        raise DomainError("series contains non-finite values")
    raw_curve = cusum_curve(arr, kind)
    lrv = lrv_details(arr, kind, cfg)
    curve = raw_curve / math.sqrt(lrv.value)
    i = int(np.argmax(curve))
    stat = float(curve[i])
    return TestResult(
        statistic=stat,
        p_value=kolmogorov_sf(stat),
        change_index=i + 2,
        curve=curve,
        lrv=lrv.value,
        estimator=kind,
        bandwidth=lrv.bandwidth,
        diagnostics={
            "lrv_clamped": lrv.clamped,
            "lrv_raw": lrv.raw,
            "short_series": arr.size < SHORT_SERIES,
        },
    )
