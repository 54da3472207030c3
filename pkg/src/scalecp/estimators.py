"""Scale estimators and their prefix (sequentially updated) versions.

All estimators are the raw sample versions: no finite-sample consistency
constants are applied anywhere.

=============  ==========================================================
kind           sample version
=============  ==========================================================
``variance``   ``sum((x - mean)**2) / (n - 1)``
``sd``         square root of ``variance``
``mean_dev``   ``sum(|x - median|) / (n - 1)``
``gini``       ``2 / (n (n - 1)) * sum_{i<j} |x_i - x_j|``
``mad``        ``median(|x - median|)``
``qn_alpha``   ``ceil(alpha * C(n, 2))``-th smallest ``|x_i - x_j|``
``qn_original`` ``C(floor(n/2) + 1, 2)``-th smallest ``|x_i - x_j|``
=============  ==========================================================
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scalecp import _kernels
from scalecp.exceptions import DomainError

__all__ = [
    "EstimatorKind",
    "PrefixCurve",
    "sample_median",
    "sample_variance",
    "sample_sd",
    "mean_deviation",
    "gini_mean_difference",
    "mad",
    "qn_alpha",
    "qn_original",
    "pair_rank",
    "pairwise_order_statistic",
    "estimate",
    "prefix_estimates",
]

KINDS = ("variance", "sd", "mean_dev", "gini", "mad", "qn_alpha", "qn_original")

_LABELS = {
    "variance": "Var",
    "sd": "SD",
    "mean_dev": "MD",
    "gini": "GMD",
    "mad": "MAD",
    "qn_original": "Qn",
}

_ALIASES = {
    "var": "variance",
    "variance": "variance",
    "sd": "sd",
    "md": "mean_dev",
    "mean_dev": "mean_dev",
    "gmd": "gini",
    "gini": "gini",
    "mad": "mad",
    "qn-orig": "qn_original",
    "qn_original": "qn_original",
}

_SHORT = {
    "variance": "var",
    "sd": "sd",
    "mean_dev": "md",
    "gini": "gmd",
    "mad": "mad",
    "qn_original": "qn-orig",
}


@dataclass(frozen=True)
class EstimatorKind:
    """Which scale estimator to use, plus ``alpha`` for ``qn_alpha``."""

    kind: str
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown estimator kind {self.kind!r}")
        if self.kind == "qn_alpha":
            if self.alpha is None or not 0.0 < self.alpha < 1.0:
                raise DomainError("qn_alpha needs alpha strictly inside (0, 1)")
        elif self.alpha is not None:
            raise DomainError(f"{self.kind} takes no alpha")

    @classmethod
    def qn(cls, alpha: float) -> "EstimatorKind":
        return cls("qn_alpha", float(alpha))

    @classmethod
    def parse(cls, name: str, alpha: float | None = None) -> "EstimatorKind":
        """Parse a short name: var, sd, md, gmd, mad, qn, qn-orig or ``qn:0.8``."""
        key = name.strip().lower()
        if key.startswith("qn:"):
            return cls.qn(float(key[3:]))
        if key in ("qn", "qn_alpha"):
            return cls.qn(0.8 if alpha is None else alpha)
        if key not in _ALIASES:
            raise DomainError(f"unknown estimator {name!r}")
        return cls(_ALIASES[key])

    @property
    def label(self) -> str:
        if self.kind == "qn_alpha":
            return f"Qn^{self.alpha:g}"
        return _LABELS[self.kind]

    @property
    def short_name(self) -> str:
        """Inverse of :meth:`parse`."""
        if self.kind == "qn_alpha":
            return f"qn:{self.alpha:g}"
        return _SHORT[self.kind]


@dataclass(frozen=True)
class PrefixCurve:
    """Values of ``s_{1:k}`` for ``k = k_min, ..., n``."""

    values: np.ndarray
    k_min: int = 2

    @property
    def n(self) -> int:
        return self.k_min + len(self.values) - 1

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_min, self.n + 1)

    def at(self, k: int) -> float:
        if not self.k_min <= k <= self.n:
            raise IndexError(k)
        return float(self.values[k - self.k_min])


def _as_sample(x, min_n: int = 2) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DomainError("expected a one-dimensional sample")
    if arr.size < min_n:
        raise DomainError(f"need at least {min_n} observations, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("sample contains non-finite values")
    return arr


def sample_median(x) -> float:
    """Middle order statistic, or the midpoint of the two middle ones for even n."""
    arr = _as_sample(x, 1)
    return float(np.median(arr))


def sample_variance(x) -> float:
    arr = _as_sample(x)
    dev = arr - arr.mean()
    return float(dev @ dev / (arr.size - 1))


def sample_sd(x) -> float:
    return math.sqrt(sample_variance(x))


def mean_deviation(x) -> float:
    arr = _as_sample(x)
    return float(np.abs(arr - np.median(arr)).sum() / (arr.size - 1))


def gini_mean_difference(x) -> float:
    """Gini's mean difference via ``sum_{i<j}|x_i - x_j| = sum_i (2i - n - 1) x_(i)``."""
    arr = _as_sample(x)
    n = arr.size
    ys = np.sort(arr - np.median(arr))
    weights = 2.0 * np.arange(1, n + 1) - n - 1
    return float(2.0 * (weights @ ys) / (n * (n - 1.0)))


def mad(x) -> float:
    arr = _as_sample(x)
    return float(np.median(np.abs(arr - np.median(arr))))


def pair_rank(alpha: float, n: int) -> int:
    """Rank ``ceil(alpha * C(n, 2))`` of the empirical alpha-quantile of pairwise differences."""
    npairs = n * (n - 1) // 2
    # rounding guards against alpha * N landing a hair above an integer
    r = math.ceil(round(alpha * npairs, 9))
    return min(max(r, 1), npairs)


def qn_original_rank(n: int) -> int:
    h = n // 2 + 1
    return h * (h - 1) // 2


def pairwise_order_statistic(x, rank: int) -> float:
    """``rank``-th smallest (1-based) of the ``C(n, 2)`` values ``|x_i - x_j|``."""
    arr = _as_sample(x)
    npairs = arr.size * (arr.size - 1) // 2
    if not 1 <= rank <= npairs:
        raise DomainError(f"rank {rank} outside 1..{npairs}")
    return float(_kernels.select_pairwise(np.sort(arr), rank))


def qn_alpha(x, alpha: float) -> float:
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie strictly inside (0, 1)")
    arr = _as_sample(x)
    return pairwise_order_statistic(arr, pair_rank(alpha, arr.size))


def qn_original(x) -> float:
    """Rousseeuw-Croux Qn without consistency factor."""
    arr = _as_sample(x)
    return pairwise_order_statistic(arr, qn_original_rank(arr.size))


def estimate(x, kind: EstimatorKind) -> float:
    """Apply the batch estimator selected by ``kind``."""
    if kind.kind == "variance":
        return sample_variance(x)
    if kind.kind == "sd":
        return sample_sd(x)
    if kind.kind == "mean_dev":
        return mean_deviation(x)
    if kind.kind == "gini":
        return gini_mean_difference(x)
    if kind.kind == "mad":
        return mad(x)
    if kind.kind == "qn_alpha":
        return qn_alpha(x, kind.alpha)
    return qn_original(x)


def effective_alpha(kind: EstimatorKind, n: int) -> float:
    """Quantile level of a pairwise-difference estimator at sample size n."""
    if kind.kind == "qn_alpha":
        return kind.alpha
    if kind.kind == "qn_original":
        return qn_original_rank(n) / (n * (n - 1) / 2)
    raise DomainError(f"{kind.kind} is not a pairwise-difference quantile")


def prefix_estimates(x, kind: EstimatorKind) -> PrefixCurve:
    """Estimates on every prefix ``x[:k]``, ``k = 2..n``.

    Variance uses a Welford recursion, mean deviation and Gini's mean
    difference are updated in O(log k) per step with Fenwick trees over the
    ranks of ``x``, and the pairwise quantiles rank all ``C(n, 2)``
    differences once and query a Fenwick tree per prefix (O(n^2 log n)
    total).  The MAD is recomputed on each prefix.
    """
    arr = _as_sample(x)
    n = arr.size
    if kind.kind in ("variance", "sd"):
        vals = _kernels.prefix_variance(arr)
        if kind.kind == "sd":
            vals = np.sqrt(vals)
    elif kind.kind == "mean_dev":
        vals = _kernels.prefix_mean_deviation(arr - np.median(arr))
    elif kind.kind == "gini":
        vals = _kernels.prefix_gini(arr - np.median(arr))
    elif kind.kind == "mad":
        vals = _kernels.prefix_mad(arr)
    else:
        ks = np.arange(2, n + 1)
        if kind.kind == "qn_alpha":
            ranks = [pair_rank(kind.alpha, k) for k in ks]
        else:
            ranks = [qn_original_rank(k) for k in ks]
        vals = _kernels.prefix_pair_order_stats(arr, np.asarray(ranks, dtype=np.int64))
    # last entry must match the batch estimator bit-for-bit
    vals = np.array(vals, dtype=np.float64)
    vals[-1] = estimate(arr, kind)
    return PrefixCurve(values=vals, k_min=2)
