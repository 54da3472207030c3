"""Innovation laws, AR(1) recursion and multiplicative scale changes.

Series follow ``X_i = lambda_i * Y_i + mu`` where ``Y`` is an AR(1) process
``Y_i = rho * Y_{i-1} + eps_i`` and ``lambda_i`` jumps from 1 to ``lam``
after index ``floor(theta * n)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.signal import lfilter

from scalecp.exceptions import DomainError

__all__ = [
    "DistributionSpec",
    "SeriesSpec",
    "normal",
    "laplace",
    "normal_mixture",
    "student_t",
    "parse_distribution",
    "density",
    "cdf",
    "kurtosis",
    "sample_innovations",
    "sample_series",
]

FAMILIES = ("normal", "laplace", "normal_mixture", "student_t")
BURN_IN = 1000


@dataclass(frozen=True)
class DistributionSpec:
    """An innovation law.

    ``params`` holds, per family:

    * normal: ``mu``, ``sigma2``
    * laplace: ``mu``, ``scale``
    * normal_mixture: ``gamma``, ``eps`` (``N(0, gamma^2)`` with weight ``eps``)
    * student_t: ``nu``
    """

    family: str
    params: tuple = field(default=())

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown family {self.family!r}")
        p = dict(self.params)
        if self.family == "normal" and not p.get("sigma2", 0) > 0:
            raise DomainError("normal needs sigma2 > 0")
        if self.family == "laplace" and not p.get("scale", 0) > 0:
            raise DomainError("laplace needs scale > 0")
        if self.family == "normal_mixture":
            if not p.get("gamma", 0) >= 1:
                raise DomainError("normal mixture needs gamma >= 1")
            if not 0 <= p.get("eps", -1) <= 1:
                raise DomainError("normal mixture needs eps in [0, 1]")
        if self.family == "student_t" and not p.get("nu", 0) > 0:
            raise DomainError("student t needs nu > 0")

    def __getitem__(self, key):
        return dict(self.params)[key]

    @property
    def label(self) -> str:
        p = dict(self.params)
        if self.family == "normal":
            return f"N({p['mu']:g},{p['sigma2']:g})"
        if self.family == "laplace":
            return f"L({p['mu']:g},{p['scale']:g})"
        if self.family == "normal_mixture":
            return f"NM({p['gamma']:g},{p['eps']:g})"
        return f"t{p['nu']:g}"

    @property
    def has_finite_variance(self) -> bool:
        return self.family != "student_t" or self["nu"] > 2


def normal(mu: float = 0.0, sigma2: float = 1.0) -> DistributionSpec:
    return DistributionSpec("normal", (("mu", float(mu)), ("sigma2", float(sigma2))))


def laplace(mu: float = 0.0, scale: float = 1.0) -> DistributionSpec:
    return DistributionSpec("laplace", (("mu", float(mu)), ("scale", float(scale))))


def normal_mixture(gamma: float = 3.0, eps: float = 0.01) -> DistributionSpec:
    return DistributionSpec("normal_mixture", (("gamma", float(gamma)), ("eps", float(eps))))


def student_t(nu: float) -> DistributionSpec:
    return DistributionSpec("student_t", (("nu", float(nu)),))


_NUM = r"([-+]?\d*\.?\d+(?:[eE][-+]?\d+)?)"


def parse_distribution(text: str) -> DistributionSpec:
    """Parse labels such as ``normal``, ``N(0,1)``, ``laplace``, ``L(0,1)``,
    ``NM(3,0.01)``, ``t3``, ``t0.5`` or ``cauchy``."""
    s = text.strip().replace(" ", "")
    low = s.lower()
    if low in ("normal", "n", "gauss"):
        return normal()
    if low == "laplace":
        return laplace()
    if low == "cauchy":
        return student_t(1)
    m = re.fullmatch(r"t" + _NUM, low)
    if m:
        return student_t(float(m.group(1)))
    m = re.fullmatch(r"(nm|n|l)\(" + _NUM + "," + _NUM + r"\)", low)
    if m:
        a, b = float(m.group(2)), float(m.group(3))
        return {"nm": normal_mixture, "n": normal, "l": laplace}[m.group(1)](a, b)
    raise DomainError(f"cannot parse distribution {text!r}")


def _t_log_norm(nu: float) -> float:
    # log of 1 / (sqrt(nu) B(nu/2, 1/2))
    return -0.5 * math.log(nu) - special.betaln(nu / 2, 0.5)


def density(dist: DistributionSpec, x):
    """Probability density of ``dist`` at ``x`` (scalar or array)."""
    x = np.asarray(x, dtype=np.float64)
    f = dist.family
    if f == "normal":
        mu, s2 = dist["mu"], dist["sigma2"]
        out = np.exp(-((x - mu) ** 2) / (2 * s2)) / math.sqrt(2 * math.pi * s2)
    elif f == "laplace":
        mu, a = dist["mu"], dist["scale"]
        out = np.exp(-np.abs(x - mu) / a) / (2 * a)
    elif f == "normal_mixture":
        g, e = dist["gamma"], dist["eps"]
        phi = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        out = e * phi(x / g) / g + (1 - e) * phi(x)
    else:
        nu = dist["nu"]
        out = np.exp(_t_log_norm(nu) - (nu + 1) / 2 * np.log1p(x * x / nu))
    return out[()] if out.ndim == 0 else out


def cdf(dist: DistributionSpec, x):
    x = np.asarray(x, dtype=np.float64)
    f = dist.family
    if f == "normal":
        out = special.ndtr((x - dist["mu"]) / math.sqrt(dist["sigma2"]))
    elif f == "laplace":
        z = (x - dist["mu"]) / dist["scale"]
        out = np.where(z < 0, 0.5 * np.exp(np.minimum(z, 0)), 1 - 0.5 * np.exp(-np.maximum(z, 0)))
    elif f == "normal_mixture":
        g, e = dist["gamma"], dist["eps"]
        out = e * special.ndtr(x / g) + (1 - e) * special.ndtr(x)
    else:
        out = special.stdtr(dist["nu"], x)
    return out[()] if out.ndim == 0 else out


def kurtosis(dist: DistributionSpec) -> float:
    """Excess kurtosis; ``inf`` for t with nu <= 4."""
    f = dist.family
    if f == "normal":
        return 0.0
    if f == "laplace":
        return 3.0
    if f == "normal_mixture":
        g2, e = dist["gamma"] ** 2, dist["eps"]
        return 3 * e * (1 - e) * (g2 - 1) ** 2 / (e * g2 + 1 - e) ** 2
    nu = dist["nu"]
    return 6.0 / (nu - 4) if nu > 4 else math.inf


def sample_innovations(dist: DistributionSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw i.i.d. innovations.

    Laplace uses the inverse cdf, Student t the ratio of a standard normal
    and an independent ``sqrt(chi2_nu / nu)``.
    """
    f = dist.family
    if f == "normal":
        return dist["mu"] + math.sqrt(dist["sigma2"]) * rng.standard_normal(size)
    if f == "laplace":
        u = rng.random(size) - 0.5
        return dist["mu"] - dist["scale"] * np.sign(u) * np.log1p(-2 * np.abs(u))
    if f == "normal_mixture":
        z = rng.standard_normal(size)
        wide = rng.random(size) < dist["eps"]
        return np.where(wide, dist["gamma"] * z, z)
    nu = dist["nu"]
    z = rng.standard_normal(size)
    return z / np.sqrt(rng.chisquare(nu, size) / nu)


@dataclass(frozen=True)
class SeriesSpec:
    """A simulated series: AR(1) innovations, scale change and level.

    The scale switches from 1 to ``lam`` after observation ``floor(theta n)``.
    """

    dist: DistributionSpec
    n: int
    rho: float = 0.0
    lam: float = 1.0
    theta: float = 0.5
    mu: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not -1 < self.rho < 1:
            raise DomainError("rho must lie in (-1, 1)")
        if self.n < 1:
            raise DomainError("n must be positive")
        if not self.lam > 0:
            raise DomainError("lambda must be positive")
        if not 0 < self.theta < 1:
            raise DomainError("theta must lie in (0, 1)")
        if self.lam != 1 and not 1 <= self.change_index <= self.n - 1:
            raise DomainError("change index floor(theta n) must lie in [1, n - 1]")

    @property
    def change_index(self) -> int:
        return math.floor(self.theta * self.n)


def sample_series(spec: SeriesSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Generate ``X_1..X_n``; uses ``spec.seed`` when no generator is passed.

    With finite innovation variance ``Y_0`` is an innovation draw scaled by
    ``1 / sqrt(1 - rho^2)``; otherwise the recursion is run for a burn-in of
    1000 steps first.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    n, rho = spec.n, spec.rho
    if rho == 0.0:
        y = sample_innovations(spec.dist, n, rng)
    elif spec.dist.has_finite_variance:
        y0 = sample_innovations(spec.dist, 1, rng)[0] / math.sqrt(1 - rho * rho)
        eps = sample_innovations(spec.dist, n, rng)
        y, _ = lfilter([1.0], [1.0, -rho], eps, zi=[rho * y0])
    else:
        eps = sample_innovations(spec.dist, n + BURN_IN, rng)
        y = lfilter([1.0], [1.0, -rho], eps)[BURN_IN:]
    x = np.array(y, dtype=np.float64)
    if spec.lam != 1.0:
        x[spec.change_index:] *= spec.lam
    return x + spec.mu
