"""Seeded Monte Carlo campaigns for size and power of the scale CUSUM tests.

Every replication of a grid cell draws one series from a generator seeded by
a stable hash of ``(base_seed, series key, rep)`` and applies each requested
estimator to that same series.  Rejection counts are integers, so the reduced
table does not depend on how replications were spread over worker processes.

Config files are TOML::

    reps = 1000
    base_seed = 1
    estimators = ["var", "md", "gmd", "mad", "qn-orig", "qn:0.8"]
    # critical_value = 1.358   (default; or set level = 0.05 and omit it)

    [lrv]
    kernel = "quartic"       # or "bartlett"
    # bandwidth = 4.0        # fixed HAC bandwidth, default 2 n^(1/3)
    # andrews_rho = 0.8

    [grid]                   # cartesian product of the lists
    dist = ["N(0,1)", "L(0,1)", "NM(3,0.01)", "t5", "t3"]
    n = [500]
    rho = [0.0]
    lam = [1.0]
    theta = [0.5]
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize

from scalecp import dgp
from scalecp.cpt import detect, kolmogorov_sf
from scalecp.dgp import SeriesSpec
from scalecp.estimators import EstimatorKind
from scalecp.exceptions import DomainError, NumericError
from scalecp.lrv import LrvConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = [
    "CampaignConfig",
    "CellKey",
    "CellResult",
    "SimTable",
    "ConfigError",
    "series_seed",
    "run_campaign",
    "run_pathology",
    "load_config",
    "parse_config",
]

DEFAULT_CRITICAL_VALUE = 1.358
_BLOCK = 25  # replications per task


class ConfigError(DomainError):
    """Malformed campaign configuration."""


@dataclass(frozen=True)
class CampaignConfig:
    grid: tuple
    estimators: tuple
    lrv: LrvConfig = field(default_factory=LrvConfig)
    reps: int = 1000
    level: float = 0.05
    base_seed: int = 0
    critical_value: float | None = DEFAULT_CRITICAL_VALUE

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        object.__setattr__(self, "estimators", tuple(self.estimators))
        if not self.grid:
            raise ConfigError("grid is empty")
        if not self.estimators:
            raise ConfigError("no estimators given")
        if not isinstance(self.reps, (int, np.integer)) or self.reps < 1:
            raise ConfigError("reps must be a positive integer")
        if not 0 < self.level < 1:
            raise ConfigError("level must lie in (0, 1)")
        if self.critical_value is not None and not self.critical_value > 0:
            raise ConfigError("critical_value must be positive")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must fit in 64 unsigned bits")

    @property
    def threshold(self) -> float:
        """Critical value, or the Kolmogorov ``1 - level`` quantile when unset."""
        if self.critical_value is not None:
            return self.critical_value
        return optimize.brentq(lambda q: kolmogorov_sf(q) - self.level, 0.3, 10.0, xtol=1e-12)


@dataclass(frozen=True, order=True)
class CellKey:
    dist: str
    rho: float
    lam: float
    theta: float
    n: int
    estimator: str


@dataclass(frozen=True)
class CellResult:
    reps: int
    rejections: int
    errors: int

    @property
    def rate(self) -> float:
        """Rejection frequency among the replications that ran without error."""
        valid = self.reps - self.errors
        return self.rejections / valid if valid else math.nan


@dataclass
class SimTable:
    cells: dict
    reps: int
    base_seed: int
    critical_value: float
    elapsed: float = 0.0

    def rate(self, key: CellKey) -> float:
        return self.cells[key].rate

    def lookup(self, **kw) -> dict:
        """Rates of all cells matching the given key fields, keyed by estimator."""
        out = {}
        for k, v in self.cells.items():
            if all(getattr(k, name) == val for name, val in kw.items()):
                out[k.estimator] = v.rate
        return out

    @property
    def total_errors(self) -> int:
        return sum(c.errors for c in self.cells.values())

    def rows(self) -> list[dict]:
        return [
            {
                "dist": k.dist,
                "rho": k.rho,
                "lam": k.lam,
                "theta": k.theta,
                "n": k.n,
                "estimator": k.estimator,
                "reps": c.reps,
                "rejections": c.rejections,
                "errors": c.errors,
                "rate": c.rate,
            }
            for k, c in sorted(self.cells.items())
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        rows = self.rows()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        return buf.getvalue()

    def to_json(self) -> str:
        # elapsed time is left out so repeated runs give identical files
        doc = {
            "reps": self.reps,
            "base_seed": self.base_seed,
            "critical_value": self.critical_value,
            "cells": self.rows(),
        }
        return json.dumps(doc, indent=2) + "\n"


def _series_key(spec: SeriesSpec) -> str:
    return f"{spec.dist.label}|rho={spec.rho!r}|lam={spec.lam!r}|theta={spec.theta!r}|n={spec.n}|mu={spec.mu!r}"


def series_seed(base_seed: int, spec: SeriesSpec, rep: int) -> int:
    """Stable 64-bit seed for replication ``rep`` of the series cell ``spec``."""
    msg = f"{base_seed}|{_series_key(spec)}|{rep}".encode()
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")


def _run_block(spec, estimators, lrv, base_seed, start, stop, threshold):
    rej = np.zeros(len(estimators), dtype=np.int64)
    err = np.zeros(len(estimators), dtype=np.int64)
    for rep in range(start, stop):
        rng = np.random.default_rng(np.random.SeedSequence(series_seed(base_seed, spec, rep)))
        x = dgp.sample_series(spec, rng)
        for j, kind in enumerate(estimators):
            try:
                res = detect(x, kind, lrv)
            except (DomainError, NumericError, FloatingPointError):
                err[j] += 1
                continue
            rej[j] += res.statistic > threshold
    return rej, err


def run_campaign(cfg: CampaignConfig, workers: int = 1) -> SimTable:
    """Rejection frequencies of every (series cell, estimator) pair."""
    t0 = time.perf_counter()
    threshold = cfg.threshold
    tasks = []
    for i, spec in enumerate(cfg.grid):
        for start in range(0, cfg.reps, _BLOCK):
            tasks.append((i, (spec, cfg.estimators, cfg.lrv, cfg.base_seed, start, min(start + _BLOCK, cfg.reps), threshold)))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, *args) for _, args in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_run_block(*args) for _, args in tasks]

    rej = np.zeros((len(cfg.grid), len(cfg.estimators)), dtype=np.int64)
    err = np.zeros_like(rej)
    for (i, _), (r, e) in zip(tasks, results):
        rej[i] += r
        err[i] += e

    cells = {}
    for i, spec in enumerate(cfg.grid):
        for j, kind in enumerate(cfg.estimators):
            key = CellKey(spec.dist.label, spec.rho, spec.lam, spec.theta, spec.n, kind.short_name)
            if key in cells:
                raise ConfigError(f"duplicate cell {key}")
            cells[key] = CellResult(cfg.reps, int(rej[i, j]), int(err[i, j]))
    return SimTable(cells, cfg.reps, cfg.base_seed, threshold, time.perf_counter() - t0)


PATHOLOGY_ESTIMATORS = (EstimatorKind("variance"), EstimatorKind("gini"), EstimatorKind("qn_original"))


def run_pathology(n: int, lambdas, reps: int, base_seed: int = 0, workers: int = 1, lrv: LrvConfig | None = None) -> SimTable:
    """Variance, Gini and original Qn tests on i.i.d. N(0,1) with the scale
    of the second half multiplied by each ``lambda``."""
    grid = [SeriesSpec(dgp.normal(), n, lam=float(lam), theta=0.5) for lam in lambdas]
    cfg = CampaignConfig(grid, PATHOLOGY_ESTIMATORS, lrv or LrvConfig(), reps, base_seed=base_seed)
    return run_campaign(cfg, workers)


# --- config files -----------------------------------------------------------

_TOP_KEYS = {"reps", "base_seed", "level", "critical_value", "estimators", "lrv", "grid"}
_LRV_KEYS = {"kernel", "bandwidth", "andrews_rho", "density_bandwidth"}
_GRID_KEYS = {"dist", "n", "rho", "lam", "theta", "mu"}


def _as_list(v):
    return v if isinstance(v, list) else [v]


def _field(name, fn, value):
    try:
        return fn(value)
    except ConfigError:
        raise
    except (DomainError, TypeError, ValueError) as exc:
        raise ConfigError(f"field {name!r}: {exc}") from None


def _check_type(name, value, types):
    if isinstance(value, bool) or not isinstance(value, types):
        raise ConfigError(f"field {name!r}: expected {types}, got {value!r}")
    return value


def parse_config(doc: dict) -> CampaignConfig:
    """Build a :class:`CampaignConfig` from a parsed TOML document."""
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown field(s) {sorted(unknown)}")
    for req in ("reps", "estimators", "grid"):
        if req not in doc:
            raise ConfigError(f"missing field {req!r}")

    reps = _check_type("reps", doc["reps"], int)
    if reps < 1:
        raise ConfigError("field 'reps': must be >= 1")
    base_seed = _check_type("base_seed", doc.get("base_seed", 0), int)
    level = float(_check_type("level", doc.get("level", 0.05), (int, float)))
    crit = doc.get("critical_value", None if "level" in doc else DEFAULT_CRITICAL_VALUE)
    if crit is not None:
        crit = float(_check_type("critical_value", crit, (int, float)))

    ests = tuple(_field("estimators", EstimatorKind.parse, str(e)) for e in _as_list(doc["estimators"]))

    lrv_doc = doc.get("lrv", {})
    if not isinstance(lrv_doc, dict):
        raise ConfigError("field 'lrv': expected a table")
    unknown = set(lrv_doc) - _LRV_KEYS
    if unknown:
        raise ConfigError(f"unknown field(s) in [lrv]: {sorted(unknown)}")
    lrv = _field(
        "lrv",
        lambda d: LrvConfig(
            hac_kernel=d.get("kernel", "quartic"),
            bandwidth=d.get("bandwidth"),
            andrews_rho=d.get("andrews_rho"),
            density_bandwidth=d.get("density_bandwidth"),
        ),
        lrv_doc,
    )

    g = doc["grid"]
    if not isinstance(g, dict):
        raise ConfigError("field 'grid': expected a table")
    unknown = set(g) - _GRID_KEYS
    if unknown:
        raise ConfigError(f"unknown field(s) in [grid]: {sorted(unknown)}")
    if "dist" not in g or "n" not in g:
        raise ConfigError("[grid] needs 'dist' and 'n'")
    dists = [_field("grid.dist", dgp.parse_distribution, str(d)) for d in _as_list(g["dist"])]
    ns = [_check_type("grid.n", v, int) for v in _as_list(g["n"])]
    axes = {k: [float(_check_type(f"grid.{k}", v, (int, float))) for v in _as_list(g.get(k, d))]
            for k, d in (("rho", 0.0), ("lam", 1.0), ("theta", 0.5), ("mu", 0.0))}
    grid = []
    for dist, n, rho, lam, theta, mu in itertools.product(
        dists, ns, axes["rho"], axes["lam"], axes["theta"], axes["mu"]
    ):
        grid.append(_field("grid", lambda _: SeriesSpec(dist, n, rho=rho, lam=lam, theta=theta, mu=mu), None))
    return _field(
        "config",
        lambda _: CampaignConfig(tuple(grid), ests, lrv, reps, level, base_seed, crit),
        None,
    )


def load_config(path) -> CampaignConfig:
    """Read a TOML campaign config; errors name the file and the offending field."""
    path = Path(path)
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return parse_config(doc)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
