import json
from pathlib import Path

import numpy as np
import pytest

from scalecp import dgp, simharness
from scalecp.dgp import SeriesSpec
from scalecp.estimators import EstimatorKind
from scalecp.simharness import CampaignConfig, CellKey, ConfigError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
GINI = EstimatorKind("gini")


def small_cfg(**kw):
    base = dict(
        grid=[SeriesSpec(dgp.normal(), 60), SeriesSpec(dgp.laplace(), 60, lam=2.0)],
        estimators=[EstimatorKind("variance"), GINI, EstimatorKind.qn(0.8)],
        reps=30,
        base_seed=42,
    )
    base.update(kw)
    return CampaignConfig(**base)


def test_single_rep_rates_are_binary():
    table = simharness.run_campaign(small_cfg(reps=1))
    assert all(c.rate in (0.0, 1.0) for c in table.cells.values())


def test_deterministic_and_worker_independent():
    cfg = small_cfg()
    a = simharness.run_campaign(cfg)
    b = simharness.run_campaign(cfg)
    c = simharness.run_campaign(cfg, workers=2)
    assert a.to_csv() == b.to_csv() == c.to_csv()
    assert a.to_json() == c.to_json()


def test_grid_order_does_not_change_cells():
    cfg = small_cfg()
    rev = small_cfg(grid=list(reversed(cfg.grid)), estimators=list(reversed(cfg.estimators)))
    assert simharness.run_campaign(cfg).cells == simharness.run_campaign(rev).cells


def test_seed_changes_results():
    a = simharness.run_campaign(small_cfg(reps=40, base_seed=1))
    b = simharness.run_campaign(small_cfg(reps=40, base_seed=2))
    assert a.cells != b.cells


def test_series_seed_stable():
    spec = SeriesSpec(dgp.normal(), 60)
    s = simharness.series_seed(7, spec, 3)
    assert s == simharness.series_seed(7, SeriesSpec(dgp.normal(), 60, seed=99), 3)
    assert s != simharness.series_seed(7, spec, 4)
    assert 0 <= s < 2**64


def test_table_contents_and_serialization():
    table = simharness.run_campaign(small_cfg())
    key = CellKey("L(0,1)", 0.0, 2.0, 0.5, 60, "gmd")
    assert 0 <= table.rate(key) <= 1
    assert set(table.lookup(dist="N(0,1)")) == {"var", "gmd", "qn:0.8"}
    lines = table.to_csv().splitlines()
    assert lines[0] == "dist,rho,lam,theta,n,estimator,reps,rejections,errors,rate"
    assert len(lines) == 7
    doc = json.loads(table.to_json())
    assert doc["reps"] == 30 and len(doc["cells"]) == 6
    assert "elapsed" not in doc


def test_threshold_from_level():
    cfg = small_cfg(critical_value=None, level=0.05)
    assert abs(cfg.threshold - 1.3581) < 1e-3
    assert small_cfg().threshold == 1.358


def test_config_validation():
    with pytest.raises(ConfigError):
        small_cfg(reps=0)
    with pytest.raises(ConfigError):
        small_cfg(grid=[])
    with pytest.raises(ConfigError):
        small_cfg(level=1.5)


def test_errors_are_counted_per_cell(monkeypatch):
    from scalecp.exceptions import DegenerateDensityError

    real = simharness.detect

    def flaky(x, kind, cfg):
        if kind.kind == "mad" and x[0] > 0:
            raise DegenerateDensityError("zero density")
        return real(x, kind, cfg)

    monkeypatch.setattr(simharness, "detect", flaky)
    cfg = small_cfg(grid=[SeriesSpec(dgp.normal(), 40)], estimators=[GINI, EstimatorKind("mad")], reps=40)
    table = simharness.run_campaign(cfg)
    mad = table.cells[CellKey("N(0,1)", 0.0, 1.0, 0.5, 40, "mad")]
    assert 0 < mad.errors < 40
    assert table.cells[CellKey("N(0,1)", 0.0, 1.0, 0.5, 40, "gmd")].errors == 0
    assert table.total_errors == mad.errors
    assert mad.rate == mad.rejections / (40 - mad.errors)


def test_pathology_small():
    table = simharness.run_pathology(60, [1.0, 3.0], reps=200, base_seed=5)
    assert table.lookup(lam=1.0)["qn-orig"] > 0.3
    assert table.lookup(lam=3.0)["qn-orig"] < 0.05
    assert table.lookup(lam=3.0)["gmd"] > 0.7


@pytest.mark.slow
def test_power_monotone_in_lambda():
    cfg = CampaignConfig(
        [SeriesSpec(dgp.normal(), 240, lam=lam) for lam in (1.0, 1.5, 2.0)], [GINI], reps=1000, base_seed=8
    )
    table = simharness.run_campaign(cfg)
    r = [table.lookup(lam=lam)["gmd"] for lam in (1.0, 1.5, 2.0)]
    se = [np.sqrt(max(p * (1 - p), 1e-4) / 1000) for p in r]
    assert r[2] + 3 * se[2] >= r[1] and r[1] + 3 * se[1] >= r[0]
    assert r[0] < r[1] < r[2] or r[2] == 1.0


def test_load_shipped_configs():
    for path in sorted(CONFIGS.glob("*.toml")):
        cfg = simharness.load_config(path)
        assert cfg.reps >= 1 and cfg.grid


def test_size_config_grid():
    cfg = simharness.load_config(CONFIGS / "size_n500.toml")
    assert len(cfg.grid) == 10
    assert [e.short_name for e in cfg.estimators] == ["var", "md", "gmd", "mad", "qn-orig", "qn:0.8"]
    assert cfg.critical_value == 1.358


@pytest.mark.parametrize(
    "text, field",
    [
        ("reps = 0\nestimators=['gmd']\n[grid]\ndist='normal'\nn=50\n", "reps"),
        ("reps = 5\nestimators=['foo']\n[grid]\ndist='normal'\nn=50\n", "estimators"),
        ("reps = 5\nestimators=['gmd']\n[grid]\ndist='weird'\nn=50\n", "grid.dist"),
        ("reps = 5\nestimators=['gmd']\n[grid]\ndist='normal'\nn=50\nrho=1.5\n", "grid"),
        ("reps = 5\nestimators=['gmd']\n[lrv]\nkernel='parzen'\n[grid]\ndist='normal'\nn=50\n", "lrv"),
        ("reps = 5\nestimators=['gmd']\nfoo=1\n[grid]\ndist='normal'\nn=50\n", "foo"),
        ("reps = 'many'\nestimators=['gmd']\n[grid]\ndist='normal'\nn=50\n", "reps"),
        ("reps = 5\n[grid]\ndist='normal'\nn=50\n", "estimators"),
    ],
)
def test_config_diagnostics(tmp_path, text, field):
    path = tmp_path / "bad.toml"
    path.write_text(text)
    with pytest.raises(ConfigError, match=field):
        simharness.load_config(path)


def test_toml_syntax_error_names_line(tmp_path):
    path = tmp_path / "broken.toml"
    path.write_text("reps = 5\nestimators = [gmd]\n")
    with pytest.raises(ConfigError, match="line"):
        simharness.load_config(path)
