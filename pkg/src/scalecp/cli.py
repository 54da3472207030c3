"""Command-line interface: ``scalecp detect | simulate | are``.

Exit codes: 0 success, 1 bad input or configuration, 2 rejection of the
no-change hypothesis when ``detect --exit-on-reject`` is given.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from scalecp import asymptotics, dgp, simharness
from scalecp.cpt import detect
from scalecp.estimators import EstimatorKind
from scalecp.exceptions import DomainError, NumericError
from scalecp.lrv import LrvConfig

EXIT_OK, EXIT_ERROR, EXIT_REJECT = 0, 1, 2

ESTIMATOR_CHOICES = ("var", "md", "gmd", "mad", "qn", "qn-orig")


class InputError(DomainError):
    pass


@dataclass(frozen=True)
class InputSeries:
    values: np.ndarray
    labels: list | None = None
    transform: str = "none"


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def _column_index(spec: str | None, header: list | None, default: int | None) -> int | None:
    if spec is None:
        return default
    if spec.lstrip("-").isdigit():
        return int(spec)
    if header is None or spec not in header:
        raise InputError(f"column {spec!r} not found (no header or unknown name)")
    return header.index(spec)


def read_series(text: str, column: str | None = None, label_column: str | None = None,
                log_returns: bool = False) -> InputSeries:
    """Parse comma-separated text into a numeric series.

    A header row is recognized when the first token of the first row is not
    numeric.  Without ``column`` the single column, or else the last column,
    is used.
    """
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError("input is empty")
    header = None
    if not _is_number(rows[0][0].strip()):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise InputError("input has a header but no data")
    ncol = len(rows[0])
    col = _column_index(column, header, ncol - 1)
    lab = _column_index(label_column, header, None)
    values, labels = [], []
    for lineno, row in enumerate(rows, start=2 if header else 1):
        try:
            values.append(float(row[col]))
        except (IndexError, ValueError):
            raise InputError(f"line {lineno}: no numeric value in column {col}") from None
        if lab is not None:
            try:
                labels.append(row[lab].strip())
            except IndexError:
                raise InputError(f"line {lineno}: missing label column {lab}") from None
    x = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InputError("input contains non-finite values")
    transform = "none"
    if log_returns:
        if np.any(x <= 0):
            raise InputError("log returns need strictly positive values")
        x = np.diff(np.log(x))
        labels = labels[1:] if labels else labels
        transform = "log_returns"
    return InputSeries(x, labels or None, transform)


def _lrv_config(args) -> LrvConfig:
    return LrvConfig(hac_kernel=args.kernel, bandwidth=args.bandwidth, andrews_rho=args.andrews_rho)


def cmd_detect(args) -> int:
    try:
        text = sys.stdin.read() if args.csv == "-" else Path(args.csv).read_text()
    except OSError as exc:
        print(f"error: cannot read {args.csv}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        series = read_series(text, args.column, args.label_column, args.log_returns)
        kind = EstimatorKind.parse(args.estimator, args.alpha)
        res = detect(series.values, kind, _lrv_config(args))
    except (DomainError, NumericError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    label = series.labels[res.change_index - 1] if series.labels else None
    if args.format == "json":
        doc = {
            "estimator": kind.short_name,
            "n": int(series.values.size),
            "transform": series.transform,
            "statistic": res.statistic,
            "p_value": res.p_value,
            "level": args.level,
            "reject": res.rejects(args.level),
            "change_index": res.change_index,
            "change_label": label,
            "lrv": res.lrv,
            "bandwidth": res.bandwidth,
            "diagnostics": res.diagnostics,
            "curve": res.curve.tolist(),
        }
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    else:
        out = csv.writer(sys.stdout, lineterminator="\n")
        out.writerow(["k", "label", "curve"])
        for k, v in zip(res.ks, res.curve):
            out.writerow([int(k), series.labels[k - 1] if series.labels else "", repr(float(v))])
    if args.exit_on_reject and res.rejects(args.level):
        return EXIT_REJECT
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        cfg = simharness.load_config(args.config)
        if args.seed is not None:
            cfg = simharness.CampaignConfig(
                cfg.grid, cfg.estimators, cfg.lrv, cfg.reps, cfg.level, args.seed, cfg.critical_value
            )
    except (OSError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    table = simharness.run_campaign(cfg, workers=args.workers)
    if args.out_csv:
        Path(args.out_csv).write_text(table.to_csv())
    if args.out_json:
        Path(args.out_json).write_text(table.to_json())
    if not args.out_csv and not args.out_json:
        sys.stdout.write(table.to_csv())
    print(f"{len(table.cells)} cells, {table.reps} reps, {table.elapsed:.1f}s", file=sys.stderr)
    if table.total_errors:
        print(f"error: {table.total_errors} failed replications", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def parse_grid(text: str) -> np.ndarray:
    """``start:stop:step`` (inclusive of ``stop``) or a comma-separated list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise DomainError(f"bad grid {text!r}, expected start:stop:step")
        start, stop, step = parts
        m = int(math.floor((stop - start) / step + 1e-9))
        return np.round(start + step * np.arange(m + 1), 12)
    return np.array([float(p) for p in text.split(",")])


def cmd_are(args) -> int:
    try:
        dist = dgp.parse_distribution(args.dist)
        grid = parse_grid(args.alpha_grid)
        curve = asymptotics.are_curve(dist, grid)
    except (DomainError, NumericError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["alpha", "are"])
    for a, v in curve:
        out.writerow([f"{a:g}", repr(float(v))])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scalecp", description="CUSUM tests for changes in scale.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect", help="test a CSV series for a change in scale")
    d.add_argument("csv", help="input file, or - for stdin")
    d.add_argument("--estimator", choices=ESTIMATOR_CHOICES, default="gmd")
    d.add_argument("--alpha", type=float, default=0.8, help="quantile level for --estimator qn")
    d.add_argument("--kernel", choices=("quartic", "bartlett"), default="quartic")
    d.add_argument("--bandwidth", type=float, help="fixed HAC bandwidth (default 2 n^(1/3))")
    d.add_argument("--andrews-rho", type=float, help="AR(1) coefficient for the plug-in bandwidth")
    d.add_argument("--level", type=float, default=0.05)
    d.add_argument("--column", help="value column, by index or header name")
    d.add_argument("--label-column", help="label column, by index or header name")
    d.add_argument("--log-returns", action="store_true", help="use log(x[i+1] / x[i])")
    d.add_argument("--format", choices=("json", "csv"), default="json")
    d.add_argument("--exit-on-reject", action="store_true", help="exit with status 2 on rejection")
    d.set_defaults(func=cmd_detect)

    s = sub.add_parser("simulate", help="run a Monte Carlo campaign from a TOML config")
    s.add_argument("config")
    s.add_argument("--out-csv")
    s.add_argument("--out-json")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--seed", type=int, help="override base_seed from the config")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("are", help="ARE of Q_n^alpha relative to the scale MLE")
    a.add_argument("--dist", default="normal", help="normal, laplace, cauchy, t3, N(0,2), ...")
    a.add_argument("--alpha-grid", default="0.01:0.99:0.005")
    a.set_defaults(func=cmd_are)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "detect" and args.estimator != "qn" and "--alpha" in (argv or sys.argv):
        print("warning: --alpha only applies to --estimator qn", file=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
