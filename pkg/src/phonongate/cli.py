"""Command-line runner: ``phonongate run <config> [--out DIR] [--strict]``.

Config files are INI-style::

    [run]
    scenario = fig2
    output = out/fig2

    [params]
    alpha = 1/40
    nbar = 2

    [grid]
    n_points = 401

Values may be numbers (fractions such as ``1/40`` allowed), strings or
comma-separated lists.  Exit codes: 0 all checks passed, 1 a tolerance
check failed (or a warning under ``--strict``), 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .scenarios import SCENARIOS, RunConfig, ScenarioResult, run_scenario

OUT_ENV = "PHONONGATE_OUT"
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _scalar(text: str):
    text = text.strip()
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_value(text: str):
    """Number, string, or list of those when ``text`` contains commas."""
    if "," in text:
        return [_scalar(part) for part in text.split(",") if part.strip()]
    return _scalar(text)


def load_config(path: str | os.PathLike) -> RunConfig:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep Gamma and gamma apart
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    if not parser.has_section("run") or "scenario" not in parser["run"]:
        raise ConfigError("config needs a [run] section with a scenario key")
    run = parser["run"]
    scenario = run["scenario"].strip()
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {sorted(SCENARIOS)}")
    params = {k: parse_value(v) for k, v in parser["params"].items()} if parser.has_section("params") else {}
    grid = {k: parse_value(v) for k, v in parser["grid"].items()} if parser.has_section("grid") else {}
    for k, v in grid.items():
        if isinstance(v, list) and not v:
            raise ConfigError(f"grid {k!r} is empty")
    try:
        seed = int(run.get("seed", "0"))
    except ValueError:
        raise ConfigError("seed must be an integer") from None
    return RunConfig(scenario, params, grid, run.get("output"), seed)


def write_csv(path: Path, names: list[str], data: np.ndarray) -> None:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")
        for row in data:
            fh.write(",".join("%.17g" % x for x in row) + "\n")


def format_report(cfg: RunConfig, res: ScenarioResult, strict: bool) -> str:
    lines = [f"scenario: {cfg.scenario}"]
    for section, values in (("params", cfg.params), ("grid", cfg.grid)):
        for k in sorted(values):
            lines.append(f"{section}.{k} = {values[k]}")
    lines.append("")
    lines.append("checks:")
    for c in res.checks:
        status = "PASS" if c.passed else "FAIL"
        if c.relation == "info":
            lines.append(f"  {status} {c.name}: value={c.value:.6g} (reported, no tolerance)")
        else:
            lines.append(f"  {status} {c.name}: value={c.value:.6g} {c.relation} {c.tolerance:.3g}")
    if res.warnings:
        lines.append("")
        lines.append("warnings:" + (" (strict: counted as failures)" if strict else ""))
        lines.extend(f"  {w}" for w in res.warnings)
    if res.notes:
        lines.append("")
        lines.append("notes:")
        lines.extend(f"  {n}" for n in res.notes)
    ok = res.passed and not (strict and res.warnings)
    lines.append("")
    lines.append(f"result: {'PASS' if ok else 'FAIL'} ({sum(c.passed for c in res.checks)}/{len(res.checks)} checks)")
    return "\n".join(lines) + "\n"


def run(config_path: str, out: str | None = None, strict: bool = False) -> int:
    """Run one config file; returns the process exit code."""
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir = Path(out or os.environ.get(OUT_ENV) or cfg.output or f"phonongate-out/{cfg.scenario}")
    try:
        res = run_scenario(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, (cols, data) in res.tables.items():
        write_csv(out_dir / f"{name}.csv", cols, data)
    report = format_report(cfg, res, strict)
    (out_dir / "report.txt").write_text(report)
    print(report, end="")
    ok = res.passed and not (strict and res.warnings)
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phonongate", description="Run phonon-gate scenarios.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario config file")
    p_run.add_argument("config", help="path to an INI-style run config")
    p_run.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the config)")
    p_run.add_argument("--strict", action="store_true", help="treat warnings as failures")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    return run(args.config, args.out, args.strict)


if __name__ == "__main__":
    sys.exit(main())
