"""Command-line front end.

Usage:
    ensemble-lab list
    ensemble-lab validate <experiment> [flags]
    ensemble-lab <experiment> [--config FILE] [flags] [--out CSV] [--summary-out JSON]

Experiments are addressed by hyphenated ids (e.g. ``paramagnet-converge``).
Values come from an optional TOML config file (one section per experiment)
with command-line flags taking precedence.  Exit codes: 0 success, 1 invalid
configuration (the offending field is named), 2 runtime failure.  The
environment variable ENSEMBLE_LAB_THREADS caps row-level parallelism.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import experiments
from .errors import EnsembleLabError

__all__ = ["main", "main_entry", "validate", "parse_n_grid"]

_EXPERIMENTS = {eid.replace("_", "-"): eid for eid in experiments.EXPERIMENT_IDS}

# flag name -> (type, which experiments use it)
_PARAM_FLAGS = {
    "m": float,
    "mu": float,
    "rho": float,
    "J": float,
    "h": float,
    "beta": float,
    "epsilon": float,
    "samples": int,
    "trials": int,
    "p": float,
    "budget_cap": float,
}
_KNOWN_KEYS = set(_PARAM_FLAGS) | {"N", "seed", "out", "summary_out"}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exit code 1 (invalid config)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"invalid config: {message}", file=sys.stderr)
        raise SystemExit(1)


def parse_n_grid(text: str) -> tuple[int, ...]:
    """Parse '100,1000,10000' or geometric 'start:stop:factor' shorthand."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("geometric grid must be start:stop:factor")
        start, stop, factor = int(parts[0]), int(parts[1]), float(parts[2])
        if start < 1 or stop < start or factor <= 1:
            raise ValueError("need 1 <= start <= stop and factor > 1")
        grid = []
        value = float(start)
        while round(value) <= stop:
            grid.append(int(round(value)))
            value *= factor
        return tuple(grid)
    return tuple(int(tok) for tok in text.split(",") if tok)


def _build_parser() -> _Parser:
    parser = _Parser(prog="ensemble-lab", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    sub.add_parser("list", help="print the available experiment ids")

    def add_experiment_flags(p):
        p.add_argument("--config", help="TOML config file")
        p.add_argument("--N", dest="N", help="N grid: comma list or start:stop:factor")
        for flag, typ in _PARAM_FLAGS.items():
            p.add_argument(f"--{flag}", type=typ)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="CSV output path")
        p.add_argument("--summary-out", dest="summary_out", help="JSON summary path")
        p.add_argument("-v", "--verbose", action="count", default=0)

    val = sub.add_parser("validate", help="check a configuration without running")
    val.add_argument("experiment", choices=sorted(_EXPERIMENTS))
    add_experiment_flags(val)

    for name in sorted(_EXPERIMENTS):
        p = sub.add_parser(name, help=f"run the {name} experiment")
        add_experiment_flags(p)
    return parser


def _load_config(args, experiment_id: str) -> dict:
    """Merge config-file section and flags (flags win); reject unknown keys."""
    merged: dict = {}
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            data = tomllib.load(fh)
        if experiment_id in data:
            section = data[experiment_id]
        elif not any(isinstance(v, dict) for v in data.values()):
            section = data  # flat file without sections
        else:
            section = {}
        if not isinstance(section, dict):
            raise ValueError(f"section [{experiment_id}] must be a table")
        for key, value in section.items():
            if key not in _KNOWN_KEYS:
                raise ValueError(f"unknown config key {key!r} in [{experiment_id}]")
            merged[key] = value
    for key in _KNOWN_KEYS:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            merged[key] = flag_val
    return merged


def validate(experiment_id: str, config: dict) -> list[str]:
    """Diagnostics for a configuration; empty iff run() cannot hit a
    precondition error.  Each entry names the offending field."""
    diags: list[str] = []
    grid = config.get("N")
    if isinstance(grid, str):
        try:
            grid = parse_n_grid(grid)
        except ValueError as exc:
            return [f"N: {exc}"]
    if grid is not None:
        grid = tuple(int(n) for n in grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            diags.append("N: grid must be strictly increasing")
        if any(n < 1 for n in grid):
            diags.append("N: entries must be positive")

    m = config.get("m")
    rho = float(config.get("rho", 1.0))
    J = float(config.get("J", 1.0))
    h = float(config.get("h", 0.0 if experiment_id != "dominance_decay" else 1.0))
    if rho <= 0:
        diags.append("rho: must be positive")
    if J <= 0:
        diags.append("J: must be positive")

    if experiment_id in ("paramagnet_converge", "bound_compare"):
        if m is not None and not (-1.0 < float(m) < 1.0):
            diags.append("m outside (-1,1)")
    if experiment_id in ("spherical_mag_converge", "spherical_energy_converge",
                         "gc_direct_coupling", "dominance_decay"):
        if grid is not None and any(n < 5 for n in grid):
            diags.append("N: N >= 5 required for the spherical model")
        if m is not None and rho > 0 and float(m) ** 2 >= rho:
            diags.append("m: m^2 must be strictly below rho")
    if experiment_id == "dominance_decay" and rho > 0 and J > 0:
        eps = float(config.get("epsilon", -0.25))
        if eps > h * h / (2.0 * J):
            diags.append("epsilon: exceeds h^2/(2J), no real magnetization branches")
        else:
            root = math.sqrt(h * h / (J * J) - 2.0 * eps / J)
            if abs(abs(h) / J - root) >= math.sqrt(rho):
                diags.append(
                    "epsilon: outside the admissible open energy window "
                    "(every branch has m^2 >= rho; note the left endpoint "
                    "-rho*J/2 is excluded)"
                )
    if experiment_id == "spherical_energy_converge":
        beta = float(config.get("beta", 2.0))
        if beta <= 0:
            diags.append("beta: must be positive")
    if experiment_id == "gc_direct_coupling":
        samples = int(config.get("samples", 4000))
        if samples < 2:
            diags.append("samples: must be >= 2")
    if experiment_id == "ot_oracle_check":
        if grid is not None and any(n > 8 for n in grid):
            diags.append("N: oracle check enumerates 2^N support; N <= 8 required")
        p = float(config.get("p", 2.0))
        if p <= 1:
            diags.append("p: must be > 1 (moment bound requires a finite dual exponent)")
    return diags


def _make_plan(experiment_id: str, config: dict) -> experiments.ExperimentPlan:
    grid = config.get("N")
    if isinstance(grid, str):
        grid = parse_n_grid(grid)
    params = {k: v for k, v in config.items()
              if k in _PARAM_FLAGS and v is not None}
    threads = int(os.environ.get("ENSEMBLE_LAB_THREADS", "1") or 1)
    return experiments.ExperimentPlan(
        experiment_id=experiment_id,
        N_grid=tuple(int(n) for n in grid) if grid else (),
        params=params,
        seed=int(config.get("seed", 0)),
        threads=max(threads, 1),
        out=config.get("out"),
        summary_out=config.get("summary_out"),
    )


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    if args.subcommand == "list":
        for name in sorted(_EXPERIMENTS):
            print(name)
        return 0

    if args.subcommand == "validate":
        experiment_id = _EXPERIMENTS[args.experiment]
    else:
        experiment_id = _EXPERIMENTS[args.subcommand]

    try:
        config = _load_config(args, experiment_id)
    except (OSError, ValueError, tomllib.TOMLDecodeError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 1

    diags = validate(experiment_id, config)
    if args.subcommand == "validate":
        for d in diags:
            print(d)
        if not diags:
            print("ok")
        return 1 if diags else 0
    if diags:
        for d in diags:
            print(f"invalid config: {d}", file=sys.stderr)
        return 1

    try:
        plan = _make_plan(experiment_id, config)
        result = experiments.run(plan)
    except EnsembleLabError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2

    if getattr(args, "verbose", 0):
        for row in result.rows:
            print(f"N={row.N} gap={row.gap:.6g} bound_coupling="
                  f"{row.bound_coupling:.6g} se={row.se:.3g}")
    slope = "n/a" if result.slope is None else f"{result.slope:.4f}"
    print(f"{experiment_id}: rows={len(result.rows)} slope={slope} "
          f"pass={result.passed} ({result.notes})")
    return 0


def main_entry() -> None:
    sys.exit(main())
