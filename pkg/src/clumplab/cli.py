"""Command-line front end: ``clump-lab <command> [options]``.

Every run writes into its own output directory:

    manifest.txt   resolved parameters and package version (``key = value``)
    *.csv          data, '#'-prefixed ``key = value`` metadata, comma separated
    anchors.txt    PASS/FAIL lines for the quantitative checks of the run
    *.png          figures rendered from the same data (skip with --no-figures)

Exit codes: 0 success, 1 usage error, 2 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .kernels import KERNELS

log = logging.getLogger("clumplab")

COMMANDS = ("steady", "bessel", "limit", "evolve", "particles", "sweep", "preset")
PRESETS = ("fig1", "fig2", "fig3", "fig4", "fig5", "fig6")


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    kernel: str | None = None
    m: float | None = None
    nu: float | None = None
    L: float | None = None
    seed: int | None = None
    out: Path = Path("runs")
    figures: bool = True
    params: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.params.get(key, default)

    def manifest(self) -> dict:
        rows = {"version": __version__, "command": self.command}
        for key in ("kernel", "m", "nu", "L", "seed"):
            val = getattr(self, key)
            if val is not None:
                rows[key] = val
        rows.update({k: v for k, v in sorted(self.params.items()) if v is not None})
        return rows


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from exc


def _kernel_name(text: str) -> str:
    if text not in KERNELS:
        raise argparse.ArgumentTypeError(
            f"unknown kernel {text!r}; choose from {', '.join(sorted(KERNELS))}")
    return text


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    root = _Parser(prog="clump-lab", description="Aggregation-diffusion steady states, "
                   "evolution and particle simulations.")
    root.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    root.add_argument("--log-level", default="INFO",
                      choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = root.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", default=S, help="key = value file; flags take precedence")
        p.add_argument("--out", default=S, help="output directory (or .csv path)")
        p.add_argument("--no-figures", dest="figures", action="store_false", default=S)
        return p

    def physics(p, nu=True):
        p.add_argument("--kernel", type=_kernel_name, default=S)
        p.add_argument("--m", type=float, default=S)
        if nu:
            p.add_argument("--nu", type=float, default=S)

    p = common(sub.add_parser("steady", help="steady state by eigenvalue iteration",
                              argument_default=S))
    physics(p)
    p.add_argument("--L", type=float)
    p.add_argument("--n-cells", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)

    p = common(sub.add_parser("bessel", help="Bessel-kernel clump from the ODE reduction",
                              argument_default=S))
    p.add_argument("--m", type=float)
    p.add_argument("--nubar", type=float)
    p.add_argument("--n-cells", type=int)
    p.add_argument("--n-scan", type=int)

    p = common(sub.add_parser("limit", help="infinite-support limit profile (1 < m < 2)",
                              argument_default=S))
    physics(p, nu=False)
    p.add_argument("--half-width", type=float)
    p.add_argument("--n-points", type=int)

    p = common(sub.add_parser("evolve", help="finite-volume evolution", argument_default=S))
    physics(p)
    p.add_argument("--half-width", type=float)
    p.add_argument("--n-cells", type=int)
    p.add_argument("--t-end", type=float)
    p.add_argument("--init", choices=["random", "gaussian", "barenblatt"])
    p.add_argument("--seed", type=int)
    p.add_argument("--coarse-n", type=int)
    p.add_argument("--envelope-sigma", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--snapshots", type=_floats)
    p.add_argument("--cfl", type=float)
    p.add_argument("--energy-every", type=int)
    p.add_argument("--flat-threshold", type=float)
    p.add_argument("--drop-threshold", type=float)

    p = common(sub.add_parser("particles", help="particle system", argument_default=S))
    physics(p)
    p.add_argument("--n", type=int)
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--sigma2", type=float)
    p.add_argument("--method", choices=["rk3", "bdf"])
    p.add_argument("--snapshots", type=_floats)

    p = common(sub.add_parser("sweep", help="nu(L) curves for several m", argument_default=S))
    p.add_argument("--kernel", type=_kernel_name)
    p.add_argument("--m-list", type=_floats)
    p.add_argument("--L-list", type=_floats)
    p.add_argument("--cells-per-unit", type=int)
    p.add_argument("--workers", type=int)

    p = common(sub.add_parser("preset", help="reproduce the data behind a figure",
                              argument_default=S))
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--quick", action="store_true",
                   help="reduced resolution and horizon (smoke runs)")
    return root


DEFAULTS = {
    "steady": {"kernel": "gaussian", "n_cells": 800, "tol": 1e-8, "max_iter": 20000},
    "bessel": {"m": 3.0, "nubar": 0.3, "n_cells": 1600, "n_scan": 100},
    "limit": {"kernel": "gaussian", "m": 1.5, "half_width": 10.0, "n_points": 801},
    "evolve": {"kernel": "bessel", "m": 4.0, "nu": 0.6, "half_width": 30.0, "n_cells": 1200,
               "t_end": 100.0, "init": "random", "seed": 0, "coarse_n": 30,
               "envelope_sigma": 4.0, "sigma2": 1.0, "snapshots": None, "cfl": 0.4,
               "energy_every": 10, "flat_threshold": None, "drop_threshold": None},
    "particles": {"kernel": "bessel", "m": 3.0, "nu": 0.4, "n": 200, "t_end": 200.0,
                  "dt": None, "sigma2": 1.0, "method": "bdf", "snapshots": None},
    "sweep": {"kernel": "gaussian", "m_list": [1.5, 2.0, 2.5], "L_list": [1, 2, 3, 4, 5],
              "cells_per_unit": 80, "workers": None},
    "preset": {"quick": False},
}


def read_config_file(path) -> list[str]:
    """Turn a ``key = value`` file into argv tokens for the same parser."""
    tokens = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, val = key.strip().replace("_", "-"), val.strip()
        if key == "name":
            tokens.insert(0, val)
        elif key == "figures":
            if val.lower() in ("0", "false", "no", "off"):
                tokens.append("--no-figures")
        else:
            tokens += [f"--{key}", val]
    return tokens


def parse_config(argv=None) -> RunConfig:
    """Resolve defaults, an optional config file and flags (flags win)."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    ns = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, ns.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(ns).items() if k not in ("log_level",)}
    command = flags.pop("command")
    resolved = dict(DEFAULTS[command])
    cfg_path = flags.pop("config", None)
    if cfg_path is not None:
        file_tokens = read_config_file(cfg_path)
        positional = []
        if command == "preset":
            # the preset name on the command line replaces one given in the file
            if file_tokens[:1] and not file_tokens[0].startswith("--"):
                file_tokens = file_tokens[1:]
            positional = [flags["name"]]
        file_ns = parser.parse_args([command] + positional + file_tokens)
        file_vals = {k: v for k, v in vars(file_ns).items()
                     if k not in ("log_level", "command", "config")}
        for key, val in file_vals.items():
            if key in flags and flags[key] != val and key != "name":
                log.warning("%s set in both %s and on the command line; using the flag value %r",
                            key, cfg_path, flags[key])
        resolved.update(file_vals)
    resolved.update(flags)
    return _validate(command, resolved)


def _validate(command: str, p: dict) -> RunConfig:
    m = p.get("m")
    if m is not None and not m > 1.0:
        raise UsageError(f"m must exceed 1 (got {m})")
    for key in ("nu", "nubar", "L", "t_end", "half_width", "sigma2"):
        val = p.get(key)
        if val is not None and not val > 0:
            raise UsageError(f"{key} must be positive (got {val})")
    for key in ("n_cells", "n", "n_points", "n_scan", "max_iter", "coarse_n", "cells_per_unit"):
        val = p.get(key)
        if val is not None and val < 1:
            raise UsageError(f"{key} must be a positive integer (got {val})")
    if command == "steady":
        has_nu, has_L = p.get("nu") is not None, p.get("L") is not None
        if has_nu == has_L:
            raise UsageError("steady needs exactly one of --nu and --L")
        if p.get("m") is None:
            raise UsageError("steady needs --m")
    if command == "limit" and not 1.0 < p["m"] < 2.0:
        raise UsageError("limit profiles exist only for 1 < m < 2")
    if command == "limit" and p["kernel"] not in ("gaussian", "bessel"):
        raise UsageError("limit profiles are available for the gaussian and bessel kernels")
    if command == "particles" and p["n"] < 3:
        raise UsageError("need at least three particles")
    if command == "sweep" and any(m <= 1 for m in p["m_list"]):
        raise UsageError("every m in --m-list must exceed 1")

    default_out = Path("runs") / (p.get("name") or command)
    out = Path(p.pop("out", None) or default_out)
    figures = p.pop("figures", True)
    core = {k: p.pop(k, None) for k in ("kernel", "m", "nu", "L", "seed")}
    return RunConfig(command=command, out=out, figures=figures, params=p, **core)


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("CLUMP_LAB_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            log.warning("ignoring non-integer CLUMP_LAB_THREADS=%r", cap)
    return max(1, n)


def main(argv=None) -> int:
    from .closed_form import InfeasibleParameters, NoCompactSteadyState
    from .evolution import StepFailure
    from .experiments import run
    from .particles import OrderingViolation, StiffnessFailure
    from .steady import DegenerateInputError, SolverError

    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        print(f"clump-lab: error: {exc}", file=sys.stderr)
        return 1
    try:
        out = run(cfg)
    except (SolverError, DegenerateInputError, NoCompactSteadyState, InfeasibleParameters,
            StepFailure, StiffnessFailure, OrderingViolation, ArithmeticError) as exc:
        log.error("solver failure: %s", exc)
        return 2
    except UsageError as exc:
        print(f"clump-lab: error: {exc}", file=sys.stderr)
        return 1
    log.info("outputs in %s", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
