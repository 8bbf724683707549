"""``one-lap`` command line: solve, oracle, certify and sweep modes.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 certificate below thresholds (only with ``--strict``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import List, Optional, Sequence

from .certificate import DegenerateFieldError, build_certificate
from .cheeger import ConvexPolygon, cheeger_constant, cheeger_constant_disk, read_polygon
from .eigenset import ratio_sweep
from .energy import PenaltyParams, sigma_field
from .fieldio import IterationLog, atomic_write, dump_json, read_field, write_grid
from .grid import Disk, Rectangle, rasterize
from .solver import SolverError, continuation_solve, default_schedule, field_scale

log = logging.getLogger("onelap")

MODES = ("solve", "oracle", "certify", "sweep")
SHAPES = ("disk", "square", "rectangle", "polygon")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SOLVER = 2
EXIT_CERTIFICATE = 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    mode: str = "solve"
    shape: str = "disk"
    radius: float = 1.0
    side: float = 1.0
    width: float = 2.0
    height: float = 1.0
    polygon: Optional[str] = None
    resolution: float = 64.0
    eps_start: float = 0.5
    eps_factor: float = 0.5
    eps_floor: float = 0.05
    n_start: float = 8.0
    n_factor: float = 4.0
    n_stages: int = 4
    delta_unit: str = "field"
    cap: int = 5000
    tol: float = 1e-6
    seed: int = 0
    method: str = "lbfgsb"
    tau: Optional[float] = None
    sweep_levels: int = 64
    output: str = "run"
    input: Optional[str] = None
    strict: bool = False

    @property
    def final_n(self) -> float:
        return self.n_start * self.n_factor ** (self.n_stages - 1)


def _check(cond, flag, msg):
    if not cond:
        raise ConfigError(f"--{flag.replace('_', '-')}: {msg}")


def validate(cfg: RunConfig) -> RunConfig:
    _check(cfg.mode in MODES, "mode", f"must be one of {', '.join(MODES)}")
    _check(cfg.shape in SHAPES, "shape", f"must be one of {', '.join(SHAPES)}")
    for name in ("radius", "side", "width", "height"):
        _check(getattr(cfg, name) > 0, name, "must be positive")
    if cfg.shape == "polygon":
        _check(cfg.polygon is not None, "polygon", "a vertex file is required for --shape polygon")
        _check(Path(cfg.polygon).is_file(), "polygon", f"cannot read {cfg.polygon}")
    if cfg.mode == "oracle":
        return cfg
    _check(cfg.resolution > 0 and math.isfinite(cfg.resolution), "resolution", "must be a positive number")
    _check(0 <= cfg.eps_start <= 1, "eps_start", "must lie in [0, 1]")
    _check(0 < cfg.eps_factor < 1, "eps_factor", "must lie in (0, 1)")
    _check(cfg.eps_floor > 0, "eps_floor", "must be positive")
    _check(cfg.n_start > 0, "n_start", "must be positive")
    _check(cfg.n_factor >= 1, "n_factor", "must be at least 1")
    _check(cfg.n_stages >= 1, "n_stages", "must be at least 1")
    _check(cfg.delta_unit in ("field", "absolute"), "delta_unit", "must be 'field' or 'absolute'")
    _check(cfg.cap >= 0, "cap", "must be non-negative")
    _check(cfg.tol > 0, "tol", "must be positive")
    _check(cfg.method in ("lbfgsb", "bb"), "method", "must be 'lbfgsb' or 'bb'")
    _check(cfg.tau is None or cfg.tau > 0, "tau", "must be positive")
    _check(cfg.sweep_levels >= 2, "sweep_levels", "must be at least 2")
    if cfg.mode in ("certify", "sweep"):
        _check(cfg.input is not None, "input", f"{cfg.mode} mode needs the directory of a solve run")
        _check(Path(cfg.input, "u.txt").is_file(), "input", f"no u.txt in {cfg.input}")
    return cfg


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _parser() -> argparse.ArgumentParser:
    d = RunConfig()
    p = _Parser(prog="one-lap", description="First eigenvalue of the 1-Laplacian on planar domains.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", help="JSON file of option values (flags override it)")
    p.add_argument("--print-config", action="store_true", help="echo the effective configuration")
    g = p.add_argument_group("domain")
    g.add_argument("--shape", choices=SHAPES)
    g.add_argument("--radius", type=float, help=f"disk radius (default {d.radius})")
    g.add_argument("--side", type=float, help=f"square side (default {d.side})")
    g.add_argument("--width", type=float, help=f"rectangle width (default {d.width})")
    g.add_argument("--height", type=float, help=f"rectangle height (default {d.height})")
    g.add_argument("--polygon", help="convex polygon file, one 'x y' per line")
    g.add_argument("--resolution", type=float, help=f"cells per unit length (default {d.resolution:g})")
    g = p.add_argument_group("continuation schedule")
    g.add_argument("--eps-start", type=float)
    g.add_argument("--eps-factor", type=float)
    g.add_argument("--eps-floor", type=float)
    g.add_argument("--n-start", type=float)
    g.add_argument("--n-factor", type=float)
    g.add_argument("--n-stages", type=int)
    g.add_argument("--delta-unit", choices=("field", "absolute"),
                   help="measure the smoothing in units of 1/(area h) or absolutely")
    g.add_argument("--cap", type=int, help="iteration cap per stage")
    g.add_argument("--tol", type=float, help="relative projected-gradient tolerance")
    g.add_argument("--method", choices=("lbfgsb", "bb"))
    g.add_argument("--seed", type=int)
    g = p.add_argument_group("output")
    g.add_argument("--tau", type=float, help="sign threshold (default 1e-3 max u)")
    g.add_argument("--sweep-levels", type=int)
    g.add_argument("--output", "-o", help="output directory")
    g.add_argument("--input", help="directory of an earlier solve run (certify, sweep)")
    g.add_argument("--strict", action="store_true", default=None,
                   help="exit 3 when the certificate misses its thresholds")
    g.add_argument("--verbose", "-v", action="store_true")
    return p


def parse_config(argv: Optional[Sequence[str]] = None):
    """Return ``(RunConfig, print_config, verbose)`` for an argument list."""
    args = _parser().parse_args(argv)
    known = {f.name for f in fields(RunConfig)}
    values = {}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"--config: cannot read {args.config}: {err}") from None
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"--config: unknown keys {', '.join(sorted(unknown))}")
        values.update(data)
    for name in known:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    values["mode"] = args.mode
    try:
        cfg = replace(RunConfig(), **values)
    except TypeError as err:
        raise ConfigError(str(err)) from None
    return validate(cfg), args.print_config, args.verbose


def make_shape(cfg: RunConfig):
    if cfg.shape == "disk":
        return Disk(cfg.radius)
    if cfg.shape == "square":
        return Rectangle(cfg.side, cfg.side)
    if cfg.shape == "rectangle":
        return Rectangle(cfg.width, cfg.height)
    try:
        return read_polygon(cfg.polygon)
    except (OSError, ValueError) as err:
        raise ConfigError(f"--polygon: {err}") from None


def oracle_value(shape) -> Optional[float]:
    if isinstance(shape, Disk):
        return cheeger_constant_disk(shape.radius)
    if isinstance(shape, Rectangle):
        shape = ConvexPolygon.rectangle(shape.a, shape.b)
    return cheeger_constant(shape).h


def make_schedule(cfg: RunConfig, dom):
    return default_schedule(
        eps_start=cfg.eps_start,
        eps_factor=cfg.eps_factor,
        eps_floor=cfg.eps_floor,
        n_start=cfg.n_start,
        n_factor=cfg.n_factor,
        n_stages=cfg.n_stages,
        cap=cfg.cap,
        tol=cfg.tol,
        scale=field_scale(dom) if cfg.delta_unit == "field" else 1.0,
    )


def _summary(cert, oracle) -> str:
    o = "n/a" if oracle is None else repr(oracle)
    return f"lambda_hat={cert.multiplier!r} rayleigh={cert.rayleigh!r} energy={cert.energy!r} oracle={o}"


def _run_oracle(cfg: RunConfig) -> int:
    shape = make_shape(cfg)
    if isinstance(shape, Disk):
        print(f"oracle={cheeger_constant_disk(shape.radius)!r} r={shape.radius / 2!r}")
        return EXIT_OK
    poly = shape if isinstance(shape, ConvexPolygon) else ConvexPolygon.rectangle(shape.a, shape.b)
    res = cheeger_constant(poly)
    print(f"oracle={res.h!r} r={res.r!r} area={res.area!r} perimeter={res.perimeter!r}")
    return EXIT_OK


def _certificate_exit(cfg, cert) -> int:
    if cfg.strict and not cert.passes():
        log.error("certificate below thresholds: %s", json.dumps(cert.to_dict(), sort_keys=True))
        return EXIT_CERTIFICATE
    return EXIT_OK


def _run_solve(cfg: RunConfig) -> int:
    shape = make_shape(cfg)
    dom = rasterize(shape, cfg.resolution)
    sched = make_schedule(cfg, dom)
    out = Path(cfg.output)
    itlog = IterationLog()
    try:
        rep = continuation_solve(dom, sched, seed=cfg.seed, iteration_log=itlog, method=cfg.method)
    except SolverError as err:
        atomic_write(out / "iterations.csv", itlog.text())
        log.error("solver failed: %s", err)
        return EXIT_SOLVER
    oracle = oracle_value(shape)
    cert = build_certificate(rep.u, rep.sigma, sched.stages[-1].n, cfg.tau)
    sweep = ratio_sweep(rep.u, cfg.sweep_levels)

    write_grid(out / "u.txt", rep.u.values, dom.h, dom.origin)
    write_grid(out / "sigma_x.txt", rep.sigma.vx, dom.h, dom.origin)
    write_grid(out / "sigma_y.txt", rep.sigma.vy, dom.h, dom.origin)
    atomic_write(out / "iterations.csv", itlog.text())
    atomic_write(out / "sweep.csv", sweep.to_csv())
    dump_json(
        out / "report.json",
        {
            "config": asdict(cfg),
            "certificate": cert.to_dict(),
            "oracle": oracle,
            "lambda": {"multiplier": rep.multiplier, "rayleigh": rep.rayleigh, "energy": rep.energy},
            "sweep": {"best_level": sweep.best_level, "best_ratio": sweep.best_ratio},
            "stages": [asdict(s) for s in rep.stages],
            "grid": {"nx": dom.nx, "ny": dom.ny, "h": dom.h, "cells": dom.cell_count},
        },
    )
    print(_summary(cert, oracle))
    return _certificate_exit(cfg, cert)


def _load_run(cfg: RunConfig):
    shape = make_shape(cfg)
    dom = rasterize(shape, cfg.resolution)
    try:
        u = read_field(Path(cfg.input, "u.txt"), dom)
    except ValueError as err:
        raise ConfigError(f"--input: {err}") from None
    return shape, dom, u


def _run_certify(cfg: RunConfig) -> int:
    shape, dom, u = _load_run(cfg)
    sched = make_schedule(cfg, dom)
    last = sched.stages[-1]
    sigma = sigma_field(u, PenaltyParams(last.eps, last.n, last.delta))
    cert = build_certificate(u, sigma, last.n, cfg.tau)
    dump_json(Path(cfg.output, "certificate.json"), cert.to_dict())
    print(_summary(cert, oracle_value(shape)))
    return _certificate_exit(cfg, cert)


def _run_sweep(cfg: RunConfig) -> int:
    _, _, u = _load_run(cfg)
    sweep = ratio_sweep(u, cfg.sweep_levels)
    atomic_write(Path(cfg.output, "sweep.csv"), sweep.to_csv())
    print(f"best_level={sweep.best_level!r} best_ratio={sweep.best_ratio!r}")
    return EXIT_OK


def run(cfg: RunConfig) -> int:
    handler = {
        "solve": _run_solve,
        "oracle": _run_oracle,
        "certify": _run_certify,
        "sweep": _run_sweep,
    }[cfg.mode]
    return handler(cfg)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        cfg, show, verbose = parse_config(argv)
    except ConfigError as err:
        print(f"one-lap: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if show:
        print(json.dumps(asdict(cfg), indent=2, sort_keys=True))
    try:
        return run(cfg)
    except ConfigError as err:
        print(f"one-lap: error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateFieldError as err:
        print(f"one-lap: error: {err}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as err:
        # invalid geometry (empty or disconnected rasterization, bad polygon)
        print(f"one-lap: error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
