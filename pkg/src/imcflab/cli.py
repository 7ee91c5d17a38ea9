"""Command line driver: ``imcflab run|sweep|verify|oracle``.

Exit codes: 0 all enabled checks pass, 1 a check failed (or bad input),
2 the flow halted.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import oracles
from .ambient import AmbientMetric
from .config import ConfigError, load_config
from .experiment import (
    EXIT_CHECKS,
    EXIT_OK,
    checks_passed,
    parse_sweep_grid,
    run_checks,
    run_experiment,
    sweep,
    sweep_exit_code,
)
from .flow import BarrierPair
from .grid import SphereGrid
from .surface import limit_functional
from .traceio import attach_nodes, read_trace

ENV_OUT = "IMCFLAB_OUT"


def _out_root(args, cfg_out: str | None = None) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(ENV_OUT):
        return Path(os.environ[ENV_OUT])
    return Path(cfg_out or "out")


def _say(args, text):
    if not args.quiet:
        print(text)


def _load(path):
    try:
        return load_config(path)
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return None
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return None


def cmd_run(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_CHECKS
    if args.seed is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    out_dir = _out_root(args, cfg.out) / cfg.name
    res = run_experiment(cfg, out_dir)
    _say(args, f"{cfg.name}: exit {res.exit_code}, {len(res.trace)} samples -> {out_dir}")
    for name, c in res.report["checks"].items():
        _say(args, f"  {name:<12} {c.get('status')}")
    return res.exit_code


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    if cfg is None:
        return EXIT_CHECKS
    try:
        cells = parse_sweep_grid(Path(args.grid).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        print(f"bad sweep grid: {exc}", file=sys.stderr)
        return EXIT_CHECKS
    out_dir = _out_root(args, cfg.out) / f"{cfg.name}_sweep"
    rows = sweep(cfg, cells, out_dir, workers=args.workers)
    for r in rows:
        _say(args, f"  cell {r['cell']:>3} {r['status']:<7} m_H_limit={r.get('m_H_limit', '')}")
    _say(args, f"{len(rows)} cells -> {out_dir / 'summary.csv'}")
    return sweep_exit_code(rows)


def cmd_verify(args) -> int:
    path = Path(args.trace)
    cfg_path = path.parent / "config.ini"
    if not cfg_path.exists():
        print(f"no config.ini next to {path}", file=sys.stderr)
        return EXIT_CHECKS
    cfg = _load(cfg_path)
    if cfg is None:
        return EXIT_CHECKS
    metric = cfg.metric()
    trace = read_trace(path, cfg.grid(), metric)
    nodes = path.parent / "trace_nodes.npz"
    if nodes.exists():
        attach_nodes(trace, nodes)
    checks = run_checks(trace, cfg)
    report = {"trace": str(path), "checks": checks}
    _say(args, json.dumps(report, indent=2, sort_keys=True, default=str))
    return EXIT_OK if checks_passed(checks) else EXIT_CHECKS


def cmd_oracle(args) -> int:
    hyp = AmbientMetric("hyperbolic")
    ads = AmbientMetric("ads_schwarzschild", args.mass)
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    grid = SphereGrid(32)
    f = sum(c * np.cos(k * grid.theta)[:, None] for k, c in enumerate(rng.normal(size=4) * 0.3, 1))
    pair = BarrierPair(args.rho0, args.rho0)
    values = {
        "hyperbolic_radius": oracles.hyperbolic_radius(args.rho0, args.t),
        "hyperbolic_area_ratio": float(np.exp(args.t)),
        "hyperbolic_mean_curvature": oracles.round_mean_curvature(hyp, args.rho0),
        "ads_round_radius": oracles.round_radius(ads, args.rho0, args.t),
        "ads_round_hawking_mass": oracles.round_hawking_mass(ads, args.rho0),
        "ads_round_hawking_mass_at_t": oracles.round_hawking_mass(ads, oracles.round_radius(ads, args.rho0, args.t)),
        "half_mass": 0.5 * args.mass,
        "barrier_plus": pair.rho_plus(args.t),
        "barrier_minus": pair.rho_minus(args.t),
        "random_limit_functional": limit_functional(f, grid),
    }
    inputs = {"rho0": args.rho0, "t": args.t, "mass": args.mass, "seed": args.seed}
    print(json.dumps({"inputs": inputs, "values": values}, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help=f"output root (default: ${ENV_OUT}, then the config's [output] dir)")
    common.add_argument("--seed", type=int, default=None, help="rng seed recorded in the report")
    common.add_argument("--quiet", action="store_true", help="no console summary")

    p = argparse.ArgumentParser(prog="imcflab", description="Inverse mean curvature flow lab")
    sub = p.add_subparsers(dest="verb", required=True)

    sp = sub.add_parser("run", parents=[common], help="run one configured experiment")
    sp.add_argument("config")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", parents=[common], help="run a parameter grid")
    sp.add_argument("config")
    sp.add_argument("grid", help="lines of 'key = v1, v2' over mass, q_amplitude, rho0, eccentricity")
    sp.add_argument("--workers", type=int, default=None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("verify", parents=[common], help="re-run checks on a stored trace.csv")
    sp.add_argument("trace")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("oracle", parents=[common], help="print closed-form reference values")
    sp.add_argument("--rho0", type=float, default=3.0)
    sp.add_argument("--t", type=float, default=4.0)
    sp.add_argument("--mass", type=float, default=2.0)
    sp.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    console = logging.StreamHandler()
    console.setLevel(logging.ERROR if args.quiet else logging.WARNING)
    console.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.getLogger().addHandler(console)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
