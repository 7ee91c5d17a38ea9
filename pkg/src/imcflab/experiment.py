"""Run a configured flow, verify it, and write its artifacts."""
from __future__ import annotations

import csv
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import verify as V
from .config import ConfigError, ExperimentConfig, dump_config, load_config, parse_config
from .flow import FlowTrace, run_flow
from .traceio import TraceSink, write_nodes, write_report, write_trace

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CHECKS, EXIT_HALTED = 0, 1, 2
LIMIT_MIN_RADIUS = 7.0


def _entry(fn, *args, **kw):
    """Run one report; 'skipped' when the trace cannot support it."""
    try:
        rep = fn(*args, **kw)
    except V.VerificationError as exc:
        return {"status": "skipped", "reason": str(exc)}
    return rep


def run_checks(trace: FlowTrace, cfg: ExperimentConfig) -> dict:
    """All verification verdicts for a trace, keyed by check name."""
    out: dict = {}

    rep = _entry(V.barrier_report, trace, cfg.barrier_slack)
    out["barriers"] = rep if isinstance(rep, dict) else {**rep.to_dict(), "status": _ok(rep.passed)}

    rep = _entry(V.geroch_report, trace, None, cfg.tol_geroch)
    if not isinstance(rep, dict):
        d = rep.to_dict()
        summary = {k: d[k] for k in ("min_defect", "raw_min_increment", "tol")}
        summary["max_closure"] = float(np.max(np.abs(d["closure"])))
        rep = {**summary, "status": _ok(rep.passed)}
    out["geroch"] = rep

    rep = _entry(V.starshape_report, trace, cfg.eta)
    if not isinstance(rep, dict):
        status = _ok(rep.nondecreasing_after) if rep.reached else "skipped"
        rep = {**rep.to_dict(), "status": status}
    out["starshape"] = rep

    rep = V.umbilicity_decay_report(trace)
    out["umbilicity"] = {**rep.to_dict(), "status": _ok(rep.passed)}

    rep = V.asymptotic_roundness_report(trace)
    out["roundness"] = {**rep.to_dict(), "status": "diagnostic"}

    rep = _entry(V.stampacchia_report, trace, cfg.stampacchia_t0, cfg.delta0)
    out["stampacchia"] = rep if isinstance(rep, dict) else {**rep.to_dict(), "status": _ok(rep.passed)}

    rep = _entry(V.residual_report, trace)
    out["residuals"] = rep if isinstance(rep, dict) else {**rep.to_dict(), "status": _ok(rep.passed)}

    metric = trace.metric
    if metric.mass > 0 and trace.final.r_max >= LIMIT_MIN_RADIUS:
        rep = _entry(V.limit_report, trace, metric, cfg.limit_tol)
        if not isinstance(rep, dict):
            d = rep.to_dict()
            for k in ("t", "hawking_mass", "functional", "f_final"):
                d.pop(k)
            rep = {**d, "status": rep.theorem_1_2}
        out["limit"] = rep
    else:
        out["limit"] = {"status": "skipped", "reason": "needs m > 0 and r_max >= 7"}
    return out


def _ok(flag: bool) -> str:
    return "pass" if flag else "fail"


def checks_passed(checks: dict) -> bool:
    return all(c.get("status") != "fail" for c in checks.values())


@dataclass
class RunResult:
    exit_code: int
    trace: FlowTrace
    report: dict
    out_dir: Path


def run_experiment(cfg: ExperimentConfig, out_dir=None, *, seed: int | None = None) -> RunResult:
    """Run, verify and write trace.csv, report.json, run.log, config.ini, trace_nodes.npz."""
    out_dir = Path(out_dir if out_dir is not None else Path(cfg.out) / cfg.name)
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out_dir / "run.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("imcflab")
    root.addHandler(handler)
    prev_level = root.level
    root.setLevel(logging.INFO)
    try:
        (out_dir / "config.ini").write_text(dump_config(cfg), encoding="utf-8")
        log.info("run %s: family=%s m=%g n_theta=%d n_phi=%d", cfg.name, cfg.family, cfg.mass, cfg.n_theta, cfg.n_phi)
        start = time.perf_counter()
        initial = cfg.initial_surface()
        with TraceSink(out_dir / "trace.csv") as sink:
            trace = run_flow(initial, cfg.t_end, cfg.flow_settings(), [sink])
        elapsed = time.perf_counter() - start
        write_trace(trace, out_dir / "trace.csv")
        if cfg.save_nodes:
            write_nodes(trace, out_dir / "trace_nodes.npz")
        log.info("%d steps, %d samples, t=%.6g, r_max=%.6g in %.2fs", trace.steps, len(trace), trace.final.t, trace.final.r_max, elapsed)
        checks = run_checks(trace, cfg)
        for name, c in checks.items():
            log.info("check %-12s %s", name, c.get("status"))
        if trace.halt_reason:
            log.warning("halted: %s", trace.halt_reason)
            code = EXIT_HALTED
        else:
            code = EXIT_OK if checks_passed(checks) else EXIT_CHECKS
        report = {
            "name": cfg.name,
            "exit_code": code,
            "halt_reason": trace.halt_reason,
            "seed": cfg.seed if seed is None else seed,
            "steps": trace.steps,
            "samples": len(trace),
            "t_final": trace.final.t,
            "r_max_final": trace.final.r_max,
            "m_H_final": trace.final.hawking_mass,
            "checks": checks,
        }
        write_report(report, out_dir / "report.json")
        return RunResult(code, trace, report, out_dir)
    finally:
        root.removeHandler(handler)
        root.setLevel(prev_level)
        handler.close()


# -- sweeps --------------------------------------------------------------------

SWEEP_KEYS = ("mass", "q_amplitude", "rho0", "eccentricity")
SUMMARY_COLUMNS = (
    "cell",
    "mass",
    "q_amplitude",
    "rho0",
    "eccentricity",
    "status",
    "exit_code",
    "halt_reason",
    "t_final",
    "r_max_final",
    "m_H_final",
    "m_H_limit",
    "functional_limit",
    "theorem_1_2",
    "error",
)


def parse_sweep_grid(text: str) -> list[dict]:
    """``key = v1, v2, ...`` lines over {mass, q_amplitude, rho0, eccentricity}; cartesian product."""
    axes = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"grid line {n}: expected key = values")
        key, vals = (p.strip() for p in line.split("=", 1))
        if key not in SWEEP_KEYS:
            raise ValueError(f"grid line {n}: unknown key {key!r}")
        axes[key] = [float(v) for v in vals.replace(",", " ").split()]
    if not axes or any(not v for v in axes.values()):
        return []
    keys = list(axes)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]


def _cell_config(template: ExperimentConfig, cell: dict) -> ExperimentConfig:
    kw = {k: v for k, v in cell.items() if k in ("mass", "q_amplitude", "rho0")}
    if "eccentricity" in cell:
        kw["cos_modes"] = (cell["eccentricity"],) if cell["eccentricity"] else ()
    text = dump_config(template.with_overrides(**kw))
    return parse_config(text)  # re-validate the combination


def _run_cell(args):
    index, template, cell, root = args
    row = {k: cell.get(k, "") for k in SWEEP_KEYS}
    row.update(cell=index, status="error", exit_code="", halt_reason="", error="")
    try:
        cfg = _cell_config(template, cell).with_overrides(name=f"cell_{index:03d}")
        res = run_experiment(cfg, Path(root) / cfg.name)
    except (ConfigError, ValueError, ArithmeticError) as exc:
        row["error"] = str(exc).replace("\n", " ")
        return row
    limit = res.report["checks"].get("limit", {})
    row.update(
        status="ok" if res.exit_code == EXIT_OK else ("halted" if res.exit_code == EXIT_HALTED else "failed"),
        exit_code=res.exit_code,
        halt_reason=res.trace.halt_reason or "",
        t_final=res.trace.final.t,
        r_max_final=res.trace.final.r_max,
        m_H_final=res.trace.final.hawking_mass,
        m_H_limit=limit.get("hawking_limit", ""),
        functional_limit=limit.get("functional_limit", ""),
        theorem_1_2=limit.get("theorem_1_2", ""),
    )
    return row


def sweep(template: ExperimentConfig, cells: list[dict], out_dir, workers: int | None = None) -> list[dict]:
    """Run every cell in its own directory; failures are recorded, not raised."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = [(i, template, c, str(out_dir)) for i, c in enumerate(cells)]
    if not jobs:
        rows = []
    elif workers == 1 or len(jobs) == 1:
        rows = [_run_cell(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    with open(out_dir / "summary.csv", "w", encoding="ascii", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (("%.17g" % v) if isinstance(v, float) and math.isfinite(v) else v) for k, v in r.items()})
    return rows


def sweep_exit_code(rows: list[dict]) -> int:
    return EXIT_OK if all(r["status"] == "ok" for r in rows) else EXIT_CHECKS


__all__ = [
    "EXIT_CHECKS",
    "EXIT_HALTED",
    "EXIT_OK",
    "RunResult",
    "checks_passed",
    "load_config",
    "parse_sweep_grid",
    "run_checks",
    "run_experiment",
    "sweep",
    "sweep_exit_code",
]
