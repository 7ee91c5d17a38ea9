"""Experiment configuration: flat INI-style sections, validated in one pass.

Example::

    [metric]
    family = ads_schwarzschild
    mass = 2

    [initial]
    rho0 = 3
    cos_modes = 0.4

    [flow]
    t_end = 12
    r_stop = 8
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .ambient import FAMILIES, AmbientMetric, QSpec
from .flow import FlowSettings
from .grid import SphereGrid
from .surface import GraphSurface

class ConfigError(ValueError):
    """All violations found while parsing, not just the first."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("invalid config:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class ExperimentConfig:
    family: str = "hyperbolic"
    mass: float = 0.0
    q_amplitude: float = 0.0
    q_decay: float = 5.0
    q_modes: tuple[float, ...] = (0.0, 0.0, 1.0)
    n_theta: int = 64
    n_phi: int = 1
    rho0: float = 3.0
    cos_modes: tuple[float, ...] = ()  # u0 = rho0 + sum_k c_k cos(k theta)
    t_end: float = 4.0
    r_stop: float | None = None
    cfl: float = 0.2
    dt_max: float = 0.02
    h_floor: float = 1e-3
    sample_every: int = 1
    barrier_r0: float = 2.0
    tol_geroch: float | None = None
    limit_tol: float = 0.02
    barrier_slack: float = 0.01
    eta: float = 0.05
    delta0: float = 0.9
    stampacchia_t0: float = 0.0
    out: str = "out"
    seed: int = 0
    save_nodes: bool = True
    name: str = field(default="run")

    def metric(self) -> AmbientMetric:
        q = None
        if self.family == "perturbed":
            q = QSpec(self.q_amplitude, self.q_decay, self.q_modes)
        return AmbientMetric(self.family, self.mass, q)

    def grid(self) -> SphereGrid:
        return SphereGrid(self.n_theta, self.n_phi)

    def initial_surface(self) -> GraphSurface:
        modes = self.cos_modes

        def u0(T, P):
            u = np.full(T.shape, self.rho0)
            for k, c in enumerate(modes, start=1):
                u = u + c * np.cos(k * T)
            return u

        return GraphSurface.from_function(self.grid(), u0, self.metric())

    def flow_settings(self) -> FlowSettings:
        return FlowSettings(
            cfl=self.cfl,
            dt_max=self.dt_max,
            h_floor=self.h_floor,
            sample_every=self.sample_every,
            r_stop=self.r_stop,
            barrier_r0=self.barrier_r0,
        )

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **kw)


# section -> key -> (kind, (admissible range, predicate) or None)
_POS = ("> 0", lambda v: v > 0)
_NONNEG = (">= 0", lambda v: v >= 0)
_ANY = ("finite", lambda v: True)

_SCHEMA = {
    "metric": {
        "family": ("str", None),
        "mass": ("float", _NONNEG),
        "q_amplitude": ("float", _ANY),
        "q_decay": ("float", (">= 3", lambda v: v >= 3)),
        "q_modes": ("floats", None),
    },
    "grid": {
        "n_theta": ("int", (">= 16", lambda v: v >= 16)),
        "n_phi": ("int", ("1 or an even number >= 2", lambda v: v == 1 or (v >= 2 and v % 2 == 0))),
    },
    "initial": {
        "rho0": ("float", ("> 1", lambda v: v > 1)),
        "cos_modes": ("floats", None),
    },
    "flow": {
        "t_end": ("float", _NONNEG),
        "r_stop": ("float", _POS),
        "cfl": ("float", _POS),
        "dt_max": ("float", _POS),
        "h_floor": ("float", _POS),
        "sample_every": ("int", (">= 1", lambda v: v >= 1)),
        "barrier_r0": ("float", _POS),
    },
    "checks": {
        "tol_geroch": ("float", _POS),
        "limit_tol": ("float", ("in (0, 1)", lambda v: 0 < v < 1)),
        "barrier_slack": ("float", _NONNEG),
        "eta": ("float", ("in [0, 1]", lambda v: 0 <= v <= 1)),
        "delta0": ("float", ("in (0, 1]", lambda v: 0 < v <= 1)),
        "stampacchia_t0": ("float", _NONNEG),
    },
    "output": {
        "dir": ("str", None),
        "name": ("str", None),
        "seed": ("int", _NONNEG),
        "save_nodes": ("bool", None),
    },
}
_REQUIRED = [("metric", "family"), ("initial", "rho0"), ("flow", "t_end")]
_FIELD = {("output", "dir"): "out"}


def _convert(kind, raw):
    if kind == "str":
        return raw.strip()
    if kind == "int":
        v = float(raw)
        if v != int(v):
            raise ValueError("not an integer")
        return int(v)
    if kind == "float":
        v = float(raw)
        if not math.isfinite(v):
            raise ValueError("not finite")
        return v
    if kind == "floats":
        parts = [p for p in raw.replace(",", " ").split() if p]
        vals = tuple(float(p) for p in parts)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("not finite")
        return vals
    if kind == "bool":
        s = raw.strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ValueError("not a boolean")
    raise AssertionError(kind)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document.  Raises ConfigError listing every problem."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc}"]) from None
    problems: list[str] = []
    values: dict = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            problems.append(f"[{section}]: unknown section")
            continue
        for key, raw in cp.items(section):
            spec = _SCHEMA[section].get(key)
            if spec is None:
                problems.append(f"{section}.{key}: unknown key")
                continue
            kind, rule = spec
            try:
                v = _convert(kind, raw)
            except ValueError as exc:
                problems.append(f"{section}.{key}: cannot parse {raw!r} as {kind} ({exc})")
                continue
            if rule is not None and not rule[1](v):
                problems.append(f"{section}.{key}: {v!r} out of range, must be {rule[0]}")
                continue
            values[_FIELD.get((section, key), key)] = v
    for section, key in _REQUIRED:
        if not cp.has_option(section, key):
            problems.append(f"{section}.{key}: missing required key")

    family = values.get("family")
    if family is not None and family not in FAMILIES:
        problems.append(f"metric.family: {family!r} is not one of {', '.join(FAMILIES)}")
    if family == "ads_schwarzschild" and "mass" not in values:
        problems.append("metric.mass: mass required for ads_schwarzschild")
    if family == "ads_schwarzschild" and values.get("mass", 1.0) <= 0:
        problems.append("metric.mass: must be > 0 for ads_schwarzschild")
    if family == "hyperbolic" and values.get("mass", 0.0) != 0.0:
        problems.append("metric.mass: hyperbolic family has mass 0")
    q_keys = [k for k in ("q_amplitude", "q_decay", "q_modes") if k in values]
    if family == "perturbed":
        if "q_amplitude" not in values:
            problems.append("metric.q_amplitude: required for perturbed family")
        modes = values.get("q_modes", ExperimentConfig.q_modes)
        if modes and sum(abs(c) for c in modes) > 1.0 + 1e-12:
            problems.append("metric.q_modes: sum of |c_l| must be <= 1")
        if not modes:
            problems.append("metric.q_modes: must be non-empty")
    elif q_keys and family is not None:
        problems.append(f"metric.{q_keys[0]}: only valid for the perturbed family")
    rho0 = values.get("rho0")
    modes = values.get("cos_modes", ())
    if rho0 is not None and rho0 - sum(abs(c) for c in modes) <= 1.0:
        problems.append("initial.cos_modes: initial radius must stay > 1 everywhere")
    if problems:
        raise ConfigError(problems)

    cfg = ExperimentConfig(**values)
    if cfg.family == "hyperbolic":
        cfg = replace(cfg, mass=0.0)
    return cfg


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: ExperimentConfig) -> str:
    """Render a config back to text; parse_config(dump_config(c)) == c."""
    def fmt(v):
        if isinstance(v, tuple):
            return ", ".join(repr(x) for x in v)
        if isinstance(v, bool):
            return "true" if v else "false"
        return repr(v) if isinstance(v, float) else str(v)

    lines = []
    for section, keys in _SCHEMA.items():
        rows = []
        for key in keys:
            attr = _FIELD.get((section, key), key)
            v = getattr(cfg, attr)
            if v is None:
                continue
            if key.startswith("q_") and cfg.family != "perturbed":
                continue
            if section == "metric" and key == "mass" and cfg.family == "hyperbolic":
                continue
            if key == "cos_modes" and not v:
                continue
            rows.append(f"{key} = {fmt(v)}")
        if rows:
            lines.append(f"[{section}]")
            lines.extend(rows)
            lines.append("")
    return "\n".join(lines)
