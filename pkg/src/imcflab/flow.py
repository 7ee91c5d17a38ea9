"""Inverse mean curvature flow of radial graphs.

The normal speed ``1/H`` of a graph ``r = u(theta, phi, t)`` is matched by the
radial speed ``u_t = 1 / (H <nu, d_r>)``; this is integrated with classical
RK4 under a parabolic step restriction.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .ambient import AmbientMetric
from .grid import SphereGrid
from .surface import GraphError, GraphSurface, SliceGeometry, assemble_geometry, imcf_speed

log = logging.getLogger(__name__)

R0_DEFAULT = 2.0


class FlowHalted(RuntimeError):
    """The smooth, mean-convex graph regime ended."""

    def __init__(self, reason: str, t: float):
        super().__init__(f"{reason} at t={t:.6g}")
        self.reason = reason
        self.t = t


@dataclass(frozen=True)
class FlowSettings:
    cfl: float = 0.2
    dt_max: float = 0.02
    h_floor: float = 1e-3
    sample_every: int = 1
    r_stop: float | None = None
    barrier_r0: float = R0_DEFAULT

    def __post_init__(self):
        if not self.cfl > 0:
            raise ValueError("cfl must be > 0")
        if not self.dt_max > 0:
            raise ValueError("dt_max must be > 0")
        if not self.h_floor > 0:
            raise ValueError("h_floor must be > 0")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")


@dataclass(eq=False)
class FlowState:
    t: float
    surface: GraphSurface
    geom: SliceGeometry
    dt_last: float = 0.0

    @classmethod
    def initial(cls, surface: GraphSurface, t: float = 0.0) -> "FlowState":
        return cls(t, surface, assemble_geometry(surface))


def min_spacing(geom: SliceGeometry) -> float:
    """Smallest distance between neighbouring nodes, measured in the induced metric."""
    grid = geom.grid
    dtheta, dphi = grid.spacing()
    lt = np.sqrt(geom.h[..., 0, 0])
    gaps = dtheta[:, None] * np.minimum(lt[:-1], lt[1:])
    h_min = float(gaps.min())
    if dphi is not None:
        lp = np.sqrt(geom.h[..., 1, 1])
        h_min = min(h_min, float((dphi * lp).min()))
    return h_min


def adaptive_dt(state: FlowState, cfl: float = 0.2, dt_max: float = math.inf) -> float:
    """cfl * h_min^2 * (min H)^2, capped at dt_max."""
    if not cfl > 0:
        raise ValueError("cfl must be > 0")
    h_min = min_spacing(state.geom)
    min_h = max(state.geom.min_H, 0.0)
    return min(cfl * h_min * h_min * min_h * min_h, dt_max)


def _speed(grid, metric, u, t, h_floor):
    try:
        v, H, angle, _ = imcf_speed(grid, metric, u)
    except GraphError as exc:
        raise FlowHalted("graph broke", t) from exc
    if not np.all(np.isfinite(H)) or H.min() <= h_floor:
        raise FlowHalted("mean-convexity lost", t)
    if angle.min() <= 0:
        raise FlowHalted("graph broke", t)
    return v


def step(state: FlowState, dt: float, h_floor: float = 1e-3) -> FlowState:
    """One RK4 step of u_t = 1 / (H <nu, d_r>)."""
    if dt < 0:
        raise ValueError("dt must be >= 0")
    if dt == 0:
        return state
    if state.geom.min_H <= h_floor:
        raise FlowHalted("mean-convexity lost", state.t)
    surf = state.surface
    grid, metric, u, t = surf.grid, surf.metric, surf.u, state.t
    k1 = _speed(grid, metric, u, t, h_floor)
    k2 = _speed(grid, metric, u + 0.5 * dt * k1, t + 0.5 * dt, h_floor)
    k3 = _speed(grid, metric, u + 0.5 * dt * k2, t + 0.5 * dt, h_floor)
    k4 = _speed(grid, metric, u + dt * k3, t + dt, h_floor)
    u_new = u + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    try:
        new_surface = surf.with_u(u_new)
        geom = assemble_geometry(new_surface)
    except GraphError as exc:
        raise FlowHalted("graph broke", t + dt) from exc
    if geom.min_H <= h_floor:
        raise FlowHalted("mean-convexity lost", t + dt)
    return FlowState(t + dt, new_surface, geom, dt)


# -- barriers ------------------------------------------------------------------


@dataclass(frozen=True)
class BarrierPair:
    """Spherical sub/super-solutions started at the inner and outer radius of Sigma_0."""

    rho_plus_0: float
    rho_minus_0: float
    r0: float = R0_DEFAULT

    def __post_init__(self):
        if self.rho_plus_0 < self.r0 or self.rho_minus_0 < self.r0:
            raise ValueError(f"barrier radii must be >= {self.r0}")

    @classmethod
    def from_geometry(cls, geom: SliceGeometry, r0: float = R0_DEFAULT) -> "BarrierPair":
        return cls(geom.r_min, geom.r_max, r0)

    def rho_plus(self, t: float) -> float:
        return barrier_radius(self, t, +1)

    def rho_minus(self, t: float) -> float:
        return barrier_radius(self, t, -1)


class BarrierError(RuntimeError):
    pass


def _barrier_solve(rho0: float, t: float, sign: int) -> float:
    if sign == 0:
        return math.asinh(math.sinh(rho0) * math.exp(0.5 * t))
    ls0 = math.log(math.sinh(rho0))
    e0 = math.exp(-2.0 * rho0)

    def F(rho):
        return math.log(math.sinh(rho)) - ls0 + sign * (e0 - math.exp(-2.0 * rho)) - 0.5 * t

    def dF(rho):
        return 1.0 / math.tanh(rho) + sign * 2.0 * math.exp(-2.0 * rho)

    lo, hi = rho0 - 1.0, rho0 + 0.5 * t + 2.0
    rho = math.asinh(math.sinh(rho0) * math.exp(0.5 * t))
    for _ in range(50):
        f = F(rho)
        if abs(f) <= 1e-12:
            return rho
        if f > 0:
            hi = min(hi, rho)
        else:
            lo = max(lo, rho)
        nxt = rho - f / dF(rho)
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi)
        rho = nxt
    if abs(F(rho)) <= 1e-12:
        return rho
    raise BarrierError(f"barrier Newton did not converge for rho0={rho0}, t={t}")


def barrier_radius(pair: BarrierPair, t: float, sign: int) -> float:
    """Radius of the barrier sphere at time t.

    Solves ``ln sinh rho - ln sinh rho0 +/- (e^{-2 rho0} - e^{-2 rho}) = t/2``;
    ``sign=+1`` is the inner (sub) solution from ``rho_plus_0``, ``sign=-1`` the
    outer (super) solution from ``rho_minus_0``, ``sign=0`` the exact hyperbolic
    coordinate-sphere flow from ``rho_plus_0``.
    """
    if sign not in (-1, 0, 1):
        raise ValueError("sign must be -1, 0 or +1")
    if t < 0:
        raise ValueError("t must be >= 0")
    rho0 = pair.rho_minus_0 if sign == -1 else pair.rho_plus_0
    return _barrier_solve(rho0, t, sign)


# -- trace ---------------------------------------------------------------------


@dataclass(eq=False)
class TraceRecord:
    t: float
    area: float
    hawking_mass: float
    r_min: float
    r_max: float
    min_H: float
    max_H: float
    min_angle: float
    int_A0_2: float
    int_R6: float
    int_H2: float
    int_grad_log_H2: float
    sup_H_minus_2: float
    sup_A0: float
    rho_plus: float
    rho_minus: float
    u_sha1: str
    res_w: float = math.nan
    res_H: float = math.nan
    nodes: dict = field(default_factory=dict, repr=False)

    def geometry_hash_ok(self) -> bool:
        u = self.nodes.get("u")
        return u is None or _hash(u) == self.u_sha1


def _hash(u) -> str:
    return hashlib.sha1(np.ascontiguousarray(u, dtype=float).tobytes()).hexdigest()


def make_record(state: FlowState, pair: BarrierPair | None, t_rel: float | None = None) -> TraceRecord:
    g = state.geom
    H = g.H
    grad_w, _ = g.surface_gradient(g.w)
    grad_H, grad_H2 = g.surface_gradient(H)
    nu_ang = g.normal[..., 1:]
    adv_w = np.einsum("...a,...a->...", nu_ang, grad_w) / H
    adv_H = np.einsum("...a,...a->...", nu_ang, grad_H) / H
    _, grad_u2 = g.surface_gradient(g.u)
    tb = state.t if t_rel is None else t_rel
    nodes = {
        "u": g.u.copy(),
        "H": H,
        "w": g.w,
        "angle": g.angle,
        "norm_A2": g.norm_A2,
        "norm_A0": g.norm_A0,
        "ric_nn": g.ric_nn,
        "lap_w": g.laplacian(g.w),
        "lap_H": g.laplacian(H),
        "grad_H2": grad_H2,
        "grad_u2": grad_u2,
        "adv_w": adv_w,
        "adv_H": adv_H,
    }
    return TraceRecord(
        t=state.t,
        area=g.area,
        hawking_mass=g.hawking_mass,
        r_min=g.r_min,
        r_max=g.r_max,
        min_H=g.min_H,
        max_H=g.max_H,
        min_angle=g.min_angle,
        int_A0_2=g.int_A0_2,
        int_R6=g.int_R6 if g.int_R6 is not None else math.nan,
        int_H2=g.int_H2,
        int_grad_log_H2=g.integrate(grad_H2 / H**2),
        sup_H_minus_2=float(np.abs(H - 2.0).max()),
        sup_A0=float(g.norm_A0.max()),
        rho_plus=pair.rho_plus(tb) if pair else math.nan,
        rho_minus=pair.rho_minus(tb) if pair else math.nan,
        u_sha1=_hash(g.u),
        nodes=nodes,
    )


@dataclass(eq=False)
class FlowTrace:
    grid: SphereGrid
    metric: AmbientMetric
    records: list[TraceRecord] = field(default_factory=list)
    barrier: BarrierPair | None = None
    halt_reason: str | None = None
    steps: int = 0

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def final(self) -> TraceRecord:
        return self.records[-1]

    def window(self, t0: float) -> "FlowTrace":
        """Sub-trace with t >= t0 (a restart of the run at t0)."""
        recs = [r for r in self.records if r.t >= t0 - 1e-12]
        return FlowTrace(self.grid, self.metric, recs, self.barrier, self.halt_reason, self.steps)


def _centered_derivative(t, f, k):
    """Second-order derivative of samples f at t[k] from its two neighbours."""
    h1, h2 = t[k] - t[k - 1], t[k + 1] - t[k]
    return (
        -h2 / (h1 * (h1 + h2)) * f[k - 1]
        + (h2 - h1) / (h1 * h2) * f[k]
        + h1 / (h2 * (h1 + h2)) * f[k + 1]
    )


def residual_fields(trace: FlowTrace, k: int):
    """Node-wise residuals of the w and H evolution equations at sample k.

    Time derivatives follow the normal trajectories: the graph parametrization
    moves points radially, so ``d_t|normal f = d_t|graph f + (nu^a / H) f_a``.
    Returns (res_w, res_H, scale) with scale = H^2 e^{2 r_max} / (1 + |A|).
    """
    recs = trace.records
    if not 0 < k < len(recs) - 1:
        raise IndexError("residuals need both neighbours")
    t = np.array([recs[k - 1].t, recs[k].t, recs[k + 1].t])
    n = recs[k].nodes
    H = n["H"]
    w = n["w"]
    # w grows like e^{t/2}; differencing log w keeps the truncation error from
    # inheriting that growth (dt^2 e^{3r} after scaling otherwise)
    dw = w * _centered_derivative(t, [np.log(recs[j].nodes["w"]) for j in (k - 1, k, k + 1)], 1)
    dH = H * _centered_derivative(t, [np.log(recs[j].nodes["H"]) for j in (k - 1, k, k + 1)], 1)
    dw = dw + n["adv_w"]
    dH = dH + n["adv_H"]
    res_w = np.abs(dw - n["lap_w"] / H**2 - n["norm_A2"] / H**2 * w)
    res_H = np.abs(dH - n["lap_H"] / H**2 + 2.0 * n["grad_H2"] / H**3 + (n["ric_nn"] + n["norm_A2"]) / H)
    scale = H**2 * math.exp(2.0 * recs[k].r_max) / (1.0 + np.sqrt(n["norm_A2"]))
    return res_w, res_H, scale


def fill_residuals(trace: FlowTrace) -> None:
    for k in range(1, len(trace.records) - 1):
        rw, rh, scale = residual_fields(trace, k)
        trace.records[k].res_w = float((rw * scale).max())
        trace.records[k].res_H = float((rh * scale).max())


def run_flow(
    initial: GraphSurface,
    t_end: float,
    settings: FlowSettings | None = None,
    callbacks: Iterable[Callable[[TraceRecord], None]] = (),
    *,
    keep_nodes: bool = True,
) -> FlowTrace:
    """Evolve ``initial`` to ``t_end`` (or until r_max reaches settings.r_stop).

    Halting conditions end the run with the trace intact and
    ``trace.halt_reason`` set.
    """
    settings = settings or FlowSettings()
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    callbacks = list(callbacks)
    state = FlowState.initial(initial)
    if state.geom.min_H <= settings.h_floor:
        raise ValueError("initial surface is not mean-convex")
    if state.geom.min_angle <= 0:
        raise ValueError("initial surface is not star-shaped")
    try:
        pair = BarrierPair.from_geometry(state.geom, settings.barrier_r0)
    except ValueError:
        log.warning("initial radii below barrier threshold; barriers disabled")
        pair = None
    trace = FlowTrace(initial.grid, initial.metric, barrier=pair)

    def emit(st):
        rec = make_record(st, pair)
        trace.records.append(rec)
        for cb in callbacks:
            cb(rec)

    emit(state)
    n = 0
    eps = 1e-12 * max(1.0, t_end)
    while state.t < t_end - eps:
        if settings.r_stop is not None and state.geom.r_max >= settings.r_stop:
            break
        dt = adaptive_dt(state, settings.cfl, settings.dt_max)
        dt = min(dt, t_end - state.t)
        if dt <= 0:
            trace.halt_reason = "time step collapsed"
            break
        try:
            state = step(state, dt, settings.h_floor)
        except FlowHalted as exc:
            log.warning("flow halted: %s", exc)
            trace.halt_reason = exc.reason
            break
        n += 1
        last = state.t >= t_end - eps or (
            settings.r_stop is not None and state.geom.r_max >= settings.r_stop
        )
        if n % settings.sample_every == 0 or last:
            emit(state)
    trace.steps = n
    fill_residuals(trace)
    if not keep_nodes:
        for rec in trace.records:
            rec.nodes = {"u": rec.nodes["u"]}
    return trace
