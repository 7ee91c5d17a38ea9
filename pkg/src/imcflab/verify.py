"""Pass/fail reports computed from flow traces.

Every report is a pure function of its inputs.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .ambient import AmbientMetric
from .flow import FlowTrace
from .surface import SIXTEEN_PI, area_radius, limit_functional

CHI = 2  # every surface here is a graph over S^2


class VerificationError(ValueError):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class _Report:
    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def _trapezoid(t, y):
    return 0.5 * (t[1:] - t[:-1]) * (y[1:] + y[:-1])


# -- Geroch monotonicity --------------------------------------------------------


@dataclass
class MonotonicityReport(_Report):
    t: list
    hawking_mass: list
    defects: list
    corrections: list
    closure: list  # dm - integral of the full Geroch rate; discretization only
    min_defect: float
    raw_min_increment: float
    tol: float
    passed: bool


def geroch_report(trace: FlowTrace, metric: AmbientMetric | None = None, tol: float | None = None):
    """Per-interval defects d_k = dm_H - correction_k.

    The correction integrates ``(16 pi)^{-3/2} A^{1/2} (16 pi - 8 pi chi + int (R+6))``
    by the trapezoid rule.  The defect is what Geroch's formula says is
    nonnegative, so the check stays meaningful where R + 6 < 0.
    """
    if len(trace) < 3:
        raise VerificationError("geroch_report needs at least 3 samples")
    t = trace.t
    m = trace.column("hawking_mass")
    area = trace.column("area")
    r6 = trace.column("int_R6")
    if not np.all(np.isfinite(r6)):
        raise VerificationError("trace not instrumented")
    c = np.sqrt(area) / SIXTEEN_PI**1.5
    rate_curv = c * (SIXTEEN_PI - 8.0 * math.pi * CHI + r6)
    rate_full = rate_curv + c * (2.0 * trace.column("int_grad_log_H2") + trace.column("int_A0_2"))
    dm = np.diff(m)
    corr = _trapezoid(t, rate_curv)
    defects = dm - corr
    closure = dm - _trapezoid(t, rate_full)
    if tol is None:
        tol = 1e-6 * max(1.0, float(np.abs(m).max()))
    min_defect = float(defects.min())
    return MonotonicityReport(
        t=list(t),
        hawking_mass=list(m),
        defects=list(defects),
        corrections=list(corr),
        closure=list(closure),
        min_defect=min_defect,
        raw_min_increment=float(dm.min()),
        tol=tol,
        passed=bool(min_defect >= -tol),
    )


# -- Stampacchia lower bound ------------------------------------------------------


@dataclass
class StampacchiaReport(_Report):
    t0: float
    c: float
    t_at_min: float
    samples: int
    min_angle: float
    delta0: float | None
    passed: bool


def stampacchia_report(trace: FlowTrace, t0: float, delta0: float | None = None):
    """c = min over t > t0 of min H / min(1, sqrt(t - t0)).

    The flow is autonomous, so the sub-trace from t0 is the run restarted from
    the slice at t0.  Refinement stability is checked by ``stampacchia_stable``.
    """
    recs = [r for r in trace.records if r.t > t0 + 1e-12]
    if not recs:
        raise VerificationError("insufficient samples")
    window = [r for r in trace.records if r.t >= t0 - 1e-12]
    min_angle = min(r.min_angle for r in window)
    if delta0 is not None and min_angle < delta0:
        raise VerificationError(f"min <nu, d_r> = {min_angle:.4g} below delta0 = {delta0}")
    ratios = np.array([r.min_H / min(1.0, math.sqrt(r.t - t0)) for r in recs])
    k = int(np.argmin(ratios))
    c = float(ratios[k])
    return StampacchiaReport(t0, c, recs[k].t, len(recs), min_angle, delta0, bool(c > 0))


def stampacchia_stable(c_coarse: float, c_fine: float, rel: float = 0.2) -> bool:
    return c_coarse > 0 and c_fine > 0 and abs(c_fine - c_coarse) <= rel * abs(c_coarse)


# -- star-shape ------------------------------------------------------------------


@dataclass
class StarshapeReport(_Report):
    eta: float
    T: float | None
    r_max_at_T: float | None
    nondecreasing_after: bool
    worst_drop: float
    reached: bool


def starshape_report(trace: FlowTrace, eta: float, drop_tol: float = 1e-12):
    """First sample time T with min <nu, d_r> >= 1 - eta at every later sample."""
    if not 0 <= eta:
        raise ValueError("eta must be >= 0")
    ang = trace.column("min_angle")
    ok = ang >= 1.0 - eta
    # last index where the threshold fails; T is the sample after it
    bad = np.flatnonzero(~ok)
    first = 0 if bad.size == 0 else int(bad[-1]) + 1
    if first >= len(ang):
        return StarshapeReport(eta, None, None, False, math.nan, False)
    tail = ang[first:]
    drops = np.diff(tail)
    worst = float(drops.min()) if drops.size else 0.0
    rec = trace.records[first]
    return StarshapeReport(eta, rec.t, rec.r_max, bool(worst >= -drop_tol), worst, True)


# -- umbilicity ------------------------------------------------------------------


@dataclass
class UmbilicityReport(_Report):
    sup_product: float
    mid_max: float
    late_max: float
    slope: float | None
    passed: bool


def decay_slope(trace: FlowTrace, start_fraction: float = 0.5) -> float | None:
    """Least-squares slope of log int |A0|^2 against log A over the final part."""
    a = trace.column("area")
    q = trace.column("int_A0_2")
    k0 = int(len(a) * start_fraction)
    a, q = a[k0:], q[k0:]
    keep = q > 0
    if keep.sum() < 3:
        return None
    return float(np.polyfit(np.log(a[keep]), np.log(q[keep]), 1)[0])


def umbilicity_decay_report(trace: FlowTrace, atol: float = 1e-12) -> UmbilicityReport:
    """sup of int |A0|^2 * A^{1/2}; passes iff the late-run values do not grow.

    Products below ``atol`` (umbilic up to round-off) always pass.
    """
    prod = trace.column("int_A0_2") * np.sqrt(trace.column("area"))
    n = len(prod)
    if n == 1:
        v = float(prod[0])
        return UmbilicityReport(v, v, v, None, bool(math.isfinite(v)))
    mid = prod[n // 4 : max(n // 4 + 1, (3 * n) // 4)]
    late = prod[(3 * n) // 4 :]
    mid_max, late_max = float(mid.max()), float(late.max())
    finite = bool(np.all(np.isfinite(prod)))
    passed = finite and (late_max <= 1.1 * mid_max or late_max <= atol)
    return UmbilicityReport(float(prod.max()), mid_max, late_max, decay_slope(trace), passed)


# -- asymptotic roundness --------------------------------------------------------


@dataclass
class RoundnessReport(_Report):
    t: float
    r_max: float
    sup_H_minus_2: float
    sup_A0: float

    def below(self, eps: float) -> bool:
        return self.sup_H_minus_2 <= eps and self.sup_A0 <= eps


def asymptotic_roundness_report(trace: FlowTrace) -> RoundnessReport:
    r = trace.final
    return RoundnessReport(r.t, r.r_max, r.sup_H_minus_2, r.sup_A0)


# -- limit formula ---------------------------------------------------------------


def extrapolate(t, y, fraction: float = 1.0 / 3.0):
    """Fit y ~ a + b e^{-t/2} over the last ``fraction`` of samples; returns (a, b)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    k0 = min(int(len(t) * (1.0 - fraction)), len(t) - 2)
    if k0 < 0:
        raise VerificationError("need at least 2 samples to extrapolate")
    ts, ys = t[k0:], y[k0:]
    X = np.stack([np.ones_like(ts), np.exp(-0.5 * (ts - ts[-1]))], axis=1)
    (a, b), *_ = np.linalg.lstsq(X, ys, rcond=None)
    return float(a), float(b * math.exp(0.5 * ts[-1]))


@dataclass
class LimitReport(_Report):
    mass: float
    t: list
    hawking_mass: list
    functional: list  # (m/2) * limit_functional(f_t)
    f_final: list = field(repr=False)
    hawking_limit: float = math.nan
    functional_limit: float = math.nan
    hoelder_slack: float = math.nan
    relative_gap: float = math.nan
    gap_first_quarter: float = math.nan
    gap_final_quarter: float = math.nan
    gradient_scaled_max: float = math.nan  # sup |grad f_t|^2 e^t
    gradient_bounded: bool = False
    tol: float = 0.02
    theorem_1_2: str = "fail"
    self_consistent: bool = False
    equality_case: bool = False
    final_oscillation: float = math.nan
    equality_consistent: bool = True


def limit_report(trace: FlowTrace, metric: AmbientMetric | None = None, tol: float = 0.02):
    """Measured m_H(t) against (m/2) * (mean e^{2f})^{1/2} * mean e^{-f}."""
    metric = metric or trace.metric
    if metric.family == "hyperbolic" or metric.mass <= 0:
        raise VerificationError("limit report needs a positive-mass family")
    if len(trace) < 3:
        raise VerificationError("limit report needs at least 3 samples")
    half_m = 0.5 * metric.mass
    grid = trace.grid
    t = trace.t
    mh = trace.column("hawking_mass")
    fun = np.empty_like(t)
    grad = np.empty_like(t)
    f = None
    for k, rec in enumerate(trace.records):
        u = rec.nodes.get("u")
        if u is None:
            raise VerificationError("trace not instrumented")
        f = u - area_radius(rec.area)
        fun[k] = half_m * limit_functional(f, grid)
        g2 = rec.nodes.get("grad_u2")
        grad[k] = float(np.max(g2)) * math.exp(rec.t) if g2 is not None else math.nan
    a_m, _ = extrapolate(t, mh)
    a_f, _ = extrapolate(t, fun)
    gap = np.abs(mh - fun)
    n = len(t)
    q = max(1, n // 4)
    g_first, g_last = float(gap[:q].max()), float(gap[-q:].max())
    late = grad[n // 2 :]
    early = grad[: max(1, n // 2)]
    bounded = bool(np.all(np.isfinite(late)) and late.max() <= 1.5 * max(early.max(), 1e-300))
    verdict = "pass" if a_m >= half_m * (1.0 - tol) else "fail"
    rel_gap = abs(a_m - a_f) / abs(a_f)
    equality = abs(a_m - half_m) <= 0.01 * half_m
    osc = trace.final.r_max - trace.final.r_min
    return LimitReport(
        mass=metric.mass,
        t=list(t),
        hawking_mass=list(mh),
        functional=list(fun),
        f_final=list(np.ravel(f)),
        hawking_limit=a_m,
        functional_limit=a_f,
        hoelder_slack=a_f / half_m - 1.0,
        relative_gap=rel_gap,
        gap_first_quarter=g_first,
        gap_final_quarter=g_last,
        gradient_scaled_max=float(np.nanmax(grad)),
        gradient_bounded=bounded,
        tol=tol,
        theorem_1_2=verdict,
        self_consistent=bool(rel_gap <= tol),
        equality_case=bool(equality),
        final_oscillation=osc,
        equality_consistent=bool((not equality) or osc < 0.05),
    )


# -- residuals -------------------------------------------------------------------


@dataclass
class ResidualReport(_Report):
    max_w: float
    max_H: float
    growth_w: float  # last-quarter max / first-half max
    growth_H: float
    passed: bool


def residual_report(trace: FlowTrace, growth_limit: float = 2.0, atol: float = 1e-6) -> ResidualReport:
    """Scaled evolution-equation residuals: finite and not growing along the run.

    Residuals already below ``atol`` are round-off and count as bounded.
    """
    rw = trace.column("res_w")[1:-1]
    rh = trace.column("res_H")[1:-1]
    if rw.size < 4:
        raise VerificationError("insufficient samples")
    n = rw.size

    def growth(x):
        return float(x[(3 * n) // 4 :].max() / max(x[: n // 2].max(), 1e-300))

    def bounded(x, g):
        return g <= growth_limit or x[(3 * n) // 4 :].max() <= atol

    gw, gh = growth(rw), growth(rh)
    finite = bool(np.all(np.isfinite(rw)) and np.all(np.isfinite(rh)))
    ok = finite and bounded(rw, gw) and bounded(rh, gh)
    return ResidualReport(float(rw.max()), float(rh.max()), gw, gh, ok)


def residual_shrink(coarse: FlowTrace, fine: FlowTrace) -> tuple[float, float]:
    """Ratio of max scaled residuals (coarse / fine) for w and H."""
    def peak(tr, name):
        return float(np.nanmax(tr.column(name)[1:-1]))

    return peak(coarse, "res_w") / peak(fine, "res_w"), peak(coarse, "res_H") / peak(fine, "res_H")


# -- barriers ------------------------------------------------------------------


@dataclass
class BarrierReport(_Report):
    slack: float
    worst_inner: float  # min of r_min - rho_plus
    worst_outer: float  # min of rho_minus - r_max
    passed: bool


def barrier_report(trace: FlowTrace, slack: float = 0.01) -> BarrierReport:
    rp, rm = trace.column("rho_plus"), trace.column("rho_minus")
    if not (np.all(np.isfinite(rp)) and np.all(np.isfinite(rm))):
        raise VerificationError("trace has no barriers")
    inner = float((trace.column("r_min") - rp).min())
    outer = float((rm - trace.column("r_max")).min())
    return BarrierReport(slack, inner, outer, bool(inner >= -slack and outer >= -slack))
