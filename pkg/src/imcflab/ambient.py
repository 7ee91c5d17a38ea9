"""Ambient 3-metrics in polar coordinates (r, theta, phi).

Every family has the form

    g = dr^2 + Phi(r, theta) * (dtheta^2 + sin^2(theta) dphi^2)

with ``Phi = sinh^2 r + m / (3 sinh r) + q(r, theta)``.  The hyperbolic
family is ``m = 0, q = 0``; AdS-Schwarzschild has ``q = 0``; the perturbed
family adds an axisymmetric conformal perturbation ``q`` of the angular block
built from a Legendre series in ``cos(theta)``.  Keeping the perturbation in
the angular block preserves ``g_rr = 1`` and ``g_{r,angular} = 0``.

All derivatives are analytic.  Arrays carry node dimensions first and tensor
indices last, ordered (r, theta, phi) = (0, 1, 2):

    g[..., i, j]            g_ij
    dg[..., k, i, j]        d_k g_ij
    d2g[..., k, l, i, j]    d_k d_l g_ij
    gamma[..., i, j, k]     Gamma^i_{jk}
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.polynomial import legendre as npleg

R_MIN = 0.1

FAMILIES = ("hyperbolic", "ads_schwarzschild", "perturbed")


class Point(NamedTuple):
    r: float
    theta: float
    phi: float = 0.0


@dataclass(frozen=True)
class QSpec:
    """Axisymmetric perturbation ``Q = q(r, theta) * (round angular metric)``.

    ``q = amplitude / sqrt(2) * exp(-decay_rate r) sinh^2 r * P(cos theta)``
    where ``P = sum_l modes[l] P_l``.  With ``sum |modes| <= 1`` this gives
    ``|Q|_gbar <= amplitude * exp(-decay_rate r)``.
    """

    amplitude: float
    decay_rate: float = 5.0
    modes: tuple[float, ...] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(float(c) for c in self.modes))
        if not math.isfinite(self.amplitude):
            raise ValueError("QSpec.amplitude must be finite")
        if self.decay_rate < 3.0:
            raise ValueError(f"QSpec.decay_rate must be >= 3, got {self.decay_rate}")
        if len(self.modes) == 0:
            raise ValueError("QSpec.modes must be non-empty")
        if sum(abs(c) for c in self.modes) > 1.0 + 1e-12:
            raise ValueError("QSpec.modes must satisfy sum(|c_l|) <= 1")

    def profile(self, x):
        """P(x), P'(x), P''(x) at ``x = cos(theta)``."""
        c = np.asarray(self.modes)
        return (
            npleg.legval(x, c),
            npleg.legval(x, npleg.legder(c, 1)),
            npleg.legval(x, npleg.legder(c, 2)),
        )

    def norm_bound(self, r):
        return abs(self.amplitude) * np.exp(-self.decay_rate * _real(r))


@dataclass(frozen=True)
class AmbientMetric:
    family: str = "hyperbolic"
    mass: float = 0.0
    perturbation: QSpec | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown metric family {self.family!r}")
        if self.mass < 0 or not math.isfinite(self.mass):
            raise ValueError(f"mass must be finite and >= 0, got {self.mass}")
        if self.family == "hyperbolic" and self.mass != 0.0:
            object.__setattr__(self, "mass", 0.0)
        if self.family == "perturbed" and self.perturbation is None:
            raise ValueError("perturbed family requires a QSpec")
        if self.family != "perturbed" and self.perturbation is not None:
            raise ValueError(f"{self.family} family takes no perturbation")

    @property
    def is_warped(self) -> bool:
        return self.family != "perturbed"

    def base(self) -> "AmbientMetric":
        """The unperturbed warped product underlying this metric."""
        if self.mass == 0.0:
            return AmbientMetric("hyperbolic")
        return AmbientMetric("ads_schwarzschild", self.mass)

    def warp_squared(self, r):
        """lambda^2(r) of the warped base and its first two r-derivatives."""
        r = _real(r)
        sh, ch = np.sinh(r), np.cosh(r)
        f = sh * sh
        f1 = 2.0 * sh * ch
        f2 = 2.0 * np.cosh(2.0 * r)
        m = self.mass
        if m:
            f = f + m / (3.0 * sh)
            f1 = f1 - m * ch / (3.0 * sh * sh)
            f2 = f2 + m * (1.0 + ch * ch) / (3.0 * sh**3)
        return f, f1, f2

    def conformal_factor(self, r, theta):
        """Phi and its derivatives: (Phi, Phi_r, Phi_t, Phi_rr, Phi_rt, Phi_tt)."""
        r = _real(r)
        theta = _real(theta)
        f, f1, f2 = self.warp_squared(r)
        zero = np.zeros(np.broadcast(r, theta).shape, dtype=np.result_type(r, theta))
        phi = f + zero
        phi_r = f1 + zero
        phi_rr = f2 + zero
        phi_t = zero.copy()
        phi_rt = zero.copy()
        phi_tt = zero.copy()
        q = self.perturbation
        if q is not None and q.amplitude != 0.0:
            s, c = np.sin(theta), np.cos(theta)
            P, P1, P2 = q.profile(c)
            a = q.amplitude / math.sqrt(2.0)
            sh = np.sinh(r)
            decay = np.exp(-q.decay_rate * r)
            al = q.decay_rate
            E = decay * sh * sh
            E1 = decay * (-al * sh * sh + np.sinh(2.0 * r))
            E2 = decay * (al * al * sh * sh - 2.0 * al * np.sinh(2.0 * r) + 2.0 * np.cosh(2.0 * r))
            Pt = -s * P1
            Ptt = -c * P1 + s * s * P2
            phi = phi + a * E * P
            phi_r = phi_r + a * E1 * P
            phi_rr = phi_rr + a * E2 * P
            phi_t = phi_t + a * E * Pt
            phi_rt = phi_rt + a * E1 * Pt
            phi_tt = phi_tt + a * E * Ptt
        return phi, phi_r, phi_t, phi_rr, phi_rt, phi_tt


def _real(x):
    """Float array that keeps extended precision when the input has it."""
    x = np.asarray(x)
    if x.dtype == np.longdouble:
        return x
    return x.astype(float)


def _inv3(g):
    """Inverse of symmetric 3x3 blocks by adjugate (works in extended precision)."""
    a, b, c = g[..., 0, 0], g[..., 0, 1], g[..., 0, 2]
    d, e, f = g[..., 1, 1], g[..., 1, 2], g[..., 2, 2]
    A = d * f - e * e
    B = c * e - b * f
    C = b * e - c * d
    D = a * f - c * c
    E = b * c - a * e
    F = a * d - b * b
    det = a * A + b * B + c * C
    inv = np.empty_like(g)
    inv[..., 0, 0], inv[..., 0, 1], inv[..., 0, 2] = A, B, C
    inv[..., 1, 0], inv[..., 1, 1], inv[..., 1, 2] = B, D, E
    inv[..., 2, 0], inv[..., 2, 1], inv[..., 2, 2] = C, E, F
    return inv / det[..., None, None]


def _coords(p):
    if isinstance(p, Point):
        return _real(p.r), _real(p.theta)
    return _real(p[0]), _real(p[1])


def _check_radius(r):
    if np.any(~np.isfinite(r)) or np.any(r <= R_MIN):
        raise ValueError(f"radius must be finite and > {R_MIN}")


def metric_derivatives(metric: AmbientMetric, r, theta):
    """Return (g, dg, d2g) at the given coordinates (broadcast over r, theta)."""
    r = _real(r)
    theta = _real(theta)
    _check_radius(r)
    phi, phi_r, phi_t, phi_rr, phi_rt, phi_tt = metric.conformal_factor(r, theta)
    shape = phi.shape
    s = np.sin(theta) + np.zeros(shape)
    c = np.cos(theta) + np.zeros(shape)
    s2 = s * s
    s2_t = 2.0 * s * c
    s2_tt = 2.0 * (c * c - s * s)

    dt = phi.dtype
    g = np.zeros(shape + (3, 3), dtype=dt)
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = phi
    g[..., 2, 2] = phi * s2

    dg = np.zeros(shape + (3, 3, 3), dtype=dt)
    dg[..., 0, 1, 1] = phi_r
    dg[..., 0, 2, 2] = phi_r * s2
    dg[..., 1, 1, 1] = phi_t
    dg[..., 1, 2, 2] = phi_t * s2 + phi * s2_t

    d2g = np.zeros(shape + (3, 3, 3, 3), dtype=dt)
    d2g[..., 0, 0, 1, 1] = phi_rr
    d2g[..., 0, 0, 2, 2] = phi_rr * s2
    d2g[..., 0, 1, 1, 1] = d2g[..., 1, 0, 1, 1] = phi_rt
    d2g[..., 0, 1, 2, 2] = d2g[..., 1, 0, 2, 2] = phi_rt * s2 + phi_r * s2_t
    d2g[..., 1, 1, 1, 1] = phi_tt
    d2g[..., 1, 1, 2, 2] = phi_tt * s2 + 2.0 * phi_t * s2_t + phi * s2_tt

    if not (np.all(np.isfinite(g)) and np.all(phi > 0)):
        raise ValueError("metric not finite/positive definite at requested points")
    return g, dg, d2g


def eval_metric(metric: AmbientMetric, p) -> np.ndarray:
    """Metric components g_ij at a Point (or broadcastable (r, theta) arrays)."""
    r, theta = _coords(p)
    return metric_derivatives(metric, r, theta)[0]


def _christoffel_from(g, dg):
    ginv = _inv3(g)
    # S[m, j, l] = d_j g_ml + d_l g_mj - d_m g_jl
    S = np.einsum("...jml->...mjl", dg) + np.einsum("...lmj->...mjl", dg) - dg
    return 0.5 * np.einsum("...im,...mjl->...ijl", ginv, S), ginv, S


def christoffels(metric: AmbientMetric, p) -> np.ndarray:
    """Gamma^i_{jk}, index order [..., i, j, k]."""
    r, theta = _coords(p)
    g, dg, _ = metric_derivatives(metric, r, theta)
    return _christoffel_from(g, dg)[0]


@dataclass
class Curvature:
    riemann: np.ndarray  # R^i_{jkl}
    ricci: np.ndarray  # R_{jl}
    scalar: np.ndarray
    metric: np.ndarray = field(repr=False)

    def sectional(self, X, Y):
        """Sectional curvature of span{X, Y} (vectors broadcast against nodes)."""
        g = self.metric
        X = np.broadcast_to(np.asarray(X, dtype=float), g.shape[:-1])
        Y = np.broadcast_to(np.asarray(Y, dtype=float), g.shape[:-1])
        rxyy = np.einsum("...ijkl,...j,...k,...l->...i", self.riemann, Y, X, Y)
        num = np.einsum("...i,...ij,...j->...", rxyy, g, X)
        gxx = np.einsum("...i,...ij,...j->...", X, g, X)
        gyy = np.einsum("...i,...ij,...j->...", Y, g, Y)
        gxy = np.einsum("...i,...ij,...j->...", X, g, Y)
        return num / (gxx * gyy - gxy * gxy)


def curvature_at(metric: AmbientMetric, r, theta) -> Curvature:
    g, dg, d2g = metric_derivatives(metric, r, theta)
    gamma, ginv, S = _christoffel_from(g, dg)
    # d_k g^{im} = -g^{ia} d_k g_ab g^{bm}
    dginv = -np.einsum("...ia,...kab,...bm->...kim", ginv, dg, ginv)
    # d_k S[m, j, l]
    dS = (
        np.einsum("...kjml->...kmjl", d2g)
        + np.einsum("...klmj->...kmjl", d2g)
        - np.einsum("...kmjl->...kmjl", d2g)
    )
    # dgamma[k, i, j, l] = d_k Gamma^i_{jl}
    dgamma = 0.5 * (
        np.einsum("...kim,...mjl->...kijl", dginv, S)
        + np.einsum("...im,...kmjl->...kijl", ginv, dS)
    )
    # R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj} + G^i_{km} G^m_{lj} - G^i_{lm} G^m_{kj}
    riem = (
        np.einsum("...kilj->...ijkl", dgamma)
        - np.einsum("...likj->...ijkl", dgamma)
        + np.einsum("...ikm,...mlj->...ijkl", gamma, gamma)
        - np.einsum("...ilm,...mkj->...ijkl", gamma, gamma)
    )
    ricci = np.einsum("...ijil->...jl", riem)
    ricci = 0.5 * (ricci + np.swapaxes(ricci, -1, -2))
    scalar = np.einsum("...jl,...jl->...", ginv, ricci)
    return Curvature(riem, ricci, scalar, g)


def curvature(metric: AmbientMetric, p) -> Curvature:
    """Riemann, Ricci and scalar curvature at a Point (or arrays)."""
    r, theta = _coords(p)
    return curvature_at(metric, r, theta)


def coordinate_sphere_mean_curvature(metric: AmbientMetric, r) -> float:
    """Mean curvature 2 lambda'/lambda of the coordinate sphere {r = const}."""
    if not metric.is_warped:
        raise ValueError("coordinate sphere mean curvature needs an unperturbed warped metric")
    f, f1, _ = metric.warp_squared(r)
    return f1 / f
