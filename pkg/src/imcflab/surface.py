"""Radial graphs over S^2 and their extrinsic geometry.

A star-shaped surface is ``{(u(theta, phi), theta, phi)}``.  With tangents
``e_a = u_a d_r + d_a`` the outward normal is the normalized gradient of
``r - u``, and the second fundamental form is ``A_ab = -g(nu, nabla_{e_a} e_b)``
so that coordinate spheres have ``H > 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ambient import AmbientMetric, _christoffel_from, curvature_at, metric_derivatives
from .grid import SphereGrid

SIXTEEN_PI = 16.0 * math.pi


class GraphError(ValueError):
    """The radial function does not describe an immersed star-shaped graph."""


@dataclass(frozen=True, eq=False)
class GraphSurface:
    grid: SphereGrid
    u: np.ndarray
    metric: AmbientMetric

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.ndim == 0:
            u = np.full(self.grid.shape, float(u))
        u = u.reshape(self.grid.shape)
        if not np.all(np.isfinite(u)) or np.any(u <= 1.0):
            raise GraphError("radial function must be finite and > 1 at every node")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @classmethod
    def constant(cls, grid, rho, metric):
        return cls(grid, np.full(grid.shape, float(rho)), metric)

    @classmethod
    def from_function(cls, grid, fn, metric):
        T, P = grid.mesh()
        return cls(grid, fn(T, P), metric)

    def with_u(self, u) -> "GraphSurface":
        return GraphSurface(self.grid, u, self.metric)


@dataclass(eq=False)
class SliceGeometry:
    grid: SphereGrid = field(repr=False)
    u: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    h_inv: np.ndarray = field(repr=False)
    normal: np.ndarray = field(repr=False)  # nu^i, ambient components
    A: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    norm_A2: np.ndarray = field(repr=False)
    norm_A0: np.ndarray = field(repr=False)
    angle: np.ndarray = field(repr=False)  # <nu, d_r>
    w: np.ndarray = field(repr=False)  # sinh(r) <nu, d_r>
    area_element: np.ndarray = field(repr=False)  # sqrt(det h), coordinate density
    area: float = 0.0
    int_H2: float = 0.0
    int_A0_2: float = 0.0
    hawking_mass: float = 0.0
    r_max: float = 0.0
    r_min: float = 0.0
    min_angle: float = 0.0
    # filled only when assembled with curvature
    ric_nn: np.ndarray | None = field(default=None, repr=False)
    scalar_curvature: np.ndarray | None = field(default=None, repr=False)
    int_R6: float | None = None
    intrinsic_gamma: np.ndarray | None = field(default=None, repr=False)

    @property
    def min_H(self) -> float:
        return float(self.H.min())

    @property
    def max_H(self) -> float:
        return float(self.H.max())

    @property
    def mean_convex(self) -> bool:
        return bool(np.all(self.H > 0))

    def integrate(self, f) -> float:
        """Integral of a nodal field against the induced area measure."""
        return self.grid.integrate(np.asarray(f) * self.area_element / self.grid.sin_theta)

    def surface_gradient(self, f):
        """Coordinate gradient (f_t, f_p) and |grad f|^2 in the induced metric."""
        ft, fp = self.grid.gradient(f)
        df = np.stack([ft, fp], axis=-1)
        return df, np.einsum("...a,...ab,...b->...", df, self.h_inv, df)

    def laplacian(self, f):
        """Laplace-Beltrami operator of the slice applied to a nodal scalar."""
        if self.intrinsic_gamma is None:
            raise ValueError("geometry assembled without intrinsic connection")
        ft, fp, ftt, ftp, fpp = self.grid.derivatives(f)
        d1 = np.stack([ft, fp], axis=-1)
        d2 = np.empty(ft.shape + (2, 2))
        d2[..., 0, 0] = ftt
        d2[..., 0, 1] = d2[..., 1, 0] = ftp
        d2[..., 1, 1] = fpp
        hess = d2 - np.einsum("...dab,...d->...ab", self.intrinsic_gamma, d1)
        return np.einsum("...ab,...ab->...", self.h_inv, hess)


def _local_geometry(
    grid: SphereGrid, metric: AmbientMetric, u, *, full=True, with_curvature=False, dtype=float
):
    # Full slices use extended precision: the Hawking mass multiplies H - 2 by
    # roughly sinh^3(r)/2, which amplifies double round-off to ~1e-7 at r = 8.
    u = np.asarray(u, dtype=dtype).reshape(grid.shape)
    T = np.broadcast_to(grid.theta.astype(dtype)[:, None], grid.shape)
    ut, up, utt, utp, upp = (np.asarray(d, dtype=dtype) for d in grid.derivatives(u))
    g, dg, _ = metric_derivatives(metric, u, T)
    gamma, ginv, _ = _christoffel_from(g, dg)

    shape = grid.shape
    E = np.zeros(shape + (2, 3), dtype=dtype)
    E[..., 0, 0] = ut
    E[..., 0, 1] = 1.0
    E[..., 1, 0] = up
    E[..., 1, 2] = 1.0
    h = np.einsum("...ai,...ij,...bj->...ab", E, g, E)
    det_h = h[..., 0, 0] * h[..., 1, 1] - h[..., 0, 1] ** 2
    if np.any(~np.isfinite(det_h)) or np.any(det_h <= 0) or np.any(h[..., 0, 0] <= 0):
        raise GraphError("not an immersed graph: induced metric lost positive definiteness")
    h_inv = np.empty_like(h)
    h_inv[..., 0, 0] = h[..., 1, 1] / det_h
    h_inv[..., 1, 1] = h[..., 0, 0] / det_h
    h_inv[..., 0, 1] = h_inv[..., 1, 0] = -h[..., 0, 1] / det_h

    n_cov = np.stack([np.ones(shape, dtype=dtype), -ut, -up], axis=-1)
    n_norm = np.sqrt(np.einsum("...i,...ij,...j->...", n_cov, ginv, n_cov))
    nu_cov = n_cov / n_norm[..., None]
    angle = 1.0 / n_norm

    # nabla_{e_a} e_b, ambient components
    cov = np.einsum("...kij,...ai,...bj->...abk", gamma, E, E)
    cov[..., 0, 0, 0] += utt
    cov[..., 0, 1, 0] += utp
    cov[..., 1, 0, 0] += utp
    cov[..., 1, 1, 0] += upp
    A = -np.einsum("...k,...abk->...ab", nu_cov, cov)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    H = np.einsum("...ab,...ab->...", h_inv, A)
    if not full:
        return H, angle, h
    hm_bracket = grid.integrate((H - 2.0) * (H + 2.0) * np.sqrt(det_h) / grid.sin_theta)

    nu = np.einsum("...ij,...j->...i", ginv, nu_cov)
    Amix = np.einsum("...ac,...cb->...ab", h_inv, A)
    norm_A2 = np.einsum("...ab,...ba->...", Amix, Amix)
    # trace-free part contracted directly; equals |A|^2 - H^2/2 without cancellation
    A0mix = Amix - 0.5 * H[..., None, None] * np.eye(2)
    a0 = np.einsum("...ab,...ba->...", A0mix, A0mix)
    if np.any(a0 < -1e-10):
        raise GraphError("trace-free norm negative beyond round-off")
    norm_A0 = np.sqrt(np.maximum(a0, 0.0))
    w = np.sinh(u) * angle
    dens = np.sqrt(det_h)

    # Gamma~_{c,ab} = g(nabla_{e_a} e_b, e_c)
    gam_low = np.einsum("...ck,...kl,...abl->...cab", E, g, cov)
    intrinsic_gamma = np.einsum("...dc,...cab->...dab", h_inv, gam_low)

    f64 = lambda a: np.asarray(a, dtype=float)  # noqa: E731
    geom = SliceGeometry(
        grid=grid,
        u=f64(u),
        h=f64(h),
        h_inv=f64(h_inv),
        normal=f64(nu),
        A=f64(A),
        H=f64(H),
        norm_A2=f64(norm_A2),
        norm_A0=f64(norm_A0),
        angle=f64(angle),
        w=f64(w),
        area_element=f64(dens),
        intrinsic_gamma=f64(intrinsic_gamma),
    )
    geom.area = grid.integrate(dens / grid.sin_theta)
    geom.int_H2 = grid.integrate(H * H * dens / grid.sin_theta)
    geom.int_A0_2 = grid.integrate(a0 * dens / grid.sin_theta)
    geom.hawking_mass = _hawking_mass(geom.area, hm_bracket)
    geom.r_max = float(u.max())
    geom.r_min = float(u.min())
    geom.min_angle = float(angle.min())

    if with_curvature:
        curv = curvature_at(metric, u, T)
        geom.ric_nn = f64(np.einsum("...ij,...i,...j->...", curv.ricci, nu, nu))
        geom.scalar_curvature = f64(curv.scalar)
        geom.int_R6 = grid.integrate((curv.scalar + 6.0) * dens / grid.sin_theta)
    return geom


def assemble_geometry(surface: GraphSurface, *, with_curvature: bool = True) -> SliceGeometry:
    """Full extrinsic geometry of a radial graph, integrated by grid quadrature."""
    return _local_geometry(
        surface.grid, surface.metric, surface.u, with_curvature=with_curvature, dtype=np.longdouble
    )


def _hawking_mass(area, int_H2_minus_4):
    return math.sqrt(area) / SIXTEEN_PI**1.5 * (SIXTEEN_PI - int_H2_minus_4)


def hawking_mass(geom: SliceGeometry) -> float:
    """A^(1/2) / (16 pi)^(3/2) * (16 pi - int (H^2 - 4) dmu)."""
    return geom.hawking_mass


def hawking_mass_from(area: float, int_H2: float) -> float:
    return _hawking_mass(area, int_H2 - 4.0 * area)


def umbilicity_report(geom: SliceGeometry) -> tuple[float, float]:
    """(int |A0|^2 dmu, int |A0|^2 dmu * A^(1/2))."""
    return geom.int_A0_2, geom.int_A0_2 * math.sqrt(geom.area)


def area_radius(area: float) -> float:
    return math.asinh(math.sqrt(area / (4.0 * math.pi)))


def extract_f(geom: SliceGeometry, surface: GraphSurface | None = None):
    """Area radius r_hat with A = 4 pi sinh^2 r_hat, and f = u - r_hat (not centered)."""
    if geom.area <= 0:
        raise ValueError("area must be positive")
    r_hat = area_radius(geom.area)
    u = geom.u if surface is None else surface.u
    return r_hat, np.asarray(u) - r_hat


def limit_functional(f, grid: SphereGrid) -> float:
    """(mean e^{2f})^(1/2) * mean e^{-f} over the round sphere; >= 1 by Hoelder."""
    f = np.broadcast_to(np.asarray(f, dtype=float), grid.shape)
    shift = grid.mean(f)
    g = f - shift  # invariant under constant shifts; improves conditioning
    return math.sqrt(grid.mean(np.exp(2.0 * g))) * grid.mean(np.exp(-g))


def imcf_speed(grid: SphereGrid, metric: AmbientMetric, u):
    """Radial speed u_t = 1 / (H <nu, d_r>) of the graph, plus H and <nu, d_r>."""
    H, angle, h = _local_geometry(grid, metric, u, full=False, dtype=float)
    return 1.0 / (H * angle), H, angle, h
