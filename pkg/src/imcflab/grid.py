"""Gauss-Legendre x equispaced grid on S^2 with spectral derivatives.

Latitude nodes sit at Gauss-Legendre points in ``x = cos(theta)`` so no node
lies on a pole.  Derivatives in theta are taken by polynomial collocation in
``x``; a smooth function on the sphere splits into azimuthal modes whose
even-``m`` part is smooth in ``x`` and whose odd-``m`` part is ``sin(theta)``
times a function smooth in ``x``.  Handling the two parities separately keeps
the collocation spectrally accurate up to the poles.  Derivatives in phi use
the discrete Fourier transform.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _barycentric_diff_matrix(x, w):
    """First-derivative collocation matrix on Gauss-Legendre nodes ``x``."""
    n = x.size
    # barycentric weights for Gauss-Legendre points, ascending order
    b = np.sqrt((1.0 - x * x) * w) * (-1.0) ** np.arange(n)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (b[None, :] / b[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D


@dataclass(frozen=True, eq=False)
class SphereGrid:
    n_theta: int
    n_phi: int = 1
    theta: np.ndarray = field(init=False, repr=False)
    phi: np.ndarray = field(init=False, repr=False)
    x: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_theta < 16:
            raise ValueError(f"n_theta must be >= 16, got {self.n_theta}")
        if self.n_phi < 1:
            raise ValueError(f"n_phi must be >= 1, got {self.n_phi}")
        if self.n_phi > 1 and self.n_phi % 2:
            raise ValueError("n_phi must be 1 (axisymmetric) or even")
        xg, wg = np.polynomial.legendre.leggauss(self.n_theta)
        # theta ascending <=> x descending
        order = np.argsort(-xg)
        x = xg[order]
        wlat = wg[order]
        theta = np.arccos(x)
        phi = 2.0 * math.pi * np.arange(self.n_phi) / self.n_phi
        weights = np.outer(wlat, np.full(self.n_phi, 2.0 * math.pi / self.n_phi))
        total = weights.sum()
        if abs(total - 4.0 * math.pi) > 1e-12 * 4.0 * math.pi:
            raise ValueError("quadrature weights do not sum to 4*pi")
        # differentiation in x built on ascending nodes, then reordered
        D_asc = _barycentric_diff_matrix(xg, wg)
        D = D_asc[np.ix_(order, order)]
        set_ = object.__setattr__
        set_(self, "x", x)
        set_(self, "theta", theta)
        set_(self, "phi", phi)
        set_(self, "weights", weights)
        set_(self, "_D", D)
        set_(self, "_D2", D @ D)
        set_(self, "_sin", np.sin(theta)[:, None])
        set_(self, "_cos", x[:, None])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @property
    def axisymmetric(self) -> bool:
        return self.n_phi == 1

    @property
    def degree(self) -> int:
        """Polynomial degree on S^2 integrated exactly by the quadrature."""
        if self.axisymmetric:
            return 2 * self.n_theta - 1
        return min(2 * self.n_theta - 1, self.n_phi - 1)

    def mesh(self):
        return np.meshgrid(self.theta, self.phi, indexing="ij")

    @property
    def sin_theta(self) -> np.ndarray:
        return self._sin

    def integrate(self, f) -> float:
        """Integral of ``f`` over the unit round sphere."""
        return float(np.sum(self.weights * np.broadcast_to(f, self.shape)))

    def mean(self, f) -> float:
        return self.integrate(f) / (4.0 * math.pi)

    def spacing(self):
        """Coordinate gaps: (theta gaps between adjacent nodes, phi gap or None)."""
        dtheta = np.diff(self.theta)
        dphi = 2.0 * math.pi / self.n_phi if self.n_phi > 1 else None
        return dtheta, dphi

    # -- derivatives -------------------------------------------------------

    def _split_parity(self, f):
        if self.n_phi == 1:
            return f, None
        F = np.fft.rfft(f, axis=1)
        m = np.arange(F.shape[1])
        even = np.fft.irfft(np.where(m % 2 == 0, F, 0.0), n=self.n_phi, axis=1)
        odd = np.fft.irfft(np.where(m % 2 == 1, F, 0.0), n=self.n_phi, axis=1)
        return even, odd

    def _theta_derivs(self, f):
        D, D2, s, c = self._D, self._D2, self._sin, self._cos
        even, odd = self._split_parity(f)
        dE = D @ even
        ft = -s * dE
        ftt = -c * dE + s * s * (D2 @ even)
        if odd is not None:
            g = odd / s
            dg = D @ g
            ft = ft + c * g - s * s * dg
            ftt = ftt - s * g - 3.0 * s * c * dg + s**3 * (D2 @ g)
        return ft, ftt

    def _phi_deriv(self, f, order):
        if self.n_phi == 1:
            return np.zeros_like(f)
        F = np.fft.rfft(f, axis=1)
        m = np.arange(F.shape[1])
        if order == 1:
            mult = 1j * m
            if self.n_phi % 2 == 0:
                mult[-1] = 0.0
        else:
            mult = -(m.astype(float) ** 2)
        return np.fft.irfft(F * mult, n=self.n_phi, axis=1)

    def derivatives(self, f):
        """(f_t, f_p, f_tt, f_tp, f_pp) for a smooth scalar on the grid."""
        f = np.asarray(f, dtype=float).reshape(self.shape)
        ft, ftt = self._theta_derivs(f)
        if self.n_phi == 1:
            z = np.zeros_like(f)
            return ft, z, ftt, z, z
        fp = self._phi_deriv(f, 1)
        fpp = self._phi_deriv(f, 2)
        ftp, _ = self._theta_derivs(fp)
        return ft, fp, ftt, ftp, fpp

    def gradient(self, f):
        ft, fp, *_ = self.derivatives(f)
        return ft, fp

    def refined(self, factor: int = 2) -> "SphereGrid":
        n_phi = self.n_phi if self.n_phi == 1 else self.n_phi * factor
        return SphereGrid(self.n_theta * factor, n_phi)

    def interpolate_axisymmetric(self, f, theta):
        """Evaluate the collocation polynomial of an axisymmetric field at theta."""
        f = np.asarray(f, dtype=float).reshape(self.shape)[:, 0]
        xt = np.cos(np.asarray(theta, dtype=float))
        xn = self.x
        wlat = self.weights[:, 0] / (2.0 * math.pi / self.n_phi)
        b = np.sqrt((1.0 - xn * xn) * wlat)
        # sign pattern must alternate in ascending-x order
        asc = np.argsort(xn)
        sign = np.empty_like(b)
        sign[asc] = (-1.0) ** np.arange(xn.size)
        b = b * sign
        diff = xt[..., None] - xn
        exact = np.isclose(diff, 0.0, atol=1e-15)
        diff = np.where(exact, 1.0, diff)
        terms = b / diff
        out = (terms @ f) / terms.sum(axis=-1)
        hit = exact.any(axis=-1)
        if np.any(hit):
            out = np.where(hit, f[np.argmax(exact, axis=-1)], out)
        return out
