"""Closed-form values for coordinate spheres and the exact hyperbolic flow."""
from __future__ import annotations

import math

import numpy as np

from .ambient import AmbientMetric


def warp(metric: AmbientMetric, rho):
    """(lambda, lambda') of the warped base at radius rho."""
    f, f1, _ = metric.warp_squared(rho)
    lam = np.sqrt(f)
    return lam, f1 / (2.0 * lam)


def round_area(metric: AmbientMetric, rho):
    return 4.0 * math.pi * metric.warp_squared(rho)[0]


def round_mean_curvature(metric: AmbientMetric, rho):
    f, f1, _ = metric.warp_squared(rho)
    return f1 / f


def round_hawking_mass(metric: AmbientMetric, rho):
    """(lambda/2)(1 + lambda^2 - lambda'^2) for lambda^2 = sinh^2 + m/(3 sinh).

    The bracket is expanded by hand so the leading sinh^2 terms cancel exactly;
    the naive form loses about 1e-7 at rho = 8.
    """
    m = metric.mass
    s = np.sinh(np.asarray(rho, dtype=float))
    f = s * s + m / (3.0 * s)
    bracket = (4.0 * m * s + 8.0 * m / (3.0 * s) + m * m / (3.0 * s * s) - m * m / (9.0 * s**4)) / (4.0 * f)
    return 0.5 * np.sqrt(f) * bracket


def hyperbolic_radius(rho0, t):
    """Exact IMCF of a coordinate sphere in hyperbolic space: sinh r = sinh rho0 e^{t/2}."""
    return np.arcsinh(np.sinh(rho0) * np.exp(np.asarray(t, dtype=float) / 2.0))


def round_radius(metric: AmbientMetric, rho0, t):
    """Radius of the round IMCF in a warped metric, from area growth A(t) = A(0) e^t.

    Solves lambda^2(rho) = lambda^2(rho0) e^t by Newton iteration.
    """
    target = metric.warp_squared(rho0)[0] * np.exp(t)
    rho = np.asarray(hyperbolic_radius(rho0, t), dtype=float)
    for _ in range(60):
        f, f1, _ = metric.warp_squared(rho)
        step = (f - target) / f1
        rho = rho - step
        if np.all(np.abs(step) < 1e-15 * np.maximum(1.0, rho)):
            break
    return rho
