import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imcflab.ambient import (
    AmbientMetric,
    Point,
    QSpec,
    christoffels,
    coordinate_sphere_mean_curvature,
    curvature,
    eval_metric,
    metric_derivatives,
)

HYP = AmbientMetric("hyperbolic")
ADS = AmbientMetric("ads_schwarzschild", 2.0)
PERT = AmbientMetric("perturbed", 2.0, QSpec(0.5, 4.0, (0.2, 0.3, 0.5)))

radii = st.floats(0.5, 9.0)
thetas = st.floats(0.05, math.pi - 0.05)


def fd_christoffels(metric, r, th, h):
    """Central differences of g in (r, theta); no phi dependence."""
    dg = np.zeros((3, 3, 3))
    dg[0] = (eval_metric(metric, Point(r + h, th)) - eval_metric(metric, Point(r - h, th))) / (2 * h)
    dg[1] = (eval_metric(metric, Point(r, th + h)) - eval_metric(metric, Point(r, th - h))) / (2 * h)
    g = eval_metric(metric, Point(r, th))
    gi = np.linalg.inv(g)
    gam = np.zeros((3, 3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                gam[i, j, k] = 0.5 * sum(gi[i, m] * (dg[j, m, k] + dg[k, m, j] - dg[m, j, k]) for m in range(3))
    return gam


@pytest.mark.parametrize("metric", [HYP, ADS, PERT], ids=lambda m: m.family)
def test_christoffels_match_finite_differences_second_order(metric):
    r, th = 2.3, 1.1
    exact = christoffels(metric, Point(r, th))
    errs = [np.abs(fd_christoffels(metric, r, th, h) - exact).max() for h in (1e-2, 5e-3, 2.5e-3)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.1), orders


def test_hyperbolic_christoffel_closed_forms():
    r, th = 1.7, 0.6
    G = christoffels(HYP, Point(r, th))
    assert G[0, 1, 1] == pytest.approx(-math.sinh(r) * math.cosh(r), rel=1e-14)
    assert G[1, 0, 1] == pytest.approx(1 / math.tanh(r), rel=1e-14)
    assert G[2, 1, 2] == pytest.approx(1 / math.tan(th), rel=1e-14)
    assert np.allclose(G, np.swapaxes(G, 1, 2), atol=0)


@settings(max_examples=100, deadline=None)
@given(radii, thetas)
def test_hyperbolic_is_space_form(r, th):
    K = curvature(HYP, Point(r, th))
    g = eval_metric(HYP, Point(r, th))
    assert abs(K.scalar + 6.0) < 1e-10 * max(1.0, math.exp(0))
    assert np.allclose(K.ricci, -2.0 * g, rtol=1e-9, atol=1e-9 * np.abs(g).max())


@settings(max_examples=50, deadline=None)
@given(radii, thetas, st.lists(st.floats(-1, 1), min_size=6, max_size=6))
def test_hyperbolic_sectional_curvature(r, th, v):
    X, Y = np.array(v[:3]), np.array(v[3:])
    if np.linalg.norm(np.cross(X, Y)) < 1e-2:
        return
    K = curvature(HYP, Point(r, th)).sectional(X, Y)
    assert K == pytest.approx(-1.0, abs=1e-8)


def test_ads_scalar_curvature_offset_decays():
    # this warped form is not exactly scalar-curvature -6; the defect is negative and O(e^{-5r})
    r = np.linspace(3.0, 6.0, 4)
    K = curvature(ADS, (r, np.full_like(r, 1.0)))
    defect = K.scalar + 6.0
    assert np.all(defect < 0)
    scaled = defect * np.exp(5 * r)
    assert np.ptp(scaled) < 0.05 * np.abs(scaled).max()
    # at r = 8 the defect is below double round-off; extended precision still resolves it
    K8 = curvature(ADS, (np.longdouble(8.0), np.longdouble(1.0)))
    assert float((K8.scalar + 6.0) * np.exp(np.longdouble(40.0))) == pytest.approx(scaled[-1], rel=0.02)


@settings(max_examples=60, deadline=None)
@given(st.floats(1.0, 8.0), thetas)
def test_perturbation_norm_bound(r, th):
    # Q = g - gbar cancels ~sinh^2 r; extended precision keeps the difference above round-off
    pt = Point(np.longdouble(r), np.longdouble(th))
    gb = eval_metric(PERT.base(), pt)
    Q = (eval_metric(PERT, pt) - gb).astype(float)
    gbi = np.linalg.inv(gb.astype(float))
    norm = math.sqrt(np.einsum("ik,jl,ij,kl->", gbi, gbi, Q, Q))
    assert norm <= PERT.perturbation.norm_bound(r) * (1 + 1e-12)


def test_metric_symmetric_positive():
    r = np.array([1.0, 4.0, 9.0])
    g = eval_metric(PERT, (r, np.array([0.3, 1.5, 3.0])))
    assert np.allclose(g, np.swapaxes(g, -1, -2))
    assert np.all(np.linalg.eigvalsh(g) > 0)


def test_extended_precision_is_preserved():
    g, dg, d2g = metric_derivatives(ADS, np.longdouble(3.0), np.longdouble(1.0))
    assert g.dtype == dg.dtype == d2g.dtype == np.longdouble


def test_coordinate_sphere_mean_curvature():
    assert coordinate_sphere_mean_curvature(HYP, 2.0) == pytest.approx(2 / math.tanh(2.0), rel=1e-14)
    with pytest.raises(ValueError):
        coordinate_sphere_mean_curvature(PERT, 2.0)


@pytest.mark.parametrize(
    "build",
    [
        lambda: AmbientMetric("flat"),
        lambda: AmbientMetric("ads_schwarzschild", -1.0),
        lambda: AmbientMetric("perturbed", 1.0),
        lambda: AmbientMetric("hyperbolic", 0.0, QSpec(0.1)),
        lambda: QSpec(0.1, decay_rate=2.0),
        lambda: QSpec(0.1, modes=(0.7, 0.7)),
        lambda: QSpec(0.1, modes=()),
        lambda: eval_metric(HYP, Point(0.05, 1.0)),
    ],
)
def test_invalid_inputs_raise(build):
    with pytest.raises(ValueError):
        build()


def test_ads_scalar_decay_rate_is_measured_above_three():
    # fitted alpha in R+6 = O(e^{-alpha r}); extended precision keeps the tail above round-off
    r = np.linspace(3.0, 8.0, 11).astype(np.longdouble)
    K = curvature(ADS, (r, np.full_like(r, 1.0)))
    slope = np.polyfit(r.astype(float), np.log(np.abs((K.scalar + 6.0).astype(float))), 1)[0]
    assert -slope == pytest.approx(5.0, abs=0.05)
    assert -slope > 3.0
