import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bhlab import barriers as bar
from bhlab import geometry as geo
from bhlab.operators import Ellipticity


def _fd_jets(fun, X, t, h=1e-5):
    """Central-difference gradient and Hessian of fun(X, t) in space."""
    n = X.shape[-1]
    g = np.zeros(X.shape)
    H = np.zeros(X.shape + (n,))
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h
        g[:, i] = (fun(X + ei, t) - fun(X - ei, t)) / (2 * h)
        for j in range(n):
            ej = np.zeros(n)
            ej[j] = h
            H[:, i, j] = (fun(X + ei + ej, t) - fun(X + ei - ej, t) - fun(X - ei + ej, t)
                          + fun(X - ei - ej, t)) / (4 * h * h)
    return g, H


@pytest.fixture(scope="module")
def cone45():
    return bar.solve_cone_profile(math.pi / 4, Ellipticity(1, 2, 1.0))


def test_exp_jets_match_finite_differences():
    b = bar.ExpBarrier([0.2, -0.1], 0.5, 0.5, 8.0, gamma=2.0)
    rng = np.random.default_rng(0)
    X = rng.uniform(-0.3, 0.5, (20, 2))
    t = rng.uniform(0.55, 0.8, 20)
    t[::2] -= 0.5  # both sides of s
    val, grad, H, lo, hi = b.jets(X, t)
    g_fd, H_fd = _fd_jets(lambda Y, tt: b.jets(Y, tt)[0], X, t)
    assert np.allclose(grad, g_fd, atol=1e-6) and np.allclose(H, H_fd, atol=1e-4)
    dt = 1e-7
    ut = (b.jets(X, t + dt)[0] - b.jets(X, t - dt)[0]) / (2 * dt)
    assert np.array_equal(lo, hi) and np.allclose(lo, ut, atol=1e-5)


def test_exp_time_derivative_interval_at_kink():
    b = bar.ExpBarrier([0.0, 0.0], 0.5, 0.5, 4.0)
    _, _, _, lo, hi = b.jets(np.array([[0.1, 0.0]]), np.array([0.5]))
    assert lo[0] < 0 < hi[0] and lo[0] == -hi[0]


def test_power_jets_match_finite_differences():
    b = bar.PowerBarrier([1.0, 0.0], 0.5, 0.4, 3)
    rng = np.random.default_rng(1)
    # close to xi2, where gamma (r^2/R^2)^k is of order 1e-3
    ang = rng.uniform(0, 2 * np.pi, 20)
    rad = rng.uniform(0.05, 0.1, 20)
    X = np.array([1.0, 0.0]) + rad[:, None] * np.stack([np.cos(ang), np.sin(ang)], 1)
    t = rng.uniform(0.495, 0.499, 20)
    t[::2] = 1.0 - t[::2]  # both sides of s
    _, grad, H, lo, hi = b.jets(X, t)
    g_fd, H_fd = _fd_jets(lambda Y, tt: b.jets(Y, tt)[0], X, t, h=1e-5)
    scale = np.abs(H).max()
    assert np.allclose(grad, g_fd, rtol=1e-5, atol=1e-9) and np.allclose(H, H_fd, rtol=1e-3, atol=1e-4 * scale)
    dt = 1e-7
    ut = (b.jets(X, t + dt)[0] - b.jets(X, t - dt)[0]) / (2 * dt)
    assert np.allclose(lo, ut, rtol=1e-4)


def test_power_barrier_is_singular_at_centre():
    b = bar.PowerBarrier([0.0, 0.0], 0.5, 0.4, 2)
    with pytest.raises(bar.BarrierError):
        b.jets(np.zeros((1, 2)), np.array([0.5]))


@given(st.integers(1, 10), st.floats(0.05, 0.5))
@settings(max_examples=20)
def test_power_barrier_boundary_value(k, r):
    # on |x - xi2|^2 + |t - s| = (r/8)^2 the barrier equals 1 - 2^{-2k}
    b = bar.PowerBarrier([0.0, 0.0], 0.5, r, k)
    X = np.array([[r / 8, 0.0], [0.0, r / 16]])
    t = np.array([0.5, 0.5 + 3 * r * r / 256])
    assert np.allclose(b.jets(X, t)[0], 1 - 2.0 ** (-2 * k), rtol=0, atol=1e-12)


def test_exp_barrier_vanishes_on_outer_sphere():
    b = bar.ExpBarrier([0.0, 0.0], 0.5, 0.4, 16.0)
    X = np.array([[0.1, 0.0], [0.0, 0.06]])
    t = np.array([0.5, 0.5 + 0.01 - 0.0036])
    assert np.allclose(b.jets(X, t)[0], 0.0, atol=1e-14)


def test_single_point_jets():
    b = bar.ExpBarrier([0.0, 0.0], 0.5, 0.4, 16.0)
    j = bar.exp_barrier_jet(b, (np.array([0.05, 0.0]), 0.5))
    assert isinstance(j.ut, tuple) and j.D2u.shape == (2, 2)
    j = bar.power_barrier_jet(bar.PowerBarrier([1.0, 0.0], 0.5, 0.4, 2), (np.array([0.9, 0.0]), 0.6))
    assert isinstance(j.ut, float)


@pytest.mark.parametrize("omega_over_pi", [0.5, 1.0, 1.25, 1.75])
def test_critical_exponent_for_laplacian(omega_over_pi):
    omega = omega_over_pi * math.pi
    assert bar.critical_exponent(omega / 2, Ellipticity(1, 1)) == pytest.approx(math.pi / omega, rel=1e-8)


def test_critical_exponent_decreases_with_anisotropy():
    a1 = bar.critical_exponent(math.pi / 3, Ellipticity(1, 1))
    a2 = bar.critical_exponent(math.pi / 3, Ellipticity(1, 3))
    assert a2 < a1


def test_cone_profile_structure(cone45):
    c = cone45
    assert 0 < c.alpha < c.alpha_crit and c.forcing > 0 and c.R0 > 0
    h, hp, _ = c.profile(np.array([0.0, c.theta]))
    assert h[0] == pytest.approx(1.0) and hp[0] == pytest.approx(0.0, abs=1e-12) and h[1] > 0
    rep = bar.verify_differential_inequality(c, geo.cone(c.theta, c.R0, c.dim), c.ell, "supersolution_of_Lplus", 32)
    assert rep.passed


def test_wedge_rescaling_identity(cone45):
    wb = bar.build_wedge_barrier(cone45, cone45.R0 / 5)
    X, t = wb.region().sample(24, 2 * wb.r)
    keep = np.linalg.norm(X, axis=1) > 0
    r1, r2 = wb.residual(X[keep], t[keep]), wb.residual_via_scaling(X[keep], t[keep])
    assert np.allclose(r1, r2, rtol=1e-10, atol=1e-10)
    assert np.all(wb.value(X, t) >= 0)


def test_wedge_rejects_radius_beyond_R0(cone45):
    with pytest.raises(bar.BarrierError):
        bar.build_wedge_barrier(cone45, 2 * cone45.R0)


def test_calibration_uses_doubling_sequence():
    alpha, rep = bar.calibrate_exponent("exp_alpha", Ellipticity(1, 1), geo.HalfSpace(2), np.zeros(2), 0.5, 0.25)
    assert alpha in bar.DOUBLING and rep.passed
    # the previous member of the sequence fails when it was reachable from the guess
    if alpha / 2 >= rep.extra["guess"]:
        prev = bar.ExpBarrier(geo.xi_points(geo.HalfSpace(2), np.zeros(2), 0.25)[0], 0.5, 0.25, alpha / 2)
        assert not bar.verify_differential_inequality(prev, geo.lens(geo.HalfSpace(2), np.zeros(2), 0.5, 0.25),
                                                      Ellipticity(1, 1), "subsolution_of_Lminus").passed
    with pytest.raises(bar.BarrierError):
        bar.calibrate_exponent("gamma", Ellipticity(1, 1), geo.HalfSpace(2), np.zeros(2), 0.5, 0.25)


def test_verify_rejects_mismatched_requests():
    dom = geo.Disk(1.0)
    Q = np.array([1.0, 0.0])
    b = bar.ExpBarrier(geo.xi_points(dom, Q, 0.25)[0], 0.5, 0.25, 64)
    with pytest.raises(bar.BarrierError):
        bar.verify_differential_inequality(b, geo.lens(dom, Q, 0.5, 0.25), Ellipticity(1, 1), "supersolution_of_Lplus")
    with pytest.raises(bar.BarrierError):
        bar.verify_differential_inequality(b, geo.lens(dom, Q, 0.5, 0.25), Ellipticity(1, 1, 2.0), "subsolution_of_Lminus")
    with pytest.raises(bar.BarrierError):
        bar.verify_differential_inequality(object(), geo.lens(dom, Q, 0.5, 0.25), Ellipticity(1, 1),
                                           "subsolution_of_Lminus")


def test_margin_report_serializes_and_is_deterministic():
    dom = geo.Disk(1.0)
    Q = np.array([1.0, 0.0])
    args = (geo.lens(dom, Q, 0.5, 0.25), Ellipticity(1, 2), "subsolution_of_Lminus")
    b = bar.ExpBarrier(geo.xi_points(dom, Q, 0.25)[0], 0.5, 0.25, 2.0)
    r1 = bar.verify_differential_inequality(b, *args)
    r2 = bar.verify_differential_inequality(b, *args)
    assert r1.to_json() == r2.to_json()
    d = json.loads(r1.to_json())
    assert d["pass"] is False and d["min_margin"] < 0 and len(d["argmin"]) == 3
