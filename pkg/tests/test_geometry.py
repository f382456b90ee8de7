import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bhlab import geometry as geo

coord = st.floats(-1.5, 1.5, allow_nan=False)
point2 = st.tuples(coord, coord).map(np.array)

DOMAINS = [geo.Interval(0.0, 2.0), geo.HalfSpace(2), geo.Disk(1.5, (0.0, 1.0)), geo.Disk(1.0, (0.0, 0.0, 0.0)),
           geo.Square(2.0), geo.Stadium(2.0, 0.3), geo.Sector(1.5 * math.pi, 1.0), geo.SawtoothGraph(),
           geo.Window(geo.Disk(), (1.0, 0.0), 0.3)]


def _polyline_distance(X, P):
    """Brute-force distance from points X to a densely sampled curve P."""
    return np.min(np.linalg.norm(X[:, None, :] - P[None, :, :], axis=-1), axis=1)


def _sector_boundary(omega, R, n=20001):
    s = np.linspace(0, R, n)[:, None]
    ang = np.linspace(0, omega, n)
    return np.concatenate([s * [1.0, 0.0], s * [math.cos(omega), math.sin(omega)],
                           R * np.stack([np.cos(ang), np.sin(ang)], 1)])


def _stadium_boundary(side, rc, n=8001):
    h = side / 2
    pts = []
    for sx in (-1, 1):
        for sy in (-1, 1):
            ang = np.linspace(0, math.pi / 2, n)
            c = np.array([sx * (h - rc), sy * (h - rc)])
            pts.append(c + rc * np.stack([sx * np.cos(ang), sy * np.sin(ang)], 1))
    s = np.linspace(-(h - rc), h - rc, n)
    for sgn in (-1, 1):
        pts.append(np.stack([np.full(n, sgn * h), s], 1))
        pts.append(np.stack([s, np.full(n, sgn * h)], 1))
    return np.concatenate(pts)


@pytest.mark.parametrize("dom", DOMAINS, ids=lambda d: d.kind)
def test_describe_round_trip(dom):
    assert geo.make_domain(dom.describe()) == dom


def test_make_domain_rejects_bad_input():
    with pytest.raises(geo.GeometryError):
        geo.make_domain({"kind": "torus"})
    with pytest.raises(geo.GeometryError):
        geo.make_domain({"kind": "disk", "dim": 3})


@pytest.mark.parametrize("bad", [lambda: geo.Interval(1, 1), lambda: geo.Disk(0.0), lambda: geo.Sector(2 * math.pi),
                                 lambda: geo.Stadium(2.0, 1.5), lambda: geo.Cylinder(geo.Disk(), 0.0)])
def test_invalid_parameters(bad):
    with pytest.raises(geo.GeometryError):
        bad()


@given(point2, point2)
def test_disk_sd_is_exact_and_1_lipschitz(x, y):
    d = geo.Disk(1.0)
    assert d.sd(x[None])[0] == pytest.approx(np.linalg.norm(x) - 1.0, abs=1e-15)
    assert abs(d.sd(x[None])[0] - d.sd(y[None])[0]) <= np.linalg.norm(x - y) + 1e-12


@pytest.mark.parametrize("omega", [0.5 * math.pi, math.pi, 1.5 * math.pi, 1.75 * math.pi])
def test_sector_sd_matches_brute_force(omega):
    dom = geo.Sector(omega, 1.0)
    X = np.random.default_rng(0).uniform(-1.3, 1.3, (400, 2))
    ref = _polyline_distance(X, _sector_boundary(omega, 1.0))
    sd = dom.sd(X)
    assert np.allclose(np.abs(sd), ref, atol=2e-4)
    ang = np.mod(np.arctan2(X[:, 1], X[:, 0]), 2 * np.pi)
    inside = (ang < omega) & (np.linalg.norm(X, axis=1) < 1.0)
    clear = ref > 1e-3
    assert np.array_equal(sd[clear] < 0, inside[clear])


@pytest.mark.parametrize("rc", [0.0, 0.3])
def test_stadium_sd_matches_brute_force(rc):
    dom = geo.Stadium(2.0, rc)
    X = np.random.default_rng(1).uniform(-1.4, 1.4, (400, 2))
    ref = _polyline_distance(X, _stadium_boundary(2.0, rc))
    assert np.allclose(np.abs(dom.sd(X)), ref, atol=2e-4)


@pytest.mark.parametrize("dom", [geo.Disk(1.0), geo.Stadium(2.0, 0.3), geo.Sector(1.5 * math.pi, 1.0),
                                 geo.SawtoothGraph(), geo.Square(2.0)], ids=lambda d: d.kind)
def test_boundary_samples_lie_on_boundary(dom):
    B = dom.boundary_samples(64)
    assert len(B) > 0
    assert np.max(np.abs(dom.sd(B))) < 1e-12


def test_disk_normal_points_inward():
    ang = np.linspace(0, 2 * np.pi, 13)
    for a in ang:
        Q = np.array([math.cos(a), math.sin(a)])
        assert np.allclose(geo.inward_normal(geo.Disk(1.0), Q), -Q, atol=1e-12)


def test_normal_requires_boundary_point():
    with pytest.raises(geo.GeometryError):
        geo.Disk(1.0).normal([0.5, 0.0])


def test_corkscrew_points_on_disk():
    (xf, tf), (xb, tb) = geo.corkscrew_points(geo.Disk(1.0), [1.0, 0.0], 0.5, 0.2)
    assert np.allclose(xf, [0.8, 0.0]) and np.array_equal(xf, xb)
    assert tf == pytest.approx(0.58) and tb == pytest.approx(0.42)


@pytest.mark.parametrize("s, r, T", [(0.05, 0.2, None), (0.5, 1.5, None), (0.5, 0.2, 0.55)])
def test_corkscrew_points_reject_bad_scales(s, r, T):
    with pytest.raises(geo.GeometryError):
        geo.corkscrew_points(geo.Disk(1.0), [1.0, 0.0], s, r, T)


def test_corkscrew_at_sector_vertex_uses_bisector():
    (x, _), _ = geo.corkscrew_points(geo.Sector(1.5 * math.pi, 1.0), [0.0, 0.0], 0.5, 0.05)
    ang = math.atan2(x[1], x[0]) % (2 * math.pi)
    assert ang == pytest.approx(0.75 * math.pi) and np.linalg.norm(x) == pytest.approx(0.05)


@given(st.floats(0.0, 2 * math.pi), st.floats(0.01, 0.5))
def test_xi_points_straddle_the_boundary(a, r):
    dom = geo.Disk(1.0)
    Q = np.array([math.cos(a), math.sin(a)])
    xi1, xi2 = geo.xi_points(dom, Q, r)
    assert dom.sd(xi1[None])[0] == pytest.approx(-r / 4, abs=1e-12)
    assert dom.sd(xi2[None])[0] == pytest.approx(r / 16, abs=1e-12)


def test_xi_points_need_c11_base():
    with pytest.raises(geo.GeometryError):
        geo.xi_points(geo.Square(2.0), [1.0, 0.0], 0.1)


def test_parabolic_boundary_of_cylinder():
    cyl = geo.Cylinder(geo.Disk(1.0), 1.0)
    X = np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    t = np.array([0.5, 0.0, 0.5])
    assert cyl.on_parabolic_boundary(X, t).tolist() == [True, True, False]
    assert cyl.contains(X, t).tolist() == [False, False, True]


@given(st.floats(0.05, 0.4), st.floats(0.2, 1.0))
def test_parabolic_ball_contains_its_centre_only_nearby(delta, tau):
    B = geo.parabolic_ball(np.zeros(2), tau, delta)
    assert geo.region_contains(B, (np.zeros(2), tau))
    assert not geo.region_contains(B, (np.array([1.01 * delta, 0.0]), tau))


def test_region_samples_respect_bounds():
    reg = geo.lens(geo.Disk(1.0), np.array([1.0, 0.0]), 0.5, 0.25)
    X, t = reg.sample(32, 0.25)
    assert len(X) == len(t) > 0
    assert np.all(reg.contains(X, t, tol=1e-9))


def test_normal_angle_check_on_disk():
    dom = geo.Disk(1.0)
    Q0 = np.array([1.0, 0.0])
    near = np.array([math.cos(0.1), math.sin(0.1)])
    assert geo.normal_angle_check(dom, Q0, near, 0.2)
    with pytest.raises(geo.GeometryError):
        geo.normal_angle_check(dom, Q0, -Q0, 0.2)


def test_lens_stays_away_from_lateral_boundary():
    assert geo.lens_distance_ratio(geo.Disk(1.0), np.array([1.0, 0.0]), 0.5, 0.25) > 0
