"""Base domains, cylinders, boundary neighbourhoods and the special points
(corkscrews, tangent-ball centres) used by the boundary estimates.

Every domain exposes a vectorized signed distance ``sd(X)`` (negative
inside, zero on the boundary).  For intersections built with
:class:`Window` the value is only a level function with the right sign and
zero set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeometryError",
    "Domain",
    "Interval",
    "HalfSpace",
    "Disk",
    "Square",
    "Stadium",
    "Sector",
    "SawtoothGraph",
    "Window",
    "Cylinder",
    "Region",
    "psi_box",
    "surface_ball",
    "parabolic_ball",
    "cone",
    "wedge",
    "harnack_box",
    "shrunk_cylinder",
    "interior_slab",
    "lens",
    "lens_boundary",
    "inward_normal",
    "corkscrew_points",
    "xi_points",
    "region_contains",
    "normal_angle_check",
    "lens_distance_ratio",
    "make_domain",
]

ON_BOUNDARY_RTOL = 1e-12


class GeometryError(ValueError):
    pass


def _pts(X, dim):
    X = np.asarray(X, dtype=float)
    if dim == 1 and (X.ndim == 0 or X.shape[-1] != 1):
        X = X[..., None]
    if X.shape[-1] != dim:
        raise GeometryError(f"expected points of dimension {dim}, got shape {X.shape}")
    return X


def _seg_dist(X, A, B):
    """Distance from points X (..., 2) to the segment [A, B]."""
    d = B - A
    L2 = float(d @ d)
    s = np.clip(((X - A) @ d) / L2, 0.0, 1.0)
    P = A + s[..., None] * d
    return np.linalg.norm(X - P, axis=-1)


class Domain:
    """Bounded (or model) spatial base domain."""

    kind = "domain"
    dim = 2
    lipschitz_m = 0.0

    # -- to be provided by subclasses
    def sd(self, X) -> np.ndarray:
        raise NotImplementedError

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _normal(self, Q) -> np.ndarray:
        raise NotImplementedError

    def tangent_radius(self) -> float:
        """Radius of the uniform interior/exterior tangent balls (0 if none)."""
        return 0.0

    def params(self) -> dict:
        return {}

    # -- shared behaviour
    @property
    def is_c11(self) -> bool:
        return self.tangent_radius() > 0

    @property
    def r0(self) -> float:
        """Localization radius: half the tangent radius for C^{1,1} bases."""
        return 0.5 * self.tangent_radius()

    def scale(self) -> float:
        lo, hi = self.bbox()
        ext = hi - lo
        ext = ext[np.isfinite(ext)]
        return float(ext.max()) if ext.size else 1.0

    def contains(self, X, closed: bool = False, tol: float = 0.0) -> np.ndarray:
        d = self.sd(_pts(X, self.dim))
        return d <= tol if closed else d < -tol

    def check_on_boundary(self, Q) -> np.ndarray:
        Q = _pts(Q, self.dim)
        d = float(np.abs(self.sd(Q)))
        if d > ON_BOUNDARY_RTOL * max(1.0, self.scale()):
            raise GeometryError(f"point {Q.tolist()} is not on the boundary (distance {d:.3e})")
        return Q

    def normal(self, Q) -> np.ndarray:
        Q = self.check_on_boundary(Q)
        return self._normal(Q)

    def corkscrew_direction(self, Q) -> np.ndarray:
        return self.normal(Q)

    def boundary_samples(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, **self.params()}


@dataclass(frozen=True)
class Interval(Domain):
    a: float = 0.0
    b: float = 1.0
    kind = "interval"
    dim = 1

    def __post_init__(self):
        if not self.b > self.a:
            raise GeometryError("interval needs a < b")

    def sd(self, X):
        x = _pts(X, 1)[..., 0]
        return np.maximum(self.a - x, x - self.b)

    def bbox(self):
        return np.array([self.a]), np.array([self.b])

    def _normal(self, Q):
        return np.array([1.0]) if abs(Q[0] - self.a) <= abs(Q[0] - self.b) else np.array([-1.0])

    def tangent_radius(self):
        return 0.5 * (self.b - self.a)

    def boundary_samples(self, n):
        return np.array([[self.a], [self.b]])

    def params(self):
        return {"a": self.a, "b": self.b}


@dataclass(frozen=True)
class HalfSpace(Domain):
    """Model flat domain {x_n > 0}."""

    n: int = 2
    kind = "halfspace"

    @property
    def dim(self):
        return self.n

    def sd(self, X):
        return -_pts(X, self.n)[..., -1]

    def bbox(self):
        lo = np.full(self.n, -np.inf)
        lo[-1] = 0.0
        return lo, np.full(self.n, np.inf)

    def scale(self):
        return 1.0

    def _normal(self, Q):
        e = np.zeros(self.n)
        e[-1] = 1.0
        return e

    def tangent_radius(self):
        return math.inf

    @property
    def r0(self):
        return math.inf

    def boundary_samples(self, n, extent: float = 1.0):
        if self.n == 1:
            return np.zeros((1, 1))
        s = np.linspace(-extent, extent, n)
        if self.n == 2:
            return np.stack([s, np.zeros_like(s)], axis=1)
        g = np.stack(np.meshgrid(s, s, indexing="ij"), axis=-1).reshape(-1, 2)
        return np.concatenate([g, np.zeros((len(g), 1))], axis=1)

    def params(self):
        return {"n": self.n}


@dataclass(frozen=True)
class Disk(Domain):
    """Disk (n=2) or ball (n=3)."""

    radius: float = 1.0
    center: tuple = (0.0, 0.0)
    kind = "disk"

    def __post_init__(self):
        if self.radius <= 0:
            raise GeometryError("radius must be positive")
        if len(self.center) not in (2, 3):
            raise GeometryError("disk center must be 2-D or 3-D")

    @property
    def dim(self):
        return len(self.center)

    def sd(self, X):
        return np.linalg.norm(_pts(X, self.dim) - np.asarray(self.center), axis=-1) - self.radius

    def bbox(self):
        c = np.asarray(self.center, float)
        return c - self.radius, c + self.radius

    def _normal(self, Q):
        v = np.asarray(self.center) - Q
        return v / np.linalg.norm(v)

    def tangent_radius(self):
        return self.radius

    def boundary_samples(self, n):
        c = np.asarray(self.center, float)
        if self.dim == 2:
            th = np.linspace(0, 2 * np.pi, n, endpoint=False)
            return c + self.radius * np.stack([np.cos(th), np.sin(th)], axis=1)
        # Fibonacci sphere
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        phi = np.pi * (1 + 5 ** 0.5) * k
        rr = np.sqrt(1 - z * z)
        return c + self.radius * np.stack([rr * np.cos(phi), rr * np.sin(phi), z], axis=1)

    def params(self):
        return {"radius": self.radius, "center": list(self.center)}


@dataclass(frozen=True)
class Stadium(Domain):
    """Square of given side centred at the origin, corners rounded with
    radius ``corner_radius`` (``corner_radius=0`` is the plain square)."""

    side: float = 2.0
    corner_radius: float = 0.25
    kind = "stadium"
    dim = 2

    def __post_init__(self):
        if self.side <= 0 or not 0 <= self.corner_radius <= self.side / 2:
            raise GeometryError("invalid stadium parameters")

    def sd(self, X):
        X = _pts(X, 2)
        b = self.side / 2 - self.corner_radius
        q = np.abs(X) - b
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside - self.corner_radius

    def bbox(self):
        s = self.side / 2
        return np.array([-s, -s]), np.array([s, s])

    def _normal(self, Q):
        b = self.side / 2 - self.corner_radius
        q = np.abs(Q) - b
        tol = ON_BOUNDARY_RTOL * self.side
        if q[0] > tol and q[1] > tol:
            if self.corner_radius == 0:
                raise GeometryError("normal undefined at a corner")
            v = -np.sign(Q) * np.maximum(q, 0.0)
            return v / np.linalg.norm(v)
        if self.corner_radius == 0 and abs(q[0]) <= tol and abs(q[1]) <= tol:
            raise GeometryError("normal undefined at a corner")
        i = int(np.argmax(q))
        v = np.zeros(2)
        v[i] = -np.sign(Q[i])
        return v

    def tangent_radius(self):
        return self.corner_radius

    @property
    def r0(self):
        if self.corner_radius > 0:
            return 0.5 * self.corner_radius
        return 0.5 * self.side

    def boundary_samples(self, n):
        t = np.linspace(0, 1, n, endpoint=False)
        s = self.side / 2
        pts = np.concatenate([
            np.stack([-s + 2 * s * t, -s + 0 * t], 1), np.stack([s + 0 * t, -s + 2 * s * t], 1),
            np.stack([s - 2 * s * t, s + 0 * t], 1), np.stack([-s + 0 * t, s - 2 * s * t], 1)])
        # project onto the rounded boundary along the signed distance gradient
        for _ in range(3):
            d = self.sd(pts)
            g = _num_grad(self.sd, pts)
            pts = pts - d[:, None] * g
        return pts

    def params(self):
        return {"side": self.side, "corner_radius": self.corner_radius}


def Square(side: float = 2.0) -> Stadium:
    """Plain square (Lipschitz, normal undefined at its corners)."""
    return Stadium(side=side, corner_radius=0.0)


def _num_grad(f, X, h=1e-7):
    g = np.zeros_like(X)
    for i in range(X.shape[-1]):
        e = np.zeros(X.shape[-1])
        e[i] = h
        g[..., i] = (f(X + e) - f(X - e)) / (2 * h)
    n = np.linalg.norm(g, axis=-1, keepdims=True)
    return g / np.where(n > 0, n, 1.0)


@dataclass(frozen=True)
class Sector(Domain):
    """Circular sector {0 < angle < omega, |x| < radius} with vertex at 0."""

    omega: float = 1.5 * math.pi
    radius: float = 1.0
    kind = "sector"
    dim = 2

    def __post_init__(self):
        if not 0 < self.omega < 2 * math.pi:
            raise GeometryError("sector aperture must lie in (0, 2*pi)")
        if self.radius <= 0:
            raise GeometryError("radius must be positive")

    @property
    def r0(self):
        return self.radius

    @property
    def lipschitz_m(self):
        # slope of the boundary rays seen from the bisector axis
        half = self.omega / 2
        return abs(math.tan(half)) if abs(half - math.pi / 2) > 1e-12 else 0.0

    def _angle(self, X):
        return np.mod(np.arctan2(X[..., 1], X[..., 0]), 2 * np.pi)

    def sd(self, X):
        X = _pts(X, 2)
        R = self.radius
        e0 = np.array([R, 0.0])
        e1 = R * np.array([math.cos(self.omega), math.sin(self.omega)])
        O = np.zeros(2)
        d = np.minimum(_seg_dist(X, O, e0), _seg_dist(X, O, e1))
        ang = self._angle(X)
        rho = np.linalg.norm(X, axis=-1)
        in_wedge = (ang > 0) & (ang < self.omega)
        d_arc = np.where(in_wedge, np.abs(rho - R),
                         np.minimum(np.linalg.norm(X - e0, axis=-1), np.linalg.norm(X - e1, axis=-1)))
        d = np.minimum(d, d_arc)
        inside = in_wedge & (rho < R)
        return np.where(inside, -d, d)

    def bbox(self):
        th = np.linspace(0, self.omega, 721)
        pts = np.concatenate([[[0.0, 0.0]], self.radius * np.stack([np.cos(th), np.sin(th)], 1)])
        return pts.min(0), pts.max(0)

    def _normal(self, Q):
        R = self.radius
        tol = ON_BOUNDARY_RTOL * R * 10
        rho = float(np.linalg.norm(Q))
        if rho <= tol:
            raise GeometryError("normal undefined at the sector vertex")
        ang = float(self._angle(Q))
        on_arc = abs(rho - R) <= tol
        on_e0 = abs(Q[1]) <= tol and Q[0] > 0
        on_e1 = abs(ang - self.omega) <= tol / rho or abs(ang - self.omega + 2 * np.pi) <= tol / rho
        if on_arc and (on_e0 or on_e1):
            raise GeometryError("normal undefined at an arc corner")
        if on_arc:
            return -Q / rho
        if on_e0:
            return np.array([0.0, 1.0])
        return np.array([math.sin(self.omega), -math.cos(self.omega)])

    def corkscrew_direction(self, Q):
        Q = self.check_on_boundary(Q)
        if np.linalg.norm(Q) <= ON_BOUNDARY_RTOL * self.radius * 10:
            b = self.omega / 2
            return np.array([math.cos(b), math.sin(b)])
        return self._normal(Q)

    def boundary_samples(self, n):
        R = self.radius
        s = np.linspace(0, R, n, endpoint=False)
        th = np.linspace(0, self.omega, n, endpoint=False)
        c, sn = math.cos(self.omega), math.sin(self.omega)
        return np.concatenate([
            np.stack([s, 0 * s], 1), np.stack([s * c, s * sn], 1),
            R * np.stack([np.cos(th), np.sin(th)], 1)])

    def params(self):
        return {"omega": self.omega, "radius": self.radius}


@dataclass(frozen=True)
class SawtoothGraph(Domain):
    """{|x1| < half_width, phi(x1) < x2 < height} with phi a sawtooth of
    slope +-m and the given period; phi(0) = 0 is a downward kink."""

    m: float = 1.0
    period: float = 0.5
    half_width: float = 1.0
    height: float = 1.0
    localization: float = 0.5
    kind = "lipschitz_graph"
    dim = 2

    def __post_init__(self):
        if self.m < 0 or self.localization <= 0 or self.period <= 0:
            raise GeometryError("invalid sawtooth parameters")

    @property
    def lipschitz_m(self):
        return self.m

    @property
    def r0(self):
        return self.localization

    def profile(self, x1):
        p = self.period
        u = np.mod(np.asarray(x1, float) + p / 2, p) - p / 2
        return self.m * np.abs(u)

    def _vertices(self):
        L, p = self.half_width, self.period
        k = np.arange(math.floor(-L / p * 2) - 1, math.ceil(L / p * 2) + 2) * (p / 2)
        xs = np.concatenate([[-L], k[(k > -L) & (k < L)], [L]])
        graph = np.stack([xs, self.profile(xs)], 1)
        return np.concatenate([graph, [[L, self.height], [-L, self.height]]])

    def sd(self, X):
        X = _pts(X, 2)
        V = self._vertices()
        d = np.full(X.shape[:-1], np.inf)
        for i in range(len(V)):
            d = np.minimum(d, _seg_dist(X, V[i], V[(i + 1) % len(V)]))
        inside = (np.abs(X[..., 0]) < self.half_width) & (X[..., 1] > self.profile(X[..., 0])) & (
            X[..., 1] < self.height)
        return np.where(inside, -d, d)

    def bbox(self):
        V = self._vertices()
        return V.min(0), V.max(0)

    def _normal(self, Q):
        tol = 1e-9
        if abs(Q[1] - self.profile(Q[0])) > tol or abs(Q[0]) >= self.half_width - tol:
            raise GeometryError("normal only defined on the graph part of the boundary")
        p = self.period
        u = (Q[0] + p / 2) % p - p / 2
        if abs(u) < tol or abs(abs(u) - p / 2) < tol:
            raise GeometryError("normal undefined at a kink")
        slope = self.m * np.sign(u)
        v = np.array([-slope, 1.0])
        return v / np.linalg.norm(v)

    def corkscrew_direction(self, Q):
        self.check_on_boundary(Q)
        return np.array([0.0, 1.0])

    def boundary_samples(self, n):
        x = np.linspace(-self.half_width, self.half_width, n)
        return np.stack([x, self.profile(x)], 1)

    def params(self):
        return {"m": self.m, "period": self.period, "half_width": self.half_width,
                "height": self.height, "localization": self.localization}


@dataclass(frozen=True)
class Window(Domain):
    """Intersection of a base domain with an open ball; used to localise
    solutions near a boundary point."""

    base: Domain = field(default_factory=Disk)
    center: tuple = (1.0, 0.0)
    radius: float = 0.5
    kind = "window"

    @property
    def dim(self):
        return self.base.dim

    @property
    def lipschitz_m(self):
        return self.base.lipschitz_m

    def sd(self, X):
        X = _pts(X, self.dim)
        return np.maximum(self.base.sd(X),
                          np.linalg.norm(X - np.asarray(self.center), axis=-1) - self.radius)

    def bbox(self):
        lo, hi = self.base.bbox()
        c = np.asarray(self.center, float)
        return np.maximum(lo, c - self.radius), np.minimum(hi, c + self.radius)

    def scale(self):
        return 2 * self.radius

    def _normal(self, Q):
        return self.base._normal(Q)

    def normal(self, Q):
        Q = _pts(Q, self.dim)
        self.base.check_on_boundary(Q)
        return self.base._normal(Q)

    def corkscrew_direction(self, Q):
        return self.base.corkscrew_direction(Q)

    def tangent_radius(self):
        return self.base.tangent_radius()

    @property
    def r0(self):
        return self.base.r0

    def boundary_samples(self, n):
        B = self.base.boundary_samples(n)
        return B[np.linalg.norm(B - np.asarray(self.center), axis=-1) < self.radius]

    def params(self):
        return {"base": self.base.describe(), "center": list(self.center), "radius": self.radius}


def make_domain(spec: dict) -> Domain:
    """Build a domain from a plain dict such as ``{"kind": "disk", "radius": 1}``.

    Accepts the output of :meth:`Domain.describe`, whose ``dim`` entry is
    checked against the constructed domain.
    """
    spec = dict(spec)
    kind = spec.pop("kind")
    dim = spec.pop("dim", None)
    dom = _make_domain(kind, spec)
    if dim is not None and dom.dim != dim:
        raise GeometryError(f"{kind} has dimension {dom.dim}, not {dim}")
    return dom


def _make_domain(kind: str, spec: dict) -> Domain:
    if kind == "interval":
        return Interval(**spec)
    if kind == "halfspace":
        return HalfSpace(**spec)
    if kind == "disk":
        if "center" in spec:
            spec["center"] = tuple(spec["center"])
        return Disk(**spec)
    if kind == "square":
        return Square(**spec)
    if kind == "stadium":
        return Stadium(**spec)
    if kind == "sector":
        return Sector(**spec)
    if kind == "lipschitz_graph":
        return SawtoothGraph(**spec)
    if kind == "window":
        base = make_domain(spec.pop("base"))
        return Window(base=base, center=tuple(spec["center"]), radius=spec["radius"])
    raise GeometryError(f"unknown domain kind {kind!r}")


# ---------------------------------------------------------------------------
# cylinders and regions

@dataclass(frozen=True)
class Cylinder:
    base: Domain
    T: float

    def __post_init__(self):
        if not self.T > 0:
            raise GeometryError("horizon T must be positive")

    def contains(self, X, t, closed=False):
        t = np.asarray(t, float)
        inside = self.base.contains(X, closed=closed)
        if closed:
            return inside & (t >= 0) & (t <= self.T)
        return inside & (t > 0) & (t < self.T)

    def on_lateral(self, X, t, tol=1e-12):
        d = np.abs(self.base.sd(X))
        t = np.asarray(t, float)
        return (d <= tol * max(1.0, self.base.scale())) & (t > 0) & (t < self.T)

    def on_parabolic_boundary(self, X, t, tol=1e-12):
        t = np.asarray(t, float)
        bottom = self.base.contains(X, closed=True) & (np.abs(t) <= tol)
        return self.on_lateral(X, t, tol) | bottom


@dataclass
class Region:
    """A space-time set with a membership predicate.

    ``pred(X, t, tol)`` returns a boolean array; ``tol`` relaxes closed
    constraints for sampling-on-the-boundary purposes.  ``parts`` lists the
    parabolic balls whose spheres bound the region (used for sampling).
    """

    kind: str
    params: dict
    pred: object
    dim: int
    bounds: tuple  # (xlo, xhi, tlo, thi)
    parts: tuple = ()

    def contains(self, X, t, tol: float = 0.0):
        X = _pts(X, self.dim)
        t = np.asarray(t, float)
        return self.pred(X, t, tol)

    def sample(self, per_unit: int = 64, unit: float = 1.0, boundary: bool = True,
               rng_free: bool = True):
        """Deterministic samples: a tensor grid over the bounding box at
        ``per_unit`` points per ``unit`` length (per unit**2 in time) plus
        points on the bounding spheres of the constituent balls."""
        xlo, xhi, tlo, thi = self.bounds
        axes = []
        for lo, hi in zip(xlo, xhi):
            k = max(3, int(math.ceil((hi - lo) / unit * per_unit)) + 1)
            axes.append(np.linspace(lo, hi, k))
        k = max(3, int(math.ceil((thi - tlo) / unit ** 2 * per_unit)) + 1)
        axes.append(np.linspace(tlo, thi, k))
        G = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim + 1)
        pts = [G]
        if boundary:
            for (c, tau, delta) in self.parts:
                pts.append(_pball_surface(np.asarray(c, float), tau, delta, per_unit, unit))
        P = np.concatenate(pts)
        scale = max(1.0, float(np.max(np.abs(P))))
        keep = self.contains(P[:, :-1], P[:, -1], tol=1e-12 * scale)
        return P[keep, :-1], P[keep, -1]


def _pball_surface(c, tau, delta, per_unit, unit):
    """Points on {|x-c|^2 + |t-tau| = delta^2}."""
    n = len(c)
    k = max(8, int(math.ceil(delta / unit * per_unit)) * 4)
    rho = delta * np.sin(np.linspace(0, np.pi / 2, k))  # spatial radius
    dt = delta ** 2 - rho ** 2
    out = []
    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif n == 2:
        th = np.linspace(0, 2 * np.pi, 4 * k, endpoint=False)
        dirs = np.stack([np.cos(th), np.sin(th)], 1)
    else:
        m = 4 * k * k
        j = np.arange(m) + 0.5
        z = 1 - 2 * j / m
        ph = np.pi * (1 + 5 ** 0.5) * j
        rr = np.sqrt(1 - z * z)
        dirs = np.stack([rr * np.cos(ph), rr * np.sin(ph), z], 1)
    for sgn in (1.0, -1.0):
        X = c + rho[:, None, None] * dirs[None, :, :]
        T = np.broadcast_to((tau + sgn * dt)[:, None], X.shape[:2])
        out.append(np.concatenate([X.reshape(-1, n), T.reshape(-1, 1)], 1))
    return np.concatenate(out)


def _in_pball(X, t, c, tau, delta, tol):
    return np.sum((X - c) ** 2, axis=-1) + np.abs(t - tau) <= delta ** 2 + tol


def parabolic_ball(center, tau: float, delta: float) -> Region:
    """Closed parabolic ball P_delta = {|x-y|^2 + |t-tau| <= delta^2}."""
    c = np.atleast_1d(np.asarray(center, float))
    pred = lambda X, t, tol: _in_pball(X, t, c, tau, delta, tol)  # noqa: E731
    return Region("parabolic_ball", {"center": c.tolist(), "tau": tau, "delta": delta}, pred, len(c),
                  (c - delta, c + delta, tau - delta ** 2, tau + delta ** 2), ((c, tau, delta),))


def psi_box(cyl: Cylinder, Q, s: float, r: float) -> Region:
    """Psi_r(Q,s) = {(x,t) in closed cylinder : |x-Q| < r, |t-s| < r^2}."""
    Q = np.atleast_1d(np.asarray(Q, float))

    def pred(X, t, tol):
        return (cyl.base.sd(X) <= tol) & (t >= -tol) & (t <= cyl.T + tol) & (
            np.linalg.norm(X - Q, axis=-1) < r + tol) & (np.abs(t - s) < r * r + tol)

    return Region("psi_box", {"Q": Q.tolist(), "s": s, "r": r}, pred, len(Q),
                  (Q - r, Q + r, max(0.0, s - r * r), min(cyl.T, s + r * r)))


def surface_ball(cyl: Cylinder, Q, s: float, r: float, tol_on: float = 1e-12) -> Region:
    """Delta_r(Q,s): the part of the parabolic boundary inside Psi_r(Q,s)."""
    Q = np.atleast_1d(np.asarray(Q, float))
    box = psi_box(cyl, Q, s, r)

    def pred(X, t, tol):
        scale = max(1.0, cyl.base.scale())
        on = cyl.on_parabolic_boundary(X, t, tol=tol_on + tol / scale)
        return on & box.pred(X, t, tol)

    return Region("surface_ball", {"Q": Q.tolist(), "s": s, "r": r}, pred, len(Q), box.bounds)


def cone(theta: float, r: float, dim: int = 2, vertex=None, axis=None) -> Region:
    """Truncated cone {|x - x0| < r, angle(x - x0, axis) <= theta} with its vertex."""
    x0 = np.zeros(dim) if vertex is None else np.asarray(vertex, float)
    e = np.eye(dim)[-1] if axis is None else np.asarray(axis, float) / np.linalg.norm(axis)

    def pred_x(X, tol):
        Y = X - x0
        rho = np.linalg.norm(Y, axis=-1)
        cosang = np.where(rho > 0, (Y @ e) / np.where(rho > 0, rho, 1.0), 1.0)
        ang = np.arccos(np.clip(cosang, -1, 1))
        return (rho < r + tol) & ((ang <= theta + tol) | (rho == 0))

    return Region("cone", {"theta": theta, "r": r, "vertex": x0.tolist(), "axis": e.tolist()},
                  lambda X, t, tol: pred_x(X, tol), dim, (x0 - r, x0 + r, 0.0, 0.0))


def wedge(theta: float, r: float, dim: int = 2) -> Region:
    """Parabolic wedge Gamma_{theta,r} x (-r^2, r^2)."""
    c = cone(theta, r, dim)

    def pred(X, t, tol):
        return c.pred(X, t, tol) & (np.abs(t) < r * r + tol)

    return Region("wedge", {"theta": theta, "r": r}, pred, dim,
                  (np.full(dim, -r), np.full(dim, r), -r * r, r * r))


def harnack_box(eta: float, r: float, dim: int = 2) -> Region:
    """Q(eta, r) = {max_i |x_i| <= r, 0 < t <= eta r^2}."""
    if eta <= 1:
        raise GeometryError("eta must exceed 1")

    def pred(X, t, tol):
        return (np.max(np.abs(X), axis=-1) <= r + tol) & (t > -tol) & (t <= eta * r * r + tol)

    return Region("harnack_box", {"eta": eta, "r": r}, pred, dim,
                  (np.full(dim, -r), np.full(dim, r), 0.0, eta * r * r))


def shrunk_cylinder(cyl: Cylinder, delta: float) -> Region:
    """C_{delta,T} = {dist(x, boundary) > delta} x (delta^2, T)."""
    lo, hi = cyl.base.bbox()

    def pred(X, t, tol):
        return (cyl.base.sd(X) < -delta + tol) & (t > delta * delta - tol) & (t < cyl.T + tol)

    return Region("shrunk_cylinder", {"delta": delta}, pred, cyl.base.dim, (lo, hi, delta * delta, cyl.T))


def interior_slab(cyl: Cylinder, delta: float) -> Region:
    """F = Omega x (2 delta^2, T - delta^2)."""
    lo, hi = cyl.base.bbox()

    def pred(X, t, tol):
        return (cyl.base.sd(X) < tol) & (t > 2 * delta * delta - tol) & (t < cyl.T - delta * delta + tol)

    return Region("interior_slab", {"delta": delta}, pred, cyl.base.dim,
                  (lo, hi, 2 * delta * delta, cyl.T - delta * delta))


def lens(domain: Domain, Q, s: float, r: float) -> Region:
    """S_r(Q,s) = P_{r/8}(Q,s) intersected with P_{r/4}(xi1(Q),s)."""
    Q = np.atleast_1d(np.asarray(Q, float))
    xi1, _ = xi_points(domain, Q, r)

    def pred(X, t, tol):
        return _in_pball(X, t, Q, s, r / 8, tol) & _in_pball(X, t, xi1, s, r / 4, tol)

    return Region("lens", {"Q": Q.tolist(), "s": s, "r": r, "xi1": xi1.tolist()}, pred, len(Q),
                  (Q - r / 8, Q + r / 8, s - r * r / 64, s + r * r / 64),
                  ((Q, s, r / 8), (xi1, s, r / 4)))


def lens_boundary(domain: Domain, Q, s: float, r: float, which: int, tol_on: float = 1e-12) -> Region:
    """Phi^1_r (on the sphere of P_{r/4}(xi1)) or Phi^2_r (on the sphere of
    P_{r/8}(Q)) part of the lens boundary."""
    if which not in (1, 2):
        raise GeometryError("which must be 1 or 2")
    L = lens(domain, Q, s, r)
    Q = np.atleast_1d(np.asarray(Q, float))
    xi1 = np.asarray(L.params["xi1"])
    c, delta = (xi1, r / 4) if which == 1 else (Q, r / 8)

    def pred(X, t, tol):
        lev = np.sum((X - c) ** 2, axis=-1) + np.abs(t - s)
        on = np.abs(lev - delta ** 2) <= tol_on * max(1.0, delta ** 2) + tol
        return on & L.pred(X, t, tol)

    return Region(f"lens_boundary_{which}", {**L.params, "which": which}, pred, len(Q), L.bounds,
                  ((c, s, delta),))


# ---------------------------------------------------------------------------
# operations on boundary points

def inward_normal(domain: Domain, Q) -> np.ndarray:
    """Interior unit normal at a boundary point where the boundary is smooth."""
    return domain.normal(Q)


def corkscrew_points(domain: Domain, Q, s: float, r: float, T: float | None = None):
    """Forward and backward corkscrew points (Q + r nu, s +- 2 r^2).

    For C^{1,1} bases ``nu`` is the inward normal and ``r`` may not exceed the
    interior tangent radius.  For Lipschitz bases ``nu`` is the graph axis
    (the bisector at a sector vertex) and ``r <= r0/10``.
    """
    Q = domain.check_on_boundary(Q)
    if r <= 0:
        raise GeometryError("r must be positive")
    if s - 2 * r * r <= 0:
        raise GeometryError(f"s - 2r^2 = {s - 2 * r * r:.3g} must be positive")
    if T is not None and s + 2 * r * r >= T:
        raise GeometryError(f"s + 2r^2 = {s + 2 * r * r:.3g} must be below T = {T}")
    if domain.is_c11:
        if r > domain.tangent_radius():
            raise GeometryError(f"r = {r} exceeds the interior tangent radius {domain.tangent_radius()}")
    elif r > domain.r0 / 10:
        raise GeometryError(f"r = {r} exceeds r0/10 = {domain.r0 / 10}")
    nu = domain.corkscrew_direction(Q)
    x = Q + r * nu
    if not domain.contains(x):
        raise GeometryError("corkscrew point falls outside the domain")
    return (x, s + 2 * r * r), (x.copy(), s - 2 * r * r)


def xi_points(domain: Domain, Q, r: float):
    """Centres xi1 = Q + (r/4) nu (interior) and xi2 = Q - (r/16) nu (exterior)."""
    if not domain.is_c11:
        raise GeometryError("xi points need a C^{1,1} base")
    if r > domain.r0:
        raise GeometryError(f"r = {r} exceeds the tangency threshold r0 = {domain.r0}")
    nu = domain.normal(Q)
    Q = np.atleast_1d(np.asarray(Q, float))
    return Q + (r / 4) * nu, Q - (r / 16) * nu


def region_contains(region: Region, z) -> bool:
    """Membership of a single point-time ``z = (x, t)``."""
    x, t = z
    return bool(region.contains(np.atleast_1d(np.asarray(x, float)), float(t)))


def normal_angle_check(domain: Domain, Q0, Q, r: float) -> bool:
    """True iff <nu_Q, nu_Q0> >= 1/4 (requires |Q - Q0| <= r)."""
    Q0 = np.atleast_1d(np.asarray(Q0, float))
    Q = np.atleast_1d(np.asarray(Q, float))
    if np.linalg.norm(Q - Q0) > r * (1 + 1e-12):
        raise GeometryError("|Q - Q0| exceeds r")
    return bool(domain.normal(Q) @ domain.normal(Q0) >= 0.25)


def lens_distance_ratio(domain: Domain, Q, s: float, r: float, per_unit: int = 256) -> float:
    """Measured dist(Phi^2_r, lateral boundary) / r for the given domain."""
    B = lens_boundary(domain, Q, s, r, which=2)
    X, _ = B.sample(per_unit=per_unit, unit=r, boundary=True)
    if len(X) == 0:
        raise GeometryError("no samples on the lens boundary")
    return float(np.min(-domain.sd(X)) / r)
