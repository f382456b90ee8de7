"""Barrier functions and their numerical certificates.

Four barriers are provided:

* ``ConeBarrier``  phi = rho^alpha h(angle) on a truncated cone, built by
  shooting on the angular ODE of the Pucci-harmonic ansatz;
* ``WedgeBarrier`` psi = phi + (K / 2 kappa) |t|^kappa on the parabolic wedge,
  with the parabolic rescaling to radii r < R0;
* ``ExpBarrier``   h = gamma (exp(-alpha R^2 / r^2) - exp(-alpha / 16)),
  R^2 = |x - xi1|^2 + |t - s|;
* ``PowerBarrier`` f = 1 - gamma (r^2 / R1^2)^k, gamma = 256^-k,
  R1^2 = |x - xi2|^2 + |t - s|.

Jets are evaluated in closed form.  ``verify_differential_inequality``
samples a region and reports the worst margin of the required sign
condition, using the adverse end of the time-derivative interval on the
slice t = s where |t - s| is not differentiable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from . import geometry as geo
from .operators import Ellipticity, Jet, pucci_batch

__all__ = [
    "BarrierError",
    "ConeBarrier",
    "WedgeBarrier",
    "ExpBarrier",
    "PowerBarrier",
    "MarginReport",
    "solve_cone_profile",
    "build_wedge_barrier",
    "exp_barrier_jet",
    "power_barrier_jet",
    "verify_differential_inequality",
    "calibrate_exponent",
    "power_region",
    "DOUBLING",
]

DOUBLING = tuple(2 ** j for j in range(1, 17))
SIDES = ("subsolution_of_Lminus", "supersolution_of_Lplus")


class BarrierError(ValueError):
    pass


def _pucci_2x2(p, q, s, ell, side="plus"):
    M = np.empty(np.broadcast(p, q, s).shape + (2, 2))
    M[..., 0, 0] = p
    M[..., 0, 1] = q
    M[..., 1, 0] = q
    M[..., 1, 1] = s
    return pucci_batch(M, ell, side)


# ---------------------------------------------------------------------------
# cone barrier

def _polar_block(alpha, h, hp, hpp):
    """Hessian of rho^alpha h(angle) at rho = 1 in the (e_rho, e_angle) frame."""
    return alpha * (alpha - 1) * h, (alpha - 1) * hp, alpha * h + hpp


def _solve_hpp(alpha, h, hp, ell, target=0.0, iters: int = 200):
    """h'' with P+ of the polar Hessian equal to ``target`` (vectorized bisection).

    P+ is strictly increasing in the (2,2) entry, with slope between lam and
    Lam, which gives the bracket.
    """
    h = np.asarray(h, float)
    hp = np.asarray(hp, float)
    p, q, s0 = _polar_block(alpha, h, hp, 0.0)
    f0 = _pucci_2x2(p, q, s0, ell) - target
    width = np.abs(f0) / ell.lam + 1e-300
    lo = np.where(f0 > 0, -width, 0.0)
    hi = np.where(f0 > 0, 0.0, width)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = _pucci_2x2(p, q, s0 + mid, ell) - target > 0
        hi = np.where(pos, mid, hi)
        lo = np.where(pos, lo, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(np.abs(hi), 1e-300)):
            break
    return 0.5 * (lo + hi)


def _hpp_scalar(alpha, h, hp, lam, Lam, target):
    """Scalar twin of :func:`_solve_hpp` for the ODE right-hand side."""
    p = alpha * (alpha - 1) * h
    q = (alpha - 1) * hp
    s0 = alpha * h

    def pplus(s):
        m = 0.5 * (p + s)
        d = math.hypot(0.5 * (p - s), q)
        e1, e2 = m - d, m + d
        return Lam * (max(e1, 0.0) + max(e2, 0.0)) + lam * (min(e1, 0.0) + min(e2, 0.0))

    A, Bc = 0.5 * (Lam + lam), Lam - lam
    T = target - A * p
    qa = lam * Lam
    qb = -2 * T * A + 0.5 * Bc * Bc * p
    qc = T * T - 0.25 * Bc * Bc * p * p - Bc * Bc * q * q
    disc = math.sqrt(max(qb * qb - 4 * qa * qc, 0.0))
    best, best_res = 0.0, math.inf
    for cand in (target / Lam - p, target / lam - p, (-qb + disc) / (2 * qa), (-qb - disc) / (2 * qa)):
        res = abs(pplus(cand) - target)
        if res < best_res:
            best, best_res = cand, res
    return best - s0


def _shoot(alpha, theta, ell, forcing=0.0, dense=False):
    lam, Lam = float(ell.lam), float(ell.Lam)

    def rhs(_, y):
        return [y[1], _hpp_scalar(alpha, y[0], y[1], lam, Lam, -forcing)]

    def hits_zero(_, y):
        return y[0]

    hits_zero.terminal = True
    hits_zero.direction = -1
    return solve_ivp(rhs, (0.0, theta), [1.0, 0.0], method="DOP853", rtol=1e-11, atol=1e-13,
                     events=hits_zero, dense_output=dense)


def _shoot_value(alpha, theta, ell, forcing=0.0):
    sol = _shoot(alpha, theta, ell, forcing)
    if sol.t_events[0].size:
        return -(theta - float(sol.t_events[0][0]))
    return float(sol.y[0, -1])


def critical_exponent(theta: float, ell: Ellipticity) -> float:
    """Homogeneity at which the Pucci-harmonic profile first vanishes exactly
    on the cone boundary (angle theta)."""
    lo, hi = 1e-3, 1.0
    if _shoot_value(lo, theta, ell) <= 0:
        raise BarrierError("shooting failed: profile vanishes for the smallest exponent")
    while _shoot_value(hi, theta, ell) > 0:
        lo, hi = hi, 2 * hi
        if hi > 1e3:
            raise BarrierError("shooting failed to bracket the critical exponent")
    return brentq(lambda b: _shoot_value(b, theta, ell), lo, hi, xtol=1e-13, rtol=1e-13)


def critical_forcing(alpha: float, theta: float, ell: Ellipticity) -> float:
    """Largest eps for which the profile of P+(D^2 phi) = -eps rho^(alpha-2)
    stays positive on [0, theta] (alpha below the critical exponent)."""
    if _shoot_value(alpha, theta, ell) <= 0:
        raise BarrierError("exponent is not below the critical homogeneity")
    lo, hi = 0.0, 1.0
    while _shoot_value(alpha, theta, ell, hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > 1e6:
            raise BarrierError("forcing bracket failed")
    return brentq(lambda e: _shoot_value(alpha, theta, ell, e), lo, hi, xtol=1e-13, rtol=1e-12)


@dataclass
class ConeBarrier:
    theta: float
    alpha: float
    alpha_crit: float
    forcing: float
    ell: Ellipticity
    R0: float
    A: float
    B: float
    C: float
    mu1: float
    K: float
    table: np.ndarray = field(repr=False)  # rows: angle, h, h', h''
    dim: int = 2
    _splines: tuple = field(default=None, repr=False)

    def __post_init__(self):
        ang, h, hp, hpp = self.table
        self._splines = (CubicHermiteSpline(ang, h, hp), CubicHermiteSpline(ang, hp, hpp))

    def profile(self, ang):
        """Angular profile (h, h', h'') from the Hermite table; h'' is
        recomputed from the profile equation so the jets satisfy it exactly."""
        ang = np.clip(np.asarray(ang, float), 0.0, self.theta)
        h = self._splines[0](ang)
        hp = self._splines[1](ang)
        hpp = _solve_hpp(self.alpha, h, hp, self.ell, -self.forcing)
        return h, hp, hpp

    def _frame(self, X):
        X = np.asarray(X, float)
        rho = np.linalg.norm(X, axis=-1)
        safe = np.where(rho > 0, rho, 1.0)
        cth = np.clip(X[..., -1] / safe, -1.0, 1.0)
        ang = np.arccos(cth)
        sth = np.sin(ang)
        if self.dim == 2:
            sgn = np.where(X[..., 0] >= 0, 1.0, -1.0)
            e_r = np.stack([sgn * sth, cth], -1)
            e_a = np.stack([sgn * cth, -sth], -1)
            return rho, ang, e_r, e_a, None
        az = np.arctan2(X[..., 1], X[..., 0])
        e_r = np.stack([sth * np.cos(az), sth * np.sin(az), cth], -1)
        e_a = np.stack([cth * np.cos(az), cth * np.sin(az), -sth], -1)
        e_z = np.stack([-np.sin(az), np.cos(az), np.zeros_like(az)], -1)
        return rho, ang, e_r, e_a, e_z

    def value(self, X):
        rho, ang, *_ = self._frame(X)
        h, _, _ = self.profile(ang)
        return rho ** self.alpha * h

    def jets(self, X):
        """Value, gradient and Hessian of phi at points X (rho > 0)."""
        a = self.alpha
        rho, ang, e_r, e_a, e_z = self._frame(X)
        h, hp, hpp = self.profile(ang)
        p, q, s = _polar_block(a, h, hp, hpp)
        val = rho ** a * h
        grad = rho[..., None] ** (a - 1) * (a * h[..., None] * e_r + hp[..., None] * e_a)
        outer = lambda u, v: u[..., :, None] * v[..., None, :]  # noqa: E731
        H = (p[..., None, None] * outer(e_r, e_r) + q[..., None, None] * (outer(e_r, e_a) + outer(e_a, e_r))
             + s[..., None, None] * outer(e_a, e_a))
        if e_z is not None:
            sa = np.sin(ang)
            cot_term = np.where(sa > 1e-8, hp * np.cos(ang) / np.where(sa > 1e-8, sa, 1.0), hpp)
            H = H + (a * h + cot_term)[..., None, None] * outer(e_z, e_z)
        H = rho[..., None, None] ** (a - 2) * H
        return val, grad, H

    def bounds_report(self) -> dict:
        return {"theta": self.theta, "alpha": self.alpha, "alpha_crit": self.alpha_crit, "R0": self.R0,
                "forcing": self.forcing, "A": self.A, "B": self.B, "C": self.C, "mu1": self.mu1, "K": self.K, "dim": self.dim}


def solve_cone_profile(theta: float, ell: Ellipticity, safety: float = 0.9,
                       forcing_fraction: float = 0.5, R0_cap: float = 0.5, dim: int = 2,
                       n_table: int = 4001, R0_factor: float = 0.9) -> ConeBarrier:
    """Construct the cone barrier on the cone of half-aperture ``theta``.

    The critical homogeneity alpha* is found by shooting on P+(D^2 phi) = 0.
    The barrier uses alpha = ``safety * alpha*`` and the angular profile of
    P+(D^2 phi) = -eps rho^(alpha-2), h(0) = 1, h'(0) = 0, with eps a fraction
    of the largest forcing that keeps h positive up to the cone boundary.
    A, B, C are then measured on a dense angular table.
    """
    if not 0 < theta < math.pi:
        raise BarrierError("cone aperture must lie in (0, pi)")
    if not 0 < safety < 1 or not 0 < forcing_fraction < 1:
        raise BarrierError("safety and forcing_fraction must lie in (0, 1)")
    if dim not in (2, 3):
        raise BarrierError("cone barriers are built in dimension 2 (3 via the axisymmetric slice)")
    a_crit = critical_exponent(theta, ell)
    alpha = safety * a_crit
    eps = forcing_fraction * critical_forcing(alpha, theta, ell)
    sol = _shoot(alpha, theta, ell, eps, dense=True)
    if sol.t_events[0].size or not sol.success:
        raise BarrierError(f"profile shooting failed: {sol.message}")
    ang = np.linspace(0.0, theta, n_table)
    y = sol.sol(ang)
    h, hp = y[0], y[1]
    hpp = _solve_hpp(alpha, h, hp, ell, -eps)
    bar = ConeBarrier(theta, alpha, a_crit, eps, ell, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
                      np.stack([ang, h, hp, hpp]), dim)
    # A from the exact scale invariance P+(D^2 phi) = rho^(alpha-2) P+(block at rho = 1)
    if dim == 2:
        p, q, s = _polar_block(alpha, h, hp, hpp)
        Pmax = float(np.max(_pucci_2x2(p, q, s, ell)))
    else:
        X = np.stack([np.sin(ang), np.zeros_like(ang), np.cos(ang)], -1)
        _, _, H = bar.jets(X)
        Pmax = float(np.max(pucci_batch(H, ell, "plus")))
    A = -Pmax
    if not A > 0:
        raise BarrierError(f"profile does not give a barrier: max P+ = {Pmax:.3e} at rho = 1")
    B = float(np.max(np.sqrt((alpha * h) ** 2 + hp ** 2)))
    # any R0 <= A / (2aB) works; the factor keeps the gradient bound strict
    R0 = R0_cap if ell.a == 0 else min(R0_factor * A / (2 * ell.a * B), R0_cap)
    bar.A, bar.B, bar.C = A, B, float(np.max(h))
    bar.R0, bar.K = R0, A / 2
    bar.mu1 = R0 ** alpha * float(np.min(h))
    return bar


# ---------------------------------------------------------------------------
# wedge barrier

@dataclass
class WedgeBarrier:
    cone: ConeBarrier
    r: float
    kappa: int = 3

    @property
    def scale(self) -> float:
        return self.cone.R0 / self.r

    @property
    def mu(self) -> float:
        c = self.cone
        return min(c.mu1, c.K / (2 * self.kappa) * c.R0 ** (2 * self.kappa))

    @property
    def C(self) -> float:
        c = self.cone
        return c.C * c.R0 ** c.alpha + c.K / (2 * self.kappa) * c.R0 ** (2 * self.kappa)

    def region(self) -> geo.Region:
        return geo.wedge(self.cone.theta, self.r, self.cone.dim)

    def _base_jets(self, Y, tau):
        """Jets of the unscaled psi at (Y, tau)."""
        c = self.cone
        val, grad, H = c.jets(Y)
        k = self.kappa
        tau = np.asarray(tau, float)
        val = val + c.K / (2 * k) * np.abs(tau) ** k
        ut = 0.5 * c.K * np.abs(tau) ** (k - 1) * np.sign(tau)
        return val, grad, H, ut

    def value(self, X, t):
        c = self.cone
        lam = self.scale
        Y = lam * np.asarray(X, float)
        tau = lam * lam * np.asarray(t, float)
        return c.value(Y) + c.K / (2 * self.kappa) * np.abs(tau) ** self.kappa

    def jets(self, X, t):
        lam = self.scale
        val, grad, H, ut = self._base_jets(lam * np.asarray(X, float), lam * lam * np.asarray(t, float))
        return val, lam * grad, lam * lam * H, lam * lam * ut

    def residual(self, X, t, ell=None):
        """L+ psi - psi_t evaluated from the jets of the (rescaled) barrier."""
        ell = self.cone.ell if ell is None else ell
        _, grad, H, ut = self.jets(X, t)
        return pucci_batch(H, ell, "plus") + ell.a * np.linalg.norm(grad, axis=-1) - ut

    def residual_via_scaling(self, X, t, ell=None):
        """(R0/r)^2 [P+(D^2 psi) + (r/R0) a |D psi| - psi_t] at the rescaled point."""
        ell = self.cone.ell if ell is None else ell
        lam = self.scale
        _, grad, H, ut = self._base_jets(lam * np.asarray(X, float), lam * lam * np.asarray(t, float))
        return lam * lam * (pucci_batch(H, ell, "plus") + ell.a / lam * np.linalg.norm(grad, axis=-1) - ut)


def build_wedge_barrier(cone: ConeBarrier, r: float | None = None, kappa: int = 3) -> WedgeBarrier:
    """Wedge barrier on C_{theta,r}; ``r = None`` means r = R0."""
    r = cone.R0 if r is None else r
    if not 0 < r <= cone.R0 * (1 + 1e-14):
        raise BarrierError(f"r = {r} must lie in (0, R0 = {cone.R0}]")
    if int(kappa) != kappa or kappa <= 2:
        raise BarrierError("kappa must be an integer > 2")
    return WedgeBarrier(cone, float(min(r, cone.R0)), int(kappa))


# ---------------------------------------------------------------------------
# exponential and power barriers

@dataclass
class ExpBarrier:
    xi1: np.ndarray
    s: float
    r: float
    alpha: float
    gamma: float = 1.0

    def __post_init__(self):
        self.xi1 = np.atleast_1d(np.asarray(self.xi1, float))

    def jets(self, X, t):
        """(h, Dh, D2h, h_t lower, h_t upper) at points (X, t)."""
        a, g, r = self.alpha, self.gamma, self.r
        Y = np.asarray(X, float) - self.xi1
        t = np.asarray(t, float)
        R2 = np.sum(Y * Y, -1) + np.abs(t - self.s)
        e = np.exp(-a * R2 / r ** 2)
        val = g * (e - math.exp(-a / 16))
        grad = -(2 * a * g / r ** 2) * Y * e[..., None]
        n = Y.shape[-1]
        H = ((4 * a * a * g / r ** 4) * Y[..., :, None] * Y[..., None, :]
             - (2 * a * g / r ** 2) * np.eye(n)) * e[..., None, None]
        mag = (a * g / r ** 2) * e
        sg = np.sign(t - self.s)
        lo = np.where(sg == 0, -mag, -mag * sg)
        hi = np.where(sg == 0, mag, -mag * sg)
        return val, grad, H, lo, hi

    def margin(self, X, t, ell: Ellipticity):
        """L- h - h_t with the largest admissible h_t."""
        _, grad, H, _, hi = self.jets(X, t)
        return pucci_batch(H, ell, "minus") - ell.a * np.linalg.norm(grad, axis=-1) - hi

    def margin_floor(self, X, t):
        """Pointwise floor (alpha gamma / 2 r^2) exp(-alpha R^2 / r^2) implied by
        the calibration 2 alpha lam |x - xi1|^2 / r^2 - n Lam >= 1 and a r <= 1/4."""
        Y = np.asarray(X, float) - self.xi1
        R2 = np.sum(Y * Y, -1) + np.abs(np.asarray(t, float) - self.s)
        return self.alpha * self.gamma / (2 * self.r ** 2) * np.exp(-self.alpha * R2 / self.r ** 2)


@dataclass
class PowerBarrier:
    xi2: np.ndarray
    s: float
    r: float
    k: float
    C5: float | None = None

    def __post_init__(self):
        self.xi2 = np.atleast_1d(np.asarray(self.xi2, float))

    @property
    def gamma(self) -> float:
        return 256.0 ** (-self.k)

    def jets(self, X, t):
        Y = np.asarray(X, float) - self.xi2
        t = np.asarray(t, float)
        R2 = np.sum(Y * Y, -1) + np.abs(t - self.s)
        if np.any(R2 <= 0):
            raise BarrierError("power barrier is singular at (xi2, s)")
        k, g, r = self.k, self.gamma, self.r
        q = (r * r / R2) ** k
        val = 1.0 - g * q
        grad = (2 * g * k) * (q / R2)[..., None] * Y
        n = Y.shape[-1]
        H = (-(4 * g * k * (k + 1)) * (q / R2 ** 2)[..., None, None] * Y[..., :, None] * Y[..., None, :]
             + (2 * g * k) * (q / R2)[..., None, None] * np.eye(n))
        # f increases with R1^2, so f_t = mag sign(t - s) off the slice t = s
        mag = g * k * q / R2
        sg = np.sign(t - self.s)
        lo = np.where(sg == 0, -mag, mag * sg)
        hi = np.where(sg == 0, mag, mag * sg)
        return val, grad, H, lo, hi

    def margin(self, X, t, ell: Ellipticity):
        """-(L+ f - f_t) with the smallest admissible f_t."""
        _, grad, H, lo, _ = self.jets(X, t)
        return -(pucci_batch(H, ell, "plus") + ell.a * np.linalg.norm(grad, axis=-1) - lo)


def _single_jet(vals) -> Jet:
    val, grad, H, lo, hi = vals
    ut = float(lo) if lo == hi else (float(lo), float(hi))
    return Jet(float(val), grad, H, ut)


def exp_barrier_jet(bar: ExpBarrier, z) -> Jet:
    x, t = z
    X = np.atleast_1d(np.asarray(x, float))[None]
    v = bar.jets(X, np.array([float(t)]))
    return _single_jet(tuple(a[0] for a in v))


def power_barrier_jet(bar: PowerBarrier, z) -> Jet:
    x, t = z
    X = np.atleast_1d(np.asarray(x, float))[None]
    v = bar.jets(X, np.array([float(t)]))
    return _single_jet(tuple(a[0] for a in v))


# ---------------------------------------------------------------------------
# certificates

@dataclass
class MarginReport:
    barrier: str
    region: str
    ell: dict
    parameter: float
    min_margin: float
    argmin: list
    samples: int
    passed: bool
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"barrier": self.barrier, "region": self.region, "ell": self.ell,
                "parameter": self.parameter, "min_margin": self.min_margin, "argmin": self.argmin,
                "samples": self.samples, "pass": self.passed, **({"extra": self.extra} if self.extra else {})}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _argmin_lex(m, X, t):
    """Index of the minimum, ties broken lexicographically on (x..., t)."""
    mn = np.min(m)
    idx = np.flatnonzero(m == mn)
    if idx.size > 1:
        keys = [t[idx]] + [X[idx, j] for j in range(X.shape[1] - 1, -1, -1)]
        idx = idx[np.lexsort(keys)]
    return int(idx[0])


def power_region(cyl: geo.Cylinder, Q, s: float, r: float) -> geo.Region:
    """Psi_r(Q,s) intersected with P_{r/8}(xi2(Q), s)."""
    _, xi2 = geo.xi_points(cyl.base, Q, r)
    psi = geo.psi_box(cyl, Q, s, r)
    pb = geo.parabolic_ball(xi2, s, r / 8)

    def pred(X, t, tol):
        return psi.pred(X, t, tol) & pb.pred(X, t, tol)

    return geo.Region("psi_cap_P", {"Q": list(np.atleast_1d(Q)), "s": s, "r": r, "xi2": xi2.tolist()},
                      pred, cyl.base.dim, pb.bounds, pb.parts)


def verify_differential_inequality(barrier, region: geo.Region, ell: Ellipticity, side: str,
                                   per_unit: int = 64, unit: float | None = None) -> MarginReport:
    """Evaluate the barrier's sign condition at every sample of ``region``.

    ``side='subsolution_of_Lminus'`` requires L- h - h_t >= 0;
    ``side='supersolution_of_Lplus'`` requires L+ f - f_t < 0 (margins are
    reported as -(L+ f - f_t), so positive is good in both cases).
    """
    if side not in SIDES:
        raise BarrierError(f"side must be one of {SIDES}")
    if isinstance(barrier, ExpBarrier):
        if side != "subsolution_of_Lminus" or region.kind != "lens":
            raise BarrierError("the exponential barrier is certified as an L- subsolution on the lens S_r")
        if ell.a > 0 and barrier.r > 1 / (4 * ell.a) * (1 + 1e-12):
            raise BarrierError(f"r = {barrier.r} exceeds 1/(4a) = {1 / (4 * ell.a)}")
        unit = barrier.r if unit is None else unit
        X, t = region.sample(per_unit, unit)
        m = barrier.margin(X, t, ell)
        name, param, strict = "exp", barrier.alpha, False
    elif isinstance(barrier, PowerBarrier):
        if side != "supersolution_of_Lplus" or region.kind != "psi_cap_P":
            raise BarrierError("the power barrier is certified as an L+ supersolution on Psi_r cap P_{r/8}(xi2)")
        if ell.a > 0 and barrier.r > 1 / (4 * ell.a) * (1 + 1e-12):
            raise BarrierError(f"r = {barrier.r} exceeds 1/(4a) = {1 / (4 * ell.a)}")
        unit = barrier.r if unit is None else unit
        X, t = region.sample(per_unit, unit)
        m = barrier.margin(X, t, ell)
        name, param, strict = "power", barrier.k, True
    elif isinstance(barrier, WedgeBarrier):
        if side != "supersolution_of_Lplus" or region.kind != "wedge":
            raise BarrierError("the wedge barrier is certified as an L+ supersolution on its wedge")
        unit = 2 * barrier.r if unit is None else unit
        X, t = region.sample(per_unit, unit)
        keep = np.linalg.norm(X, axis=-1) > 1e-9 * barrier.r
        X, t = X[keep], t[keep]
        m = -barrier.residual(X, t, ell)
        name, param, strict = "wedge", barrier.cone.alpha, True
    elif isinstance(barrier, ConeBarrier):
        if side != "supersolution_of_Lplus" or region.kind != "cone":
            raise BarrierError("the cone barrier is certified as an L+ supersolution on its cone")
        unit = 2 * barrier.R0 if unit is None else unit
        X, t = region.sample(per_unit, unit)
        rho = np.linalg.norm(X, axis=-1)
        keep = rho > 1e-9 * barrier.R0
        X, t, rho = X[keep], t[keep], rho[keep]
        _, grad, H = barrier.jets(X)
        Lp = pucci_batch(H, ell, "plus") + ell.a * np.linalg.norm(grad, axis=-1)
        m = -(Lp + barrier.K * rho ** (barrier.alpha - 2))
        name, param, strict = "cone", barrier.alpha, False
    else:
        raise BarrierError(f"unsupported barrier type {type(barrier).__name__}")
    if m.size == 0:
        raise BarrierError("region produced no samples")
    i = _argmin_lex(m, X, t)
    mn = float(m[i])
    ok = bool(mn > 0) if strict else bool(mn >= 0)
    return MarginReport(name, region.kind, ell.as_dict(), float(param), mn,
                        [*map(float, X[i]), float(t[i])], int(m.size), ok)


def _doubling_from(guess: float) -> list:
    seq = [p for p in DOUBLING if p >= guess]
    if not seq:
        raise BarrierError(f"starting guess {guess} exceeds 2^16")
    return seq


def calibrate_exponent(kind: str, ell: Ellipticity, domain: geo.Domain, Q, s: float, r: float,
                       per_unit: int = 64, T: float | None = None):
    """Calibrate alpha (``exp_alpha``) or k (``power_k``) on the doubling
    sequence {2, 4, ..., 2^16}.

    The search starts at the smallest member satisfying the analytic
    sufficient condition (2 alpha lam m - n Lam >= 1 with m the sampled
    min |x - xi1|^2 / r^2 over the lens, resp. 2 (k+1) lam C5 >= n Lam + 1)
    and doubles until the margin report passes.  Returns (parameter, report).
    """
    n = domain.dim
    xi1, xi2 = geo.xi_points(domain, Q, r)
    if kind == "exp_alpha":
        region = geo.lens(domain, Q, s, r)
        X, _ = region.sample(per_unit, r)
        mratio = float(np.min(np.sum((X - xi1) ** 2, -1)) / r ** 2)
        guess = (1 + n * ell.Lam) / (2 * ell.lam * mratio)
        for alpha in _doubling_from(guess):
            rep = verify_differential_inequality(ExpBarrier(xi1, s, r, alpha), region, ell,
                                                 "subsolution_of_Lminus", per_unit)
            rep.extra = {"min_ratio": mratio, "guess": guess}
            if rep.passed:
                return alpha, rep
        raise BarrierError("no alpha <= 2^16 passes")
    if kind == "power_k":
        T = 2 * s if T is None else T
        region = power_region(geo.Cylinder(domain, T), Q, s, r)
        X, t = region.sample(per_unit, r)
        Y2 = np.sum((X - xi2) ** 2, -1)
        C5 = float(np.min(Y2 / (Y2 + np.abs(t - s))))
        guess = (n * ell.Lam + 1) / (2 * ell.lam * C5) - 1
        for k in _doubling_from(guess):
            bar = PowerBarrier(xi2, s, r, k, C5)
            rep = verify_differential_inequality(bar, region, ell, "supersolution_of_Lplus", per_unit)
            rep.extra = {"C5": C5, "guess": guess}
            if rep.passed:
                return k, rep
        raise BarrierError("no k <= 2^16 passes")
    raise BarrierError(f"unknown calibration kind {kind!r}")
