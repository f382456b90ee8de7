"""Empirical constants of the boundary estimates.

Every estimator works on quotients of member values, so multiplying a
member by a power of two leaves its output bit-identical (other positive
factors agree to a few ulp).  Values at or below the noise floor
``NOISE_REL * sup`` are rejected, never silently used as denominators.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..geometry import Cylinder, GeometryError, corkscrew_points, psi_box
from .family import Member, SolutionFamily

__all__ = [
    "NOISE_REL", "EstimateError", "ConstantEstimate", "estimate_holder_decay", "estimate_carleson",
    "estimate_boundary_harnack_elliptic", "estimate_local_comparison", "estimate_linear_rate",
    "estimate_backward_harnack", "estimate_global_comparison", "estimate_interior_harnack",
    "CSV_COLUMNS", "carleson_regime",
]

NOISE_REL = 1e-12
CSV_COLUMNS = ("theorem", "domain", "r", "grid", "estimate", "deviation", "pass", "seed")


class EstimateError(ValueError):
    pass


def _clean(v):
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.ndarray):
        return _clean(v.tolist())
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


@dataclass
class ConstantEstimate:
    """An estimated constant (or exponent) with per-member values.

    ``estimate`` is the family worst case.  ``lower`` is filled for two-sided
    estimates, ``exponent`` for decay fits.  ``grid_series`` and
    ``stability`` are set by :func:`refinement_study`.
    """

    theorem: str
    estimate: float
    per_member: dict
    meta: dict = field(default_factory=dict)
    exponent: float | None = None
    lower: float | None = None
    grid_series: list = field(default_factory=list)
    stability: float | None = None

    def to_dict(self) -> dict:
        return _clean(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def csv_row(self, deviation=None, passed=None, grid=None) -> dict:
        m = self.meta
        return {"theorem": self.theorem, "domain": m.get("domain", {}).get("kind", ""), "r": m.get("r", ""),
                "grid": grid if grid is not None else m.get("h", ""), "estimate": repr(float(self.estimate)),
                "deviation": "" if deviation is None else repr(float(deviation)),
                "pass": "" if passed is None else str(bool(passed)).lower(), "seed": m.get("seed", "")}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerow(self.csv_row())
        return buf.getvalue()


# ---------------------------------------------------------------------------
# helpers

def _members(family) -> list:
    if isinstance(family, SolutionFamily):
        return list(family.members)
    if isinstance(family, Member):
        return [family]
    return list(family)


def _field(m: Member):
    return m.solve()


def _require_vanishing(m: Member):
    if m.problem.lateral != 0.0:
        raise EstimateError(f"member {m.label} does not vanish on the lateral boundary")


def _noise(values) -> float:
    return NOISE_REL * float(np.max(np.abs(values))) if np.size(values) else 0.0


def _slice_at(f, t):
    """Full-box values at time t, linear between stored slices."""
    times = f.times
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise EstimateError(f"time {t} outside the stored range")
    j = int(np.searchsorted(times, t, side="right") - 1)
    j = min(max(j, 0), len(times) - 1)
    if j == len(times) - 1 or abs(times[j] - t) <= 1e-14 * max(1.0, abs(t)):
        return f.values[j]
    t0, t1 = times[j], times[j + 1]
    w = (t - t0) / (t1 - t0)
    return (1.0 - w) * f.values[j] + w * f.values[j + 1]


def _point_value(f, x, t):
    return float(f.at(np.atleast_2d(x), t)[0])


def _lattice_window(f, xpred, tpred):
    """Interior lattice coordinates and the (slice index, values) pairs
    restricted by the two predicates."""
    X = f.interior_coords()
    sel = xpred(X)
    js = [j for j, t in enumerate(f.times) if tpred(t)]
    return X[sel], sel, js


def _meta(m: Member, **kw):
    d = {"domain": m.grid.cylinder.base.describe(), "h": m.grid.h, "T": m.grid.cylinder.T}
    d.update({k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v) for k, v in kw.items()})
    return d


def _fit_loglog(x, y):
    A = np.stack([np.ones_like(x), x], 1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(coef[1]), float(coef[0])


# ---------------------------------------------------------------------------
# Hoelder decay and linear rate

def _holder_regime(base, Q, r):
    if base.is_c11:
        if r > base.tangent_radius():
            raise EstimateError(f"r = {r} exceeds the tangent radius {base.tangent_radius()}")
    elif r > base.r0:
        raise EstimateError(f"r = {r} exceeds the localization radius {base.r0}")


def estimate_holder_decay(family, Q0, s0: float, r: float, bins: int = 10, d_min: float = 0.1):
    """Fit ``u / M_r(u) ~ C d^alpha`` with ``d = (|x-Q0| + |t-s0|^{1/2}) / r``.

    Samples are the interior lattice points of ``Psi_r(Q0, s0)`` at stored
    slices.  The fit runs on the upper envelope: the largest quotient in
    each of ``bins`` log-spaced bins of ``d`` over ``[d_min, 1]``.  ``C`` is
    the smallest constant for which the fitted power bounds every sample
    with ``d >= d_min``.
    """
    Q0 = np.atleast_1d(np.asarray(Q0, float))
    per, alphas, Cs = {}, [], []
    m0 = None
    for m in _members(family):
        f = _field(m)
        m0 = m0 or m
        base = m.grid.cylinder.base
        base.check_on_boundary(Q0)
        _holder_regime(base, Q0, r)
        _require_vanishing(m)
        X, sel, js = _lattice_window(f, lambda X: np.linalg.norm(X - Q0, axis=1) < r,
                                     lambda t: abs(t - s0) < r * r)
        if not js or len(X) == 0:
            raise EstimateError("no lattice samples in Psi_r")
        dx = np.linalg.norm(X - Q0, axis=1)
        U = np.stack([f.interior(j)[sel] for j in js])
        D = (dx[None, :] + np.sqrt(np.abs(f.times[js] - s0))[:, None]) / r
        M = float(U.max())
        if not M > _noise(f.values):
            raise EstimateError(f"degenerate fit: member {m.label} is below the noise floor on Psi_r")
        q = (U / M).ravel()
        d = D.ravel()
        edges = np.geomspace(d_min, 1.0, bins + 1)
        xs, ys = [], []
        for k in range(bins):
            inb = (d >= edges[k]) & (d < edges[k + 1]) & (q > NOISE_REL)
            if inb.any():
                i = np.flatnonzero(inb)[np.argmax(q[inb])]
                xs.append(math.log(d[i]))
                ys.append(math.log(q[i]))
        if len(xs) < 3:
            raise EstimateError(f"degenerate fit: fewer than 3 populated distance bins for {m.label}")
        alpha, _ = _fit_loglog(np.array(xs), np.array(ys))
        use = d >= d_min
        C = float(np.max(q[use] / d[use] ** alpha))
        per[m.label] = {"alpha": alpha, "C": C, "bins": len(xs)}
        alphas.append(alpha)
        Cs.append(C)
    return ConstantEstimate("holder", float(max(Cs)), per, _meta(m0, Q0=Q0, s0=s0, r=r),
                            exponent=float(min(alphas)))


def estimate_linear_rate(member: Member, Q, s: float, r: float, delta_max: float = 1.0 / 32, Q0=None,
                         s0: float | None = None):
    """Two-sided linear growth along the normal at ``Q``.

    Samples ``x = Q + delta r nu`` at lattice spacing for ``0 < delta <=
    delta_max`` (at time ``s``), fits the log-log slope and returns ``C1 =
    min u / (delta u(A_under))``, ``C2 = max u / (delta u(A_over))`` with the
    corkscrew points of ``(Q0, s0)`` (default ``(Q, s)``).  ``meta['slope']``
    holds the raw range of ``u / |x - Q|``.
    """
    base = member.grid.cylinder.base
    if not base.is_c11:
        raise EstimateError("linear rate needs a C^{1,1} base")
    _require_vanishing(member)
    f = _field(member)
    Q = np.atleast_1d(np.asarray(Q, float))
    Q0 = Q if Q0 is None else np.atleast_1d(np.asarray(Q0, float))
    s0 = s if s0 is None else s0
    nu = base.normal(Q0)
    h = member.grid.h
    k = int(math.floor(delta_max * r / h + 1e-9))
    if k < 3:
        raise EstimateError(f"insufficient lattice points along the normal segment ({k} < 3)")
    delta = np.arange(1, k + 1) * h / r
    X = Q + (delta * r)[:, None] * nu
    u = f.at(X, s)
    noise = _noise(f.values)
    if np.any(u <= noise):
        raise EstimateError(f"member {member.label} is below the noise floor along the normal")
    try:
        (xo, to), (xu, tu) = corkscrew_points(base, Q0, s0, r, T=f.T)
    except GeometryError as e:
        raise EstimateError(str(e)) from e
    uo, uu = _point_value(f, xo, to), _point_value(f, xu, tu)
    if min(uo, uu) <= noise:
        raise EstimateError("corkscrew value below noise floor")
    expo, _ = _fit_loglog(np.log(delta), np.log(u))
    C1 = float(np.min(u / (delta * uu)))
    C2 = float(np.max(u / (delta * uo)))
    slope = u / (delta * r)
    per = {member.label: {"exponent": expo, "C1": C1, "C2": C2}}
    return ConstantEstimate("linear_rate", C2, per,
                            _meta(member, Q=Q, s=s, r=r, delta_max=delta_max, n_points=k,
                                  slope=[float(slope.min()), float(slope.max())]),
                            exponent=expo, lower=C1)


# ---------------------------------------------------------------------------
# Carleson

def carleson_regime(base, s0: float, T: float, r: float) -> float:
    """Largest admissible r: min(r0/10, sqrt(s0/8), sqrt((T-s0)/8))."""
    return min(base.r0 / 10, math.sqrt(max(s0, 0) / 8), math.sqrt(max(T - s0, 0) / 8))


def estimate_carleson(family, Q0, s0: float, r: float, per_unit: int = 8, layers: int = 4):
    """``sup_{Psi_{r/8}(Q0,s0)} u / u(A_over_r(Q0,s0))`` per member.

    The supremum is taken over a grid-independent sample of ``Psi_{r/8}``
    (``per_unit`` points per ``r/8``) with the field interpolated, so that
    refinements compare like with like.  ``meta['growth']`` lists, per
    member, the ratios of envelope maxima of consecutive dyadic layers
    ``2^-(k+1) r <= |x - Q0| < 2^-k r`` of ``Psi_r``.
    """
    Q0 = np.atleast_1d(np.asarray(Q0, float))
    per, growth = {}, {}
    m0 = None
    for m in _members(family):
        m0 = m0 or m
        cyl = m.grid.cylinder
        base = cyl.base
        rmax = carleson_regime(base, s0, cyl.T, r)
        if r > rmax * (1 + 1e-12):
            raise EstimateError(f"r = {r} outside the Carleson regime (r <= {rmax:.4g})")
        _require_vanishing(m)
        f = _field(m)
        (xa, ta), _ = corkscrew_points(base, Q0, s0, r, T=cyl.T)
        box2 = psi_box(cyl, Q0, s0, 2 * r)
        X2, sel2, js2 = _lattice_window(f, lambda X: np.linalg.norm(X - Q0, axis=1) < 2 * r,
                                        lambda t: abs(t - s0) < 4 * r * r)
        M2 = max(float(f.interior(j)[sel2].max()) for j in js2) if js2 and len(X2) else 0.0
        ua = _point_value(f, xa, ta)
        if not ua > NOISE_REL * M2:
            raise EstimateError(f"corkscrew value below noise floor for {m.label}")
        X, t = psi_box(cyl, Q0, s0, r / 8).sample(per_unit=per_unit, unit=r / 8, boundary=False)
        X, t = X[base.sd(X) <= 0], t[base.sd(X) <= 0]
        u = f.at(X, t)
        per[m.label] = float(u.max() / ua)
        Xr, tr = box2.sample(per_unit=per_unit, unit=r, boundary=False)
        inr = (np.linalg.norm(Xr - Q0, axis=1) < r) & (np.abs(tr - s0) < r * r) & (base.sd(Xr) <= 0)
        Xr, tr = Xr[inr], tr[inr]
        ur = f.at(Xr, tr)
        dist = np.linalg.norm(Xr - Q0, axis=1) / r
        env = []
        for k in range(layers):
            lay = (dist >= 2.0 ** -(k + 1)) & (dist < 2.0 ** -k)
            env.append(float(ur[lay].max()) if lay.any() else float("nan"))
        growth[m.label] = [env[k] / env[k + 1] if env[k + 1] > 0 else float("inf") for k in range(layers - 1)]
    est = float(max(per.values()))
    if not math.isfinite(est):
        raise EstimateError("non-finite Carleson ratio")
    return ConstantEstimate("carleson", est, per, _meta(m0, Q0=Q0, s0=s0, r=r, growth=growth))


# ---------------------------------------------------------------------------
# elliptic-type, backward Harnack and global comparison

def estimate_boundary_harnack_elliptic(family, delta: float):
    """``max / min`` of each member over the lattice points of
    ``{dist(x, boundary) > delta} x (delta^2, T)``."""
    per = {}
    m0 = None
    for m in _members(family):
        m0 = m0 or m
        _require_vanishing(m)
        f = _field(m)
        base = m.grid.cylinder.base
        X, sel, js = _lattice_window(f, lambda X: base.sd(X) < -delta, lambda t: t > delta * delta)
        if not js or len(X) == 0:
            raise EstimateError("C_{delta,T} holds no lattice samples")
        U = np.stack([f.interior(j)[sel] for j in js])
        lo = float(U.min())
        if not lo > _noise(f.values):
            raise EstimateError(f"min at noise floor for {m.label}")
        per[m.label] = float(U.max() / lo)
    return ConstantEstimate("boundary_harnack_elliptic", float(max(per.values())), per, _meta(m0, delta=delta))


def _slab_times(f, delta):
    return lambda t: (t > 2 * delta * delta) and (t < f.T - delta * delta)


def estimate_backward_harnack(family, X0=None, delta: float = 0.1, r: float = 0.05):
    """``sup_F u(x, t + 4 r^2) / u(x, t)`` over ``F = Omega x (2 delta^2, T - delta^2)``.

    Both times must lie in ``F``; ``t`` runs over stored slices and the later
    value is interpolated linearly in time.  With ``X0`` given only the
    lattice point nearest to it is used.  Members with ``b != 0`` are
    rejected.
    """
    per = {}
    m0 = None
    for m in _members(family):
        m0 = m0 or m
        if m.ell.b != 0:
            raise EstimateError(f"member {m.label} has b != 0; the backward Harnack inequality needs b = 0")
        _require_vanishing(m)
        f = _field(m)
        X = f.interior_coords()
        if X0 is None:
            sel = np.ones(len(X), bool)
        else:
            sel = np.zeros(len(X), bool)
            sel[np.argmin(np.linalg.norm(X - np.asarray(X0, float), axis=1))] = True
        inF = _slab_times(f, delta)
        js = [j for j, t in enumerate(f.times) if inF(t) and inF(t + 4 * r * r)]
        if not js:
            raise EstimateError("no admissible time pairs in F")
        noise = _noise(f.values)
        best = -np.inf
        for j in js:
            den = f.interior(j)[sel]
            if np.any(den <= noise):
                raise EstimateError(f"denominator at noise floor for {m.label}")
            num = _slice_at(f, f.times[j] + 4 * r * r)[f.mask][sel]
            best = max(best, float(np.max(num / den)))
        per[m.label] = best
    return ConstantEstimate("backward_harnack", float(max(per.values())), per,
                            _meta(m0, delta=delta, r=r, X0=None if X0 is None else list(np.atleast_1d(X0))))


def _pair(u: Member, v: Member):
    fu, fv = _field(u), _field(v)
    if not fu.same_grid(fv):
        # different operators pick different time steps; compare on u's slices
        return fu, fv, False
    return fu, fv, True


def _values_on(f, g, same, j):
    """Interior values of g at the time of f's slice j."""
    if same:
        return g.interior(j)
    return _slice_at(g, f.times[j])[g.mask]


def estimate_global_comparison(u: Member, v: Member, X0, delta: float):
    """Two-sided bounds of ``(u/v) * (v(X0,T) / u(X0,T))`` over the lattice of F."""
    for m in (u, v):
        _require_vanishing(m)
    fu, fv, same = _pair(u, v)
    if fu.h != fv.h or not np.array_equal(fu.mask, fv.mask):
        raise EstimateError("members must share the lattice")
    X0 = np.atleast_1d(np.asarray(X0, float))
    T = min(fu.T, fv.T)
    uT, vT = _point_value(fu, X0, T), _point_value(fv, X0, T)
    if min(uT, vT) <= max(_noise(fu.values), _noise(fv.values)):
        raise EstimateError("reference values at noise floor")
    inF = _slab_times(fu, delta)
    js = [j for j, t in enumerate(fu.times) if inF(t)]
    if not js:
        raise EstimateError("F holds no stored slices")
    hi, lo = -np.inf, np.inf
    nv = _noise(fv.values)
    for j in js:
        a = fu.interior(j)
        b = _values_on(fu, fv, same, j)
        if np.any(b <= nv):
            raise EstimateError("v at noise floor inside F")
        q = (a / b) * (vT / uT)
        hi, lo = max(hi, float(q.max())), min(lo, float(q.min()))
    per = {f"{u.label}/{v.label}": {"sup": hi, "inf": lo}}
    return ConstantEstimate("global_comparison", hi, per, _meta(u, X0=X0, delta=delta), lower=lo)


def estimate_local_comparison(u: Member, v: Member, Q0, s0: float, r: float, r0_threshold: float | None = None):
    """Two-sided bounds over ``Psi_r(Q0, s0)`` of ``(u/v) / (u(A)/v(A))``,
    with ``A`` the forward corkscrew point."""
    base = u.grid.cylinder.base
    if not base.is_c11:
        raise EstimateError("local comparison needs a C^{1,1} base")
    amax = max(u.ell.a, v.ell.a)
    if amax > 0 and r > 1.0 / (4 * amax):
        raise EstimateError(f"r = {r} exceeds 1/(4a) = {1 / (4 * amax):.4g}")
    thr = base.r0 if r0_threshold is None else r0_threshold
    if r > thr:
        raise EstimateError(f"r = {r} exceeds the threshold r0 = {thr:.4g}")
    for m in (u, v):
        _require_vanishing(m)
    fu, fv, same = _pair(u, v)
    if fu.h != fv.h or not np.array_equal(fu.mask, fv.mask):
        raise EstimateError("members must share the lattice")
    Q0 = np.atleast_1d(np.asarray(Q0, float))
    (xa, ta), _ = corkscrew_points(base, Q0, s0, r, T=min(fu.T, fv.T))
    ua, va = _point_value(fu, xa, ta), _point_value(fv, xa, ta)
    if min(ua, va) <= max(_noise(fu.values), _noise(fv.values)):
        raise EstimateError("corkscrew value below noise floor")
    X, sel, js = _lattice_window(fu, lambda X: np.linalg.norm(X - Q0, axis=1) < r,
                                 lambda t: abs(t - s0) < r * r)
    if not js or len(X) == 0:
        raise EstimateError("Psi_r holds no lattice samples")
    nv = _noise(fv.values)
    hi, lo = -np.inf, np.inf
    for j in js:
        a = fu.interior(j)[sel]
        b = _values_on(fu, fv, same, j)[sel]
        if np.any(b <= nv):
            raise EstimateError("v below noise floor inside Psi_r")
        q = (a / b) / (ua / va)
        hi, lo = max(hi, float(q.max())), min(lo, float(q.min()))
    per = {f"{u.label}/{v.label}": {"sup": hi, "inf": lo}}
    return ConstantEstimate("local_comparison", hi, per, _meta(u, Q0=Q0, s0=s0, r=r), lower=lo)


def estimate_interior_harnack(family, eta: float, sigma: float, r: float, x0=None, t0: float = 0.0):
    """``max_{|x-x0| <= sigma r} u(., t0 + r^2) / min_{|x-x0| <= sigma r} u(., t0 + eta r^2)``.

    The box ``Q(eta, r)`` shifted to ``(x0, t0)`` must lie in the cylinder.
    """
    if not eta > 1:
        raise EstimateError("eta must exceed 1")
    if not 0 < sigma < 1:
        raise EstimateError("sigma must lie in (0, 1)")
    per = {}
    m0 = None
    for m in _members(family):
        m0 = m0 or m
        f = _field(m)
        cyl = m.grid.cylinder
        c = np.zeros(cyl.base.dim) if x0 is None else np.atleast_1d(np.asarray(x0, float))
        corners = c + r * np.array(np.meshgrid(*([[-1.0, 1.0]] * cyl.base.dim), indexing="ij")).reshape(
            cyl.base.dim, -1).T
        if np.any(cyl.base.sd(corners) >= 0) or t0 < 0 or t0 + eta * r * r > cyl.T:
            raise EstimateError("Q(eta, r) does not fit inside the cylinder")
        X = f.interior_coords()
        sel = np.linalg.norm(X - c, axis=1) <= sigma * r
        if not sel.any():
            raise EstimateError("no lattice points in the inner ball")
        top = float(_slice_at(f, t0 + r * r)[f.mask][sel].max())
        bot = float(_slice_at(f, t0 + eta * r * r)[f.mask][sel].min())
        if not bot > _noise(f.values):
            raise EstimateError(f"min at noise floor for {m.label}")
        per[m.label] = top / bot
    return ConstantEstimate("interior_harnack", float(max(per.values())), per,
                            _meta(m0, eta=eta, sigma=sigma, r=r, t0=t0))
