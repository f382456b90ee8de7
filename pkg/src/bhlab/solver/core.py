"""Explicit monotone time stepping on lattices.

The update is ``u <- u + dt * D_h[u]`` with ``D_h`` one of

* extremal (plus/minus): extremum over orthogonal line frames of
  ``sum_l (Lam D_l^+ - lam D_l^-)`` plus an upwind ``+-a|Du|`` and ``+-b|u|``;
* linear non-divergence: ``sum_l w_l(x) D_l`` with the nonnegative line
  weights of :func:`line_weights`;
* normalized p-Laplacian: second differences along the line closest to the
  central-difference gradient and its frame partners, with the midpoint of
  the directional range below the gradient threshold.

``D_l`` is the (Shortley-Weller) second difference along line ``l``.  The
default step is ``c_cfl / rate`` where ``rate`` bounds the diagonal
coefficient, so every update is a nonnegative combination of its inputs
(the p-Laplacian line selection excepted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..geometry import Cylinder
from . import kernels as _default_kernels
from .field import GridField
from .lattice import Lattice
from .problem import ProblemSpec, line_weights

__all__ = ["CFLError", "GridSpec", "Discretization", "step", "solve", "discrete_comparison_check",
           "get_kernels", "GridMismatch", "extremal_residuals"]


class CFLError(ValueError):
    pass


class GridMismatch(ValueError):
    pass


def get_kernels(backend: str | None = None):
    if backend is None:
        return _default_kernels
    if backend == "python":
        from . import _kernels_py
        return _kernels_py
    if backend == "cython":
        from . import _kernels  # ImportError if not built
        return _kernels
    raise ValueError(f"unknown backend {backend!r}")


@dataclass
class GridSpec:
    """Lattice step, time step policy and output schedule over a cylinder.

    ``dt=None`` picks ``c_cfl / rate`` adjusted down so the horizon is hit
    exactly.  Slices are stored every ``save_every`` steps (counted on the
    global clock ``t / dt``), or about ``n_saves`` times when unset; the
    initial and final slices are always stored, as are the two steps
    bracketing each of ``save_times``.  ``t_end`` stops the march early.
    """

    cylinder: Cylinder
    h: float
    dt: float | None = None
    c_cfl: float = 0.5
    theta_min: float = 0.5
    save_every: int | None = None
    n_saves: int = 50
    save_times: tuple = ()
    t_end: float | None = None

    def __post_init__(self):
        if not 0 < self.c_cfl <= 1:
            raise ValueError("c_cfl must lie in (0, 1]")
        if self.t_end is not None and not 0 < self.t_end <= self.cylinder.T:
            raise ValueError("t_end must lie in (0, T]")

    @property
    def t_stop(self) -> float:
        """Where marching stops: ``t_end`` if set (solutions are causal, so a
        shorter run is the restriction of the full one), else the horizon."""
        return self.cylinder.T if self.t_end is None else self.t_end

    @cached_property
    def lattice(self) -> Lattice:
        return Lattice(self.cylinder.base, self.h, theta_min=self.theta_min)

    @property
    def K_dir(self) -> int:
        return len(self.lattice.lines)

    def describe(self) -> dict:
        return {"h": self.h, "dt": self.dt, "c_cfl": self.c_cfl, "theta_min": self.theta_min,
                "T": self.cylinder.T, "t_end": self.t_end, "domain": self.cylinder.base.describe(), "K_dir": self.K_dir}


class Discretization:
    """Stencil arrays of one problem on one lattice."""

    def __init__(self, problem: ProblemSpec, lat: Lattice):
        self.problem, self.lat = problem, lat
        ell = problem.ell
        self.kind = problem.kind
        self.nP, self.nM = lat.nP, lat.nM
        self.cp, self.cm = lat.cp, lat.cm
        csum = lat.cp + lat.cm
        n = lat.dim
        if self.kind.startswith("extremal"):
            frames = lat.frames[:1] if ell.lam == ell.Lam else lat.frames
            self.frames = np.ascontiguousarray(frames, dtype=np.int32)
            fr = np.stack([csum[:, f].sum(axis=1) for f in self.frames], axis=1).max(axis=1)
            g = np.sqrt(np.sum(np.maximum(lat.gp, lat.gm) ** 2, axis=1))
            self.rate = float(np.max(ell.Lam * fr + ell.a * g + ell.b))
        elif self.kind == "linear_nondiv":
            A = problem.coeff.evaluate(lat.coords, n, ell.lam, ell.Lam)
            ev = np.linalg.eigvalsh(A)
            if ev.min() < ell.lam - 1e-12 or ev.max() > ell.Lam + 1e-12:
                raise ValueError("coefficient spectrum leaves [lam, Lam]")
            self.A = A
            self.w = np.ascontiguousarray(line_weights(A, lat.lines))
            self.rate = float(np.max(np.sum(self.w * csum, axis=1)))
        else:
            p = problem.p
            if p >= 2:
                r = csum[:, :n].sum(axis=1) + (p - 2) * csum.max(axis=1)
            else:
                part = csum[:, lat.partners].sum(axis=2) if n > 1 else 0.0
                r = ((p - 1) * csum + part).max(axis=1)
            self.rate = float(np.max(r))
            self.E = np.ascontiguousarray(lat.E)
            self.partners = np.ascontiguousarray(lat.partners, dtype=np.int32)

    def advance(self, u, nsteps: int, dt: float, kernels=None):
        """Advance the work vector ``u`` (interior + lateral slot) in place."""
        k = kernels or _default_kernels
        pr, ell, lat = self.problem, self.problem.ell, self.lat
        if nsteps <= 0:
            return u
        if self.kind.startswith("extremal"):
            k.run_extremal(u, nsteps, self.nP, self.nM, self.cp, self.cm, lat.gp, lat.gm, self.frames,
                           ell.lam, ell.Lam, ell.a, ell.b, self.kind == "extremal_plus", dt)
        elif self.kind == "linear_nondiv":
            k.run_linear(u, nsteps, self.nP, self.nM, self.cp, self.cm, self.w, dt)
        else:
            k.run_plap(u, nsteps, self.nP, self.nM, self.cp, self.cm, lat.span, self.E, self.partners,
                       float(pr.p), pr.eps_g, lat.h, dt)
        return u

    def work_vector(self, interior) -> np.ndarray:
        u = np.empty(self.lat.npts + 1)
        u[:-1] = interior
        u[-1] = self.problem.lateral
        return u


def _check_finite(u, lat, t):
    bad = ~np.isfinite(u[:-1])
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise FloatingPointError(f"non-finite value at x={lat.coords[i].tolist()}, t={t:.6g}")


def step(u_interior, problem: ProblemSpec, grid: GridSpec, dt: float | None = None, backend=None,
         check_cfl: bool = True) -> np.ndarray:
    """One explicit step from interior lattice values; returns the next ones."""
    disc = Discretization(problem, grid.lattice)
    dt = dt if dt is not None else (grid.dt if grid.dt is not None else grid.c_cfl / disc.rate)
    if check_cfl and dt * disc.rate > 1 + 1e-12:
        raise CFLError(f"dt={dt:.3g} exceeds the monotonicity limit {1 / disc.rate:.3g}")
    u = disc.work_vector(np.asarray(u_interior, float))
    disc.advance(u, 1, dt, get_kernels(backend))
    _check_finite(u, grid.lattice, dt)
    return u[:-1].copy()


def solve(problem: ProblemSpec, grid: GridSpec, u_init=None, t0: float = 0.0, backend: str | None = None,
          check_cfl: bool = True) -> GridField:
    """March from ``t0`` to the cylinder horizon and store slices.

    ``u_init`` may be interior values or a full-box array; by default the
    problem's initial datum is sampled at the lattice points.
    """
    lat = grid.lattice
    disc = Discretization(problem, lat)
    T = grid.t_stop
    span = T - t0
    if not span > 0:
        raise ValueError("t0 must precede the horizon")
    if grid.dt is None:
        nsteps = max(1, math.ceil(span * disc.rate / grid.c_cfl - 1e-9))
        # land requested save times on steps when they are simple fractions of the span
        q = 1
        for ts in grid.save_times:
            frac = (ts - t0) / span
            for den in range(1, 65):
                if abs(frac * den - round(frac * den)) < 1e-9:
                    q = q * den // math.gcd(q, den)
                    break
        nsteps = -(-nsteps // q) * q
        dt = span / nsteps
    else:
        dt = float(grid.dt)
        nsteps = round(span / dt)
        if abs(nsteps * dt - span) > 1e-9 * span:
            nsteps = math.ceil(span / dt)
    if check_cfl and dt * disc.rate > 1 + 1e-12:
        raise CFLError(f"dt={dt:.3g} exceeds the monotonicity limit {1 / disc.rate:.3g}")
    if u_init is None:
        init = problem.initial_values(lat.coords)
    else:
        u_init = np.asarray(u_init, float)
        init = u_init[lat.mask] if u_init.shape == lat.shape else u_init.reshape(lat.npts)
    if not np.all(np.isfinite(init)):
        raise ValueError("initial datum must be finite")
    every = grid.save_every or max(1, nsteps // max(1, grid.n_saves))
    g0 = round(t0 / dt)
    extra = set()
    for ts in grid.save_times:
        q = (ts - t0) / dt
        extra.update(k for k in (math.floor(q), math.ceil(q)) if 0 <= k <= nsteps)
    saves = sorted({k for k in range(0, nsteps + 1, 1) if (g0 + k) % every == 0} | {0, nsteps} | extra)
    kern = get_kernels(backend)
    u = disc.work_vector(init)
    slices, times = [], []
    done = 0
    for k in saves:
        disc.advance(u, k - done, dt, kern)
        done = k
        _check_finite(u, lat, t0 + k * dt)
        slices.append(lat.embed(u[:-1], problem.lateral))
        times.append(t0 + k * dt)
    meta = {"problem": problem.describe(), "grid": grid.describe(), "dt": dt, "nsteps": nsteps,
            "rate": disc.rate, "backend": kern.BACKEND, "t0": t0}
    return GridField(lat.h, dt, T, lat.origin, lat.mask.copy(), np.array(times), np.stack(slices),
                     problem.lateral, meta, lat)


def extremal_residuals(field: GridField, j: int, ell, dt: float | None = None):
    """``(L-_h u - delta_t u, L+_h u - delta_t u)`` at interior points between
    stored slices ``j`` and ``j+1`` (which must be consecutive steps)."""
    lat = field.lattice
    if lat is None:
        raise ValueError("field carries no lattice")
    dt = dt or (field.times[j + 1] - field.times[j])
    u0 = field.interior(j)
    dtu = (field.interior(j + 1) - u0) / dt
    out = []
    for side in ("extremal_minus", "extremal_plus"):
        disc = Discretization(ProblemSpec(side, ell, lateral=field.lateral), lat)
        w = disc.work_vector(u0)
        disc.advance(w, 1, 1.0)
        out.append((w[:-1] - u0) - dtu)
    return out[0], out[1]


def discrete_comparison_check(sub: GridField, sup: GridField, tol: float = 0.0) -> bool:
    """True iff ordering on the parabolic boundary carries to the lattice.

    The parabolic boundary here is the initial slice plus the pinned lateral
    points.  If the boundary data are not ordered the implication holds
    vacuously.
    """
    if not sub.same_grid(sup):
        raise GridMismatch("fields live on different lattices or time grids")
    boundary_ok = np.all(sub.values[0][sub.mask] <= sup.values[0][sup.mask] + tol) and sub.lateral <= sup.lateral
    if not boundary_ok:
        return True
    return bool(np.all(sub.values[:, sub.mask] <= sup.values[:, sup.mask] + tol))
