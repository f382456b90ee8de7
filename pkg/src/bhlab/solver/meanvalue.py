"""Asymptotic mean-value iteration for the normalized p-parabolic equation.

One step maps ``u`` to ``u + theta * (w * mid + (1 - w) * avg - u)`` where
``mid`` is the midrange and ``avg`` the mean of ``u`` over the closed lattice
ball of radius ``eps``.  For a smooth ``u`` with nonvanishing gradient,

    mid - u ~ (eps^2 / 2) <D2u nu, nu>,   avg - u ~ (m2 / 2) trace D2u,

with ``m2`` the second moment of one coordinate over the ball offsets, so
the weights ``1 - w = 2 tau / m2`` and ``w = 2 (p - 2) tau / eps^2`` make one
step advance time by ``tau``.  ``theta <= 1`` shortens the last fraction so
the horizon is reached exactly.  For ``p < 2`` the weight ``w`` is negative
and the iteration is not monotone.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from ..operators import Jet, normalized_p_laplacian
from .field import GridField

__all__ = ["ball_offsets", "mean_value_weights", "mean_value_solve", "mean_value_consistency_check",
           "ball_extrema_quadratic", "CROSS_SOLVER_BAND", "cross_solver_band"]

# Declared agreement with the PDE solver: sup |u_pde - u_mv| <= band * eps * sup |u0|.
# The gap is first order because balls reaching past the boundary see the
# lateral value; measured ratios on (0, 1) strips lie in 0.2 - 0.55.
CROSS_SOLVER_BAND = 1.0


def cross_solver_band(eps: float, u0_sup: float) -> float:
    return CROSS_SOLVER_BAND * eps * u0_sup


def ball_offsets(R: int, dim: int) -> np.ndarray:
    g = np.arange(-R, R + 1)
    K = np.stack(np.meshgrid(*([g] * dim), indexing="ij"), -1).reshape(-1, dim)
    return K[np.sum(K ** 2, axis=1) <= R * R]


def mean_value_weights(p: float, dim: int, eps: float, h: float):
    """Return ``(w, tau, m2)`` for the lattice ball of radius ``eps``.

    Raises if the weights fail the consistency identities (unit total
    weight, matching second moment, positive time step).
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    R = int(round(eps / h))
    if R < 1 or abs(R * h - eps) > 1e-9 * eps:
        raise ValueError("eps must be a positive integer multiple of h")
    K = ball_offsets(R, dim) * h
    m2 = float(np.mean(K[:, 0] ** 2))
    tau = 1.0 / (2.0 / m2 + 2.0 * (p - 2.0) / eps ** 2)
    w = 2.0 * (p - 2.0) * tau / eps ** 2
    # Laplacian part: (1 - w) m2 / 2 = tau; directional part: w eps^2 / 2 = (p - 2) tau
    ok = (tau > 0 and math.isfinite(tau)
          and abs((1.0 - w) * 0.5 * m2 - tau) <= 1e-12 * tau
          and abs(w * 0.5 * eps ** 2 - (p - 2.0) * tau) <= 1e-12 * tau)
    if not ok:
        raise ValueError(f"mean-value weights for p={p}, eps={eps} fail the consistency identities")
    return w, tau, m2


def mean_value_solve(p: float, grid, eps: float, initial, lateral: float = 0.0, n_saves: int | None = None,
                     t0: float = 0.0) -> GridField:
    """Run the mean-value iteration on ``grid``'s lattice up to its horizon.

    ``initial`` is a callable on ``(N, n)`` points or a constant.  Points
    outside the base domain hold ``lateral``.
    """
    lat = grid.lattice
    dim, h = lat.dim, lat.h
    w, tau, _ = mean_value_weights(p, dim, eps, h)
    R = int(round(eps / h))
    T = grid.t_stop
    nsteps = max(1, math.ceil((T - t0) / tau - 1e-9))
    theta = (T - t0) / (nsteps * tau)
    dt = theta * tau
    init = np.asarray(initial(lat.coords), float) if callable(initial) else np.full(lat.npts, float(initial))
    U = lat.embed(init, lateral)
    offs = ball_offsets(R, dim)
    pad = np.pad(U, R, mode="constant", constant_values=lateral)
    inner = tuple(slice(R, R + s) for s in U.shape)
    every = max(1, nsteps // (n_saves or grid.n_saves))
    slices, times = [U.copy()], [t0]
    mask = lat.mask
    for k in range(1, nsteps + 1):
        mx = mn = sm = None
        for o in offs:
            v = pad[tuple(slice(R + o[i], R + o[i] + U.shape[i]) for i in range(dim))]
            if mx is None:
                mx, mn, sm = v.copy(), v.copy(), v.copy()
            else:
                np.maximum(mx, v, out=mx)
                np.minimum(mn, v, out=mn)
                sm += v
        cur = pad[inner]
        new = cur + theta * (w * 0.5 * (mx + mn) + (1.0 - w) * (sm / len(offs)) - cur)
        cur[mask] = new[mask]
        if not np.all(np.isfinite(cur[mask])):
            raise FloatingPointError(f"non-finite value in mean-value iteration at step {k}")
        if k % every == 0 or k == nsteps:
            slices.append(cur.copy())
            times.append(t0 + k * dt)
    meta = {"p": p, "eps": eps, "w": w, "tau": tau, "theta": theta, "nsteps": nsteps, "solver": "mean_value"}
    return GridField(h, dt, T, lat.origin, mask.copy(), np.array(times), np.stack(slices), lateral, meta, lat)


def _trust_max(g, H, eps):
    """max over |y| <= eps of g.y + y.H.y / 2 (exact up to root finding)."""
    lam, Q = np.linalg.eigh(H)
    gt = Q.T @ g
    if lam[-1] < 0:
        y = -gt / lam
        if np.linalg.norm(y) <= eps:
            return float(gt @ y + 0.5 * np.sum(lam * y * y))
    top = lam[-1]

    def norm_minus(mu):
        return np.linalg.norm(gt / (mu - lam)) - eps

    lo = top + 1e-14 * max(1.0, abs(top))
    if norm_minus(lo) < 0:
        # hard case (gradient orthogonal to the top eigenspace and the
        # stationary point inside the ball): fill up along the top eigenvector
        mask = lam < top - 1e-14 * max(1.0, abs(top))
        y = np.zeros_like(gt)
        y[mask] = gt[mask] / (top - lam[mask])
        rest = max(eps ** 2 - float(y @ y), 0.0)
        y[~mask] = 0.0
        y[np.flatnonzero(~mask)[0]] = math.sqrt(rest)
    else:
        hi = top + np.linalg.norm(gt) / eps + abs(top) + 1.0
        while norm_minus(hi) > 0:
            hi *= 2
        mu = brentq(norm_minus, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
        y = gt / (mu - lam)
    return float(gt @ y + 0.5 * np.sum(lam * y * y))


def ball_extrema_quadratic(j: Jet, eps: float):
    """Exact (max, min, mean) of the jet's quadratic over the closed ball."""
    g, H = j.Du, j.D2u
    mx = j.u + _trust_max(g, H, eps)
    mn = j.u - _trust_max(-g, -H, eps)
    avg = j.u + eps ** 2 / (2 * (j.n + 2)) * float(np.trace(H))
    return mx, mn, avg


def mean_value_consistency_check(p: float, j: Jet, eps: float) -> float:
    """|(mean-value operator on the jet's quadratic - u) / tau - Delta_p^N u|.

    Uses the continuum ball with weights ``(p - 2)/(p + n)`` on the midrange
    and ``(n + 2)/(p + n)`` on the mean, and ``tau = eps^2 / (2 (p + n))``.
    """
    n = j.n
    if np.linalg.norm(j.Du) <= 1e-8 * max(1.0, float(np.abs(j.D2u).max())) and p != 2:
        raise ValueError("consistency check needs a nonvanishing gradient")
    alpha = (p - 2.0) / (p + n)
    beta = (n + 2.0) / (p + n)
    tau = eps ** 2 / (2.0 * (p + n))
    mx, mn, avg = ball_extrema_quadratic(j, eps)
    op = alpha * 0.5 * (mx + mn) + beta * avg
    target = normalized_p_laplacian(j, p)
    if isinstance(target, tuple):
        target = 0.5 * (target[0] + target[1])
    return abs((op - j.u) / tau - target)
