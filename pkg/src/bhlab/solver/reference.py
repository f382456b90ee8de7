"""Closed-form heat solutions used as oracles."""

import math
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

__all__ = ["heat_reference", "HEAT_MODES", "sector_eigenfunction", "sector_eigenvalue"]

HEAT_MODES = ("strip_sine", "gaussian")


def heat_reference(x, t, mode: str = "strip_sine", t_shift: float = 0.0):
    """Exact caloric functions.

    ``strip_sine``: ``exp(-pi^2 t) sin(pi x)`` on (0, 1).
    ``gaussian``: the free-space heat kernel ``(4 pi (t + t_shift))^{-n/2}
    exp(-|x|^2 / 4(t + t_shift))``; ``x`` of shape ``(..., n)`` (a plain array
    is read as 1-D points).
    """
    t = np.asarray(t, float)
    if mode == "strip_sine":
        x = np.asarray(x, float)
        return np.exp(-np.pi ** 2 * t) * np.sin(np.pi * x)
    if mode == "gaussian":
        x = np.asarray(x, float)
        if x.ndim == 0 or (x.ndim == 1 and t.ndim == 0 and x.shape != (1,)):
            x = x[..., None]
        n = x.shape[-1]
        s = t + t_shift
        if np.any(s <= 0):
            raise ValueError("gaussian reference needs t + t_shift > 0")
        return (4 * np.pi * s) ** (-n / 2) * np.exp(-np.sum(x ** 2, axis=-1) / (4 * s))
    raise ValueError(f"unknown mode {mode!r}; expected one of {HEAT_MODES}")


@lru_cache(maxsize=None)
def _first_bessel_zero(nu: float) -> float:
    # j_{nu,1} lies in (nu, nu + 2 pi) for nu >= 0; bracket on a grid first
    z = np.linspace(max(nu, 1e-3), nu + 2 * math.pi + 1.0, 400)
    v = jv(nu, z)
    k = int(np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:]))[0])
    return brentq(lambda x: jv(nu, x), z[k], z[k + 1], xtol=1e-15)


def sector_eigenvalue(omega: float, radius: float = 1.0) -> float:
    """First Dirichlet eigenvalue of the sector of opening ``omega``."""
    return (_first_bessel_zero(math.pi / omega) / radius) ** 2


def sector_eigenfunction(X, omega: float, radius: float = 1.0, t=0.0):
    """Caloric mode ``exp(-mu t) J_nu(sqrt(mu) rho) sin(nu theta)``, ``nu = pi/omega``,
    on the sector ``{0 < theta < omega, rho < radius}``; it vanishes on the
    whole boundary and behaves like ``rho^nu`` at the vertex."""
    X = np.asarray(X, float)
    nu = math.pi / omega
    mu = sector_eigenvalue(omega, radius)
    rho = np.linalg.norm(X, axis=-1)
    th = np.mod(np.arctan2(X[..., 1], X[..., 0]), 2 * math.pi)
    return np.exp(-mu * np.asarray(t, float)) * jv(nu, math.sqrt(mu) * rho) * np.sin(nu * th)
