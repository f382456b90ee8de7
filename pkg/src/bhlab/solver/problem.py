"""Problem descriptions and coefficient fields for the lattice solver."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage

from ..operators import Ellipticity, p_laplacian_ellipticity

__all__ = ["KINDS", "ProblemSpec", "CoefficientField", "random_coefficient_field", "line_weights"]

KINDS = ("extremal_plus", "extremal_minus", "linear_nondiv", "p_laplacian")


@dataclass
class CoefficientField:
    """Static coefficient matrices ``A(x)`` for the linear class.

    ``kind`` is ``"identity"``, ``"constant"`` (``matrix`` given) or
    ``"random"``.  Random fields are drawn on their own cell mesh of size
    ``cell`` anchored at the origin, mollified over ``radius`` cells and
    sampled at lattice points by multilinear interpolation.  Averaging and
    interpolation are convex combinations, so the spectrum stays in
    ``[lam, Lam]`` everywhere.  Keeping ``cell`` fixed while refining the
    lattice gives the same continuous field on every grid.
    """

    kind: str = "identity"
    seed: int | None = None
    cell: float = 0.05
    radius: int = 3
    matrix: np.ndarray | None = None

    def evaluate(self, X, dim: int, lam: float, Lam: float) -> np.ndarray:
        X = np.asarray(X, float).reshape(-1, dim)
        if self.kind == "identity":
            return np.broadcast_to(np.eye(dim), (len(X), dim, dim)).copy()
        if self.kind == "constant":
            M = np.asarray(self.matrix, float).reshape(dim, dim)
            return np.broadcast_to(0.5 * (M + M.T), (len(X), dim, dim)).copy()
        if self.kind == "random":
            return random_coefficient_field(X, dim, lam, Lam, self.seed, self.cell, self.radius)
        raise ValueError(f"unknown coefficient kind {self.kind!r}")

    def as_dict(self):
        d = {"kind": self.kind, "seed": self.seed, "cell": self.cell, "radius": self.radius}
        if self.matrix is not None:
            d["matrix"] = np.asarray(self.matrix).tolist()
        return d


def _cell_matrices(shape, dim, lam, Lam, rng):
    count = int(np.prod(shape))
    ev = rng.uniform(lam, Lam, size=(count, dim))
    G = rng.standard_normal((count, dim, dim))
    Qm, R = np.linalg.qr(G)
    Qm = Qm * np.sign(np.einsum("kii->ki", R))[:, None, :]
    A = np.einsum("kij,kj,klj->kil", Qm, ev, Qm)
    return A.reshape(*shape, dim, dim)


def random_coefficient_field(X, dim, lam, Lam, seed, cell=0.05, radius=3, box=4.0):
    """Mollified random matrix field on ``[-box, box]^dim`` evaluated at X."""
    if seed is None:
        raise ValueError("random coefficient fields need a seed")
    ncell = int(np.ceil(2 * box / cell)) + 1
    shape = (ncell,) * dim
    rng = np.random.default_rng(seed)
    A = _cell_matrices(shape, dim, lam, Lam, rng)
    g = np.arange(-radius, radius + 1)
    K = np.stack(np.meshgrid(*([g] * dim), indexing="ij"), -1)
    ker = (np.sum(K ** 2, -1) <= radius ** 2).astype(float)
    ker /= ker.sum()
    sm = np.empty_like(A)
    for i in range(dim):
        for j in range(i, dim):
            sm[..., i, j] = ndimage.convolve(A[..., i, j], ker, mode="nearest")
            sm[..., j, i] = sm[..., i, j]
    coords = (np.asarray(X, float) + box) / cell
    if np.any(coords < 0) or np.any(coords > ncell - 1):
        raise ValueError(f"points outside the coefficient box [-{box}, {box}]")
    out = np.empty((len(X), dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            out[:, i, j] = ndimage.map_coordinates(sm[..., i, j], coords.T, order=1, mode="nearest")
            out[:, j, i] = out[:, i, j]
    return out


def line_weights(A: np.ndarray, lines: np.ndarray) -> np.ndarray:
    """Nonnegative weights w with sum_l w_l (e_l^T M e_l) = trace(A M).

    Diagonally dominant decomposition on the axis and (face) diagonal
    lines: an off-diagonal a_ij contributes 2|a_ij| to the diagonal with the
    matching sign and is removed from both axis weights.
    """
    N, n, _ = A.shape
    L = len(lines)
    w = np.zeros((N, L))
    if n == 1:
        w[:, 0] = A[:, 0, 0]
        return w
    lookup = {tuple(int(v) for v in d): k for k, d in enumerate(lines)}
    for i in range(n):
        w[:, i] = A[:, i, i]
    for i in range(n):
        for j in range(i + 1, n):
            a = A[:, i, j]
            plus = np.zeros(n, int)
            plus[i] = 1
            plus[j] = 1
            minus = plus.copy()
            minus[i] = -1  # (-1, 1) in 2-D
            if tuple(minus) not in lookup:
                minus = -minus  # (1, -1, 0) style in 3-D
            kp, km = lookup[tuple(plus)], lookup[tuple(minus)]
            w[:, kp] += np.where(a > 0, 2 * a, 0.0)
            w[:, km] += np.where(a < 0, -2 * a, 0.0)
            w[:, i] -= np.abs(a)
            w[:, j] -= np.abs(a)
    if np.any(w < -1e-14):
        raise ValueError("coefficient matrix is not diagonally dominant; "
                         "this decomposition needs Lam <= 3 lam (2-D) or Lam <= 2 lam (3-D)")
    return np.maximum(w, 0.0)


@dataclass
class ProblemSpec:
    """Operator, ellipticity, initial and lateral data.

    ``initial`` is a callable ``X -> values`` (``X`` of shape ``(N, n)``) or
    a constant.  For ``p_laplacian`` the ellipticity is derived from ``p``
    and a, b must vanish.
    """

    kind: str
    ell: Ellipticity = field(default_factory=lambda: Ellipticity(1.0, 1.0))
    initial: Callable | float = 0.0
    lateral: float = 0.0
    p: float | None = None
    coeff: CoefficientField = field(default_factory=CoefficientField)
    eps_g: float = 1e-8
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown operator kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "p_laplacian":
            if self.p is None or not self.p > 1:
                raise ValueError("p_laplacian needs p > 1")
            e = p_laplacian_ellipticity(self.p)
            self.ell = Ellipticity(e.lam, e.Lam, 0.0, 0.0)
        if self.kind == "linear_nondiv" and (self.ell.a != 0 or self.ell.b != 0):
            raise ValueError("linear_nondiv has no first- or zeroth-order terms")
        if not np.isfinite(self.lateral):
            raise ValueError("lateral datum must be finite")

    @property
    def autonomous(self) -> bool:
        return True  # coefficient fields are static

    def initial_values(self, X) -> np.ndarray:
        if callable(self.initial):
            v = np.asarray(self.initial(X), float).reshape(len(X))
        else:
            v = np.full(len(X), float(self.initial))
        if not np.all(np.isfinite(v)):
            raise ValueError("initial datum must be finite")
        return v

    def describe(self) -> dict:
        d = {"kind": self.kind, "ell": self.ell.as_dict(), "lateral": self.lateral, "label": self.label}
        if self.p is not None:
            d["p"] = self.p
        if self.kind == "linear_nondiv":
            d["coeff"] = self.coeff.as_dict()
        return d
