"""Cartesian lattice over a base domain with wide-stencil line geometry.

Lattice points are the multiples of ``h`` (anchored at the origin, so halving
``h`` nests the grids).  Points with negative signed distance are unknowns;
every other point is pinned to the lateral datum.  Along each stencil line
the first boundary crossing is located by bisection on the signed distance
(Shortley-Weller arms), and arm fractions are clipped from below at
``theta_min``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Domain

__all__ = ["Lattice", "stencil_lines"]


def stencil_lines(dim: int):
    """Integer line directions, the orthogonal frames they form, and for each
    line the other members of its frame.

    2-D: four frames at angles 0, atan(1/2), pi/4, atan(2), the lattice
    directions nearest to the pi/8 rotations.  3-D: the axis frame and three
    frames made of two face diagonals plus the remaining axis.
    """
    if dim == 1:
        lines = np.array([[1]])
        frames = np.array([[0]])
    elif dim == 2:
        lines = np.array([[1, 0], [0, 1], [2, 1], [-1, 2], [1, 1], [-1, 1], [1, 2], [-2, 1]])
        frames = np.array([[0, 1], [2, 3], [4, 5], [6, 7]])
    elif dim == 3:
        lines = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1],
                          [1, 1, 0], [1, -1, 0], [1, 0, 1], [1, 0, -1], [0, 1, 1], [0, 1, -1]])
        frames = np.array([[0, 1, 2], [3, 4, 2], [5, 6, 1], [7, 8, 0]])
    else:
        raise ValueError(f"dimension {dim} not supported")
    L = len(lines)
    # each line's home frame: the first frame containing it
    partners = np.zeros((L, dim - 1), dtype=np.int32)
    for l in range(L):
        f = next(fr for fr in frames if l in fr)
        partners[l] = [m for m in f if m != l]
    return lines, frames.astype(np.int32), partners


@dataclass
class Lattice:
    domain: Domain
    h: float
    ghost: int = 2
    theta_min: float = 0.5
    # filled in __post_init__
    shape: tuple = field(init=False)
    origin: np.ndarray = field(init=False)
    mask: np.ndarray = field(init=False, repr=False)
    index: np.ndarray = field(init=False, repr=False)
    ijk: np.ndarray = field(init=False, repr=False)
    coords: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if not 0 < self.theta_min <= 1:
            raise ValueError("theta_min must lie in (0, 1]")
        dom = self.domain
        lo, hi = dom.bbox()
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("lattices need a bounded domain")
        h = self.h
        ilo = np.floor(lo / h - 1e-9).astype(int) - self.ghost
        ihi = np.ceil(hi / h + 1e-9).astype(int) + self.ghost
        self.origin = ilo * h
        self.shape = tuple(int(v) for v in ihi - ilo + 1)
        grids = np.meshgrid(*[(ilo[k] + np.arange(self.shape[k])) * h for k in range(dom.dim)], indexing="ij")
        X = np.stack(grids, axis=-1)
        self.level = dom.sd(X)
        self.mask = self.level < -1e-12 * h
        self.index = np.full(self.shape, -1, dtype=np.int64)
        self.ijk = np.argwhere(self.mask)
        self.index[tuple(self.ijk.T)] = np.arange(len(self.ijk))
        self.coords = X[self.mask]
        if len(self.coords) == 0:
            raise ValueError("no lattice points inside the domain; refine h")
        self._build_lines()

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def npts(self) -> int:
        return len(self.ijk)

    def full_coords(self) -> np.ndarray:
        g = np.meshgrid(*[self.origin[k] + np.arange(self.shape[k]) * self.h for k in range(self.dim)],
                        indexing="ij")
        return np.stack(g, axis=-1)

    def _arm(self, d, sign):
        """Neighbour indices and arm fractions along +-d for all points."""
        dom, h = self.domain, self.h
        N = self.npts
        step = sign * d
        nb = self.ijk + step
        nb_idx = self.index[tuple(nb.T)]
        theta = np.ones(N)
        length = float(np.linalg.norm(d)) * h
        # points whose distance to the boundary exceeds the arm length are safe
        deep = self.level[self.mask] < -length * (1 + 1e-9)
        check = np.flatnonzero(~deep)
        out_idx = np.where(nb_idx >= 0, nb_idx, N).astype(np.int64)
        if check.size:
            x0 = self.coords[check]
            vec = step * h
            ks = np.arange(1, 9) / 8.0
            P = x0[:, None, :] + ks[None, :, None] * vec[None, None, :]
            lev = dom.sd(P)
            lev[:, -1] = np.where(nb_idx[check] >= 0, lev[:, -1], np.maximum(lev[:, -1], 0.0))
            outside = lev >= -1e-12 * h
            hit = outside.any(axis=1)
            rows = np.flatnonzero(hit)
            if rows.size:
                first = np.argmax(outside[rows], axis=1)
                a = np.where(first > 0, ks[np.maximum(first - 1, 0)], 0.0)
                b = ks[first]
                xr = x0[rows]
                for _ in range(60):
                    m = 0.5 * (a + b)
                    ins = dom.sd(xr + m[:, None] * vec) < 0
                    a = np.where(ins, m, a)
                    b = np.where(ins, b, m)
                th = np.maximum(0.5 * (a + b), self.theta_min)
                # a crossing at the lattice neighbour itself leaves theta = 1
                sel = check[rows]
                theta[sel] = np.minimum(th, 1.0)
                out_idx[sel] = N
        return out_idx, theta

    def _build_lines(self):
        lines, frames, partners = stencil_lines(self.dim)
        N, L, n = self.npts, len(lines), self.dim
        self.lines, self.frames, self.partners = lines, frames, partners
        self.E = lines / np.linalg.norm(lines, axis=1, keepdims=True)
        nP = np.empty((N, L), dtype=np.int32)
        nM = np.empty((N, L), dtype=np.int32)
        tP = np.empty((N, L))
        tM = np.empty((N, L))
        for l, d in enumerate(lines):
            nP[:, l], tP[:, l] = self._arm(d, 1)
            nM[:, l], tM[:, l] = self._arm(d, -1)
        lens = np.linalg.norm(lines, axis=1) * self.h
        hp = tP * lens
        hm = tM * lens
        self.nP, self.nM = nP, nM
        self.hp, self.hm = hp, hm
        self.cp = np.ascontiguousarray(2.0 / (hp * (hp + hm)))
        self.cm = np.ascontiguousarray(2.0 / (hm * (hp + hm)))
        self.gp = np.ascontiguousarray(1.0 / hp[:, :n])
        self.gm = np.ascontiguousarray(1.0 / hm[:, :n])
        self.span = np.ascontiguousarray(hp[:, :n] + hm[:, :n])
        self.n_boundary_arms = int(np.sum(nP == N) + np.sum(nM == N))

    def embed(self, vals, lateral: float = 0.0) -> np.ndarray:
        """Interior values -> full box array with pinned exterior."""
        full = np.full(self.shape, float(lateral))
        full[self.mask] = vals
        return full

    def min_theta(self) -> float:
        N = self.npts
        lens = np.linalg.norm(self.lines, axis=1) * self.h
        return float(min((self.hp / lens).min(), (self.hm / lens).min()))
