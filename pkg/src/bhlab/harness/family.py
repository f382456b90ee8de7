"""Families of nonnegative lattice solutions vanishing on the lateral boundary."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from ..geometry import Cylinder
from ..operators import Ellipticity
from ..solver import CoefficientField, GridField, GridSpec, ProblemSpec, solve

__all__ = ["Member", "SolutionFamily", "build_family", "FamilyError", "DEFAULT_P_LIST"]

DEFAULT_P_LIST = (1.5, 2.0, 3.0, 4.0)


class FamilyError(ValueError):
    pass


@dataclass
class Member:
    """One solution: its problem, its grid and (once solved) its field."""

    problem: ProblemSpec
    grid: GridSpec
    seed: int | None = None
    label: str = ""
    field: GridField | None = field(default=None, repr=False)
    scale: float = 1.0

    def solve(self, backend: str | None = None) -> GridField:
        if self.field is None:
            f = solve(self.problem, self.grid, backend=backend)
            self.field = f.scaled(self.scale) if self.scale != 1.0 else f
        return self.field

    @property
    def ell(self) -> Ellipticity:
        return self.problem.ell

    def scaled(self, c: float) -> "Member":
        """The member multiplied by ``c > 0`` (positive homogeneity keeps it in
        the class)."""
        if not c > 0:
            raise ValueError("scale must be positive")
        f = self.field.scaled(c) if self.field is not None else None
        return replace(self, field=f, scale=self.scale * c, label=f"{self.label}*{c:g}")

    def with_grid(self, grid: GridSpec) -> "Member":
        return replace(self, grid=grid, field=None)

    def describe(self) -> dict:
        return {"label": self.label, "seed": self.seed, "problem": self.problem.describe(), "h": self.grid.h}


@dataclass
class SolutionFamily:
    members: list
    descriptor: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.members)

    def __len__(self):
        return len(self.members)

    def solve(self, backend: str | None = None) -> "SolutionFamily":
        for m in self.members:
            m.solve(backend)
        return self

    def fields(self):
        return [m.solve() for m in self.members]

    def verify(self, tol: float = 0.0) -> dict:
        """Nonnegativity, zero lateral datum and the recorded sup bound.

        The bound is ``sup u(., 0) * exp(b T)`` (maximum principle; the factor
        covers a zeroth-order term).  Raises :class:`FamilyError` on failure.
        """
        out = {}
        for m in self.members:
            f = m.solve()
            if m.problem.lateral != 0.0:
                raise FamilyError(f"member {m.label} does not vanish on the lateral boundary")
            vmin = float(f.values.min())
            sup = f.sup()
            bound = float(np.abs(f.values[0]).max()) * np.exp(m.ell.b * f.T)
            if vmin < -tol:
                raise FamilyError(f"member {m.label} takes the negative value {vmin:.3g}")
            if sup > bound * (1 + 1e-12) + tol:
                raise FamilyError(f"member {m.label} exceeds its bound: {sup:.6g} > {bound:.6g}")
            out[m.label] = {"min": vmin, "sup": sup, "bound": bound}
        return out

    def refined(self, h: float) -> "SolutionFamily":
        """Same members on a lattice of step ``h`` (unsolved)."""
        grids = {}
        ms = []
        for m in self.members:
            g = grids.setdefault(id(m.grid), replace(m.grid, h=h))
            ms.append(m.with_grid(g))
        return SolutionFamily(ms, {**self.descriptor, "h": h})

    def scaled(self, c: float, which: int | None = None) -> "SolutionFamily":
        ms = [m.scaled(c) if which in (None, k) else m for k, m in enumerate(self.members)]
        return SolutionFamily(ms, dict(self.descriptor))


def build_family(cylinder: Cylinder, h: float, ell: Ellipticity, initial: Sequence[Callable],
                 seed: int = 0, p_list: Sequence[float] = DEFAULT_P_LIST, n_linear: int = 4,
                 coeff_cell: float = 0.05, grid_kw: dict | None = None, kinds=("linear", "extremal", "p")):
    """The default mix: ``n_linear`` random-linear members (seeds
    ``seed, seed+1, ...``), extremal plus/minus for the first two initial
    data, and one p-Laplacian member per entry of ``p_list``.

    ``initial`` needs at least two callables; members cycle through them.
    Random-linear members use ``(lam, Lam)`` of ``ell`` without lower-order
    terms.  The lattice is shared by all members.
    """
    if len(initial) < 2:
        raise ValueError("need at least two initial data")
    grid_kw = dict(grid_kw or {})
    base = GridSpec(cylinder, h, **grid_kw)
    lin_ell = Ellipticity(ell.lam, ell.Lam)
    members = []

    def add(problem, label, s=None):
        members.append(Member(problem, base, s, label))

    if "linear" in kinds:
        for k in range(n_linear):
            s = seed + k
            cf = CoefficientField("random", seed=s, cell=coeff_cell)
            add(ProblemSpec("linear_nondiv", lin_ell, initial[k % len(initial)], coeff=cf, label=f"linear[{s}]"),
                f"linear[{s}]", s)
    if "extremal" in kinds:
        for side in ("plus", "minus"):
            for k in range(2):
                lab = f"extremal_{side}[{k}]"
                add(ProblemSpec(f"extremal_{side}", ell, initial[k], label=lab), lab)
    if "p" in kinds:
        for k, p in enumerate(p_list):
            lab = f"p_laplacian[{p:g}]"
            add(ProblemSpec("p_laplacian", p=float(p), initial=initial[k % len(initial)], label=lab), lab)
    desc = {"ell": ell.as_dict(), "seed": seed, "p_list": list(p_list), "n_linear": n_linear, "h": h,
            "T": cylinder.T, "domain": cylinder.base.describe(), "kinds": list(kinds)}
    return SolutionFamily(members, desc)
