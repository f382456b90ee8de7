"""Pucci extremal operators, the extremal operators L+/L-, the normalized
p-Laplacian and linear non-divergence operators, evaluated on jets.

Symmetric matrices of size n <= 3 are diagonalised in closed form so that
the Pucci formula is exact to rounding; ``numpy.linalg`` is only used by the
brute-force oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "SymMatrix",
    "Ellipticity",
    "Jet",
    "sym_eigvals",
    "sym_eigvals_batch",
    "pucci_extremal",
    "pucci_batch",
    "pucci_bruteforce",
    "extremal_operator",
    "normalized_p_laplacian",
    "linear_nondiv_residual",
    "p_laplacian_ellipticity",
    "random_coefficient",
]

SIDES = ("plus", "minus")


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")


class SymMatrix:
    """A real symmetric n x n matrix, n in {1, 2, 3}.

    Construction symmetrizes the input and rejects inputs whose asymmetry
    exceeds ``atol`` relative to their size.
    """

    def __init__(self, entries, atol: float = 1e-12):
        a = np.array(entries, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] not in (1, 2, 3):
            raise ValueError(f"expected an n x n matrix with n <= 3, got shape {a.shape}")
        scale = max(1.0, float(np.abs(a).max()))
        if np.abs(a - a.T).max() > atol * scale:
            raise ValueError("matrix is not symmetric")
        self.a = 0.5 * (a + a.T)
        self.a.setflags(write=False)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def eigvals(self) -> np.ndarray:
        return sym_eigvals(self.a)

    def __array__(self, dtype=None, copy=None):
        return np.array(self.a, dtype=dtype)

    def __repr__(self) -> str:
        return f"SymMatrix({self.a.tolist()!r})"


@dataclass(frozen=True)
class Ellipticity:
    """Structure constants (lam, Lam, a) plus the optional zeroth-order bound b."""

    lam: float
    Lam: float
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.Lam < self.lam:
            raise ValueError(f"Lam={self.Lam} must be >= lam={self.lam}")
        if self.a < 0 or self.b < 0:
            raise ValueError("a and b must be nonnegative")

    def as_dict(self) -> dict:
        return {"lam": self.lam, "Lam": self.Lam, "a": self.a, "b": self.b}


@dataclass
class Jet:
    """Second-order parabolic jet (u, Du, D2u, u_t) at one point.

    ``ut`` is either a number or a ``(lo, hi)`` pair when the time derivative
    is only known to lie in an interval (one-sided derivatives differ).
    """

    u: float
    Du: np.ndarray
    D2u: np.ndarray
    ut: float | tuple = 0.0
    n: int = field(init=False)

    def __post_init__(self):
        self.Du = np.atleast_1d(np.asarray(self.Du, dtype=float))
        self.D2u = np.atleast_2d(np.asarray(self.D2u, dtype=float))
        self.n = self.Du.shape[0]
        if self.D2u.shape != (self.n, self.n):
            raise ValueError(f"Hessian shape {self.D2u.shape} does not match gradient size {self.n}")
        if not np.allclose(self.D2u, self.D2u.T, rtol=0, atol=1e-12 * max(1.0, np.abs(self.D2u).max())):
            raise ValueError("Hessian is not symmetric")

    def ut_bounds(self) -> tuple[float, float]:
        if isinstance(self.ut, tuple):
            return float(self.ut[0]), float(self.ut[1])
        return float(self.ut), float(self.ut)


# ---------------------------------------------------------------------------
# eigenvalues

def _eig2(a, b, c):
    m = 0.5 * (a + c)
    d = np.hypot(0.5 * (a - c), b)
    return m - d, m + d


def _eig3(A):
    """Eigenvalues of a stack of symmetric 3x3 matrices, ascending."""
    A = np.asarray(A, dtype=float)
    a11, a22, a33 = A[..., 0, 0], A[..., 1, 1], A[..., 2, 2]
    a12, a13, a23 = A[..., 0, 1], A[..., 0, 2], A[..., 1, 2]
    p1 = a12 * a12 + a13 * a13 + a23 * a23
    q = (a11 + a22 + a33) / 3.0
    p2 = (a11 - q) ** 2 + (a22 - q) ** 2 + (a33 - q) ** 2 + 2.0 * p1
    p = np.sqrt(p2 / 6.0)
    safe = np.where(p > 0, p, 1.0)
    b11, b22, b33 = (a11 - q) / safe, (a22 - q) / safe, (a33 - q) / safe
    b12, b13, b23 = a12 / safe, a13 / safe, a23 / safe
    detB = (b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13)
            + b13 * (b12 * b23 - b22 * b13))
    r = np.clip(0.5 * detB, -1.0, 1.0)
    phi = np.arccos(r) / 3.0
    e1 = q + 2.0 * p * np.cos(phi)
    e3 = q + 2.0 * p * np.cos(phi + 2.0 * np.pi / 3.0)
    e2 = 3.0 * q - e1 - e3
    e = np.stack([e3, e2, e1], axis=-1)

    # one Newton step on the characteristic polynomial
    tr = a11 + a22 + a33
    c2 = a11 * a22 + a11 * a33 + a22 * a33 - p1
    det = (a11 * (a22 * a33 - a23 * a23) - a12 * (a12 * a33 - a23 * a13)
           + a13 * (a12 * a23 - a22 * a13))
    tr, c2, det = tr[..., None], c2[..., None], det[..., None]
    f = ((e - tr) * e + c2) * e - det
    df = (3.0 * e - 2.0 * tr) * e + c2
    scale = np.maximum(np.abs(tr), np.sqrt(np.abs(c2)))
    ok = np.abs(df) > 1e-8 * np.maximum(scale, 1e-300) ** 2
    step = np.where(ok, f / np.where(ok, df, 1.0), 0.0)
    # a polish step is only accepted when it stays within the root's neighbourhood
    step = np.where(np.abs(step) < 1e-6 * np.maximum(scale, 1e-300), step, 0.0)
    e = e - step
    e = np.where((p > 0)[..., None], e, q[..., None] * np.ones(3))
    return np.sort(e, axis=-1)


def sym_eigvals_batch(M) -> np.ndarray:
    """Ascending eigenvalues of a stack of symmetric matrices (..., n, n)."""
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    if n == 1:
        return M[..., 0, :].copy()
    if n not in (2, 3):
        raise ValueError(f"dimension {n} not supported")
    # solve for the sign-normalized matrix (first nonzero upper entry positive)
    # so that the eigenvalues of -M are exactly the negated eigenvalues of M
    sgn = np.ones(M.shape[:-2])
    for i, j in reversed([(i, j) for i in range(n) for j in range(i, n)]):
        m = M[..., i, j]
        sgn = np.where(m != 0, np.where(m < 0, -1.0, 1.0), sgn)
    Ms = M * sgn[..., None, None]
    if n == 2:
        lo, hi = _eig2(Ms[..., 0, 0], Ms[..., 0, 1], Ms[..., 1, 1])
        e = np.stack([lo, hi], axis=-1)
    else:
        e = _eig3(Ms)
    return np.where(sgn[..., None] > 0, e, -e[..., ::-1])


def sym_eigvals(M) -> np.ndarray:
    if isinstance(M, SymMatrix):
        M = M.a
    return sym_eigvals_batch(np.asarray(M, dtype=float)[None])[0]


# ---------------------------------------------------------------------------
# Pucci operators

def _pucci_from_eigs(e, lam, Lam, side):
    # sum by increasing magnitude so both parts are independent of ordering
    pos = np.sort(np.where(e > 0, e, 0.0), axis=-1).sum(axis=-1)
    neg = -np.sort(np.where(e < 0, -e, 0.0), axis=-1).sum(axis=-1)
    if side == "plus":
        return Lam * pos + lam * neg
    return lam * pos + Lam * neg


def pucci_extremal(M, ell: Ellipticity, side: str = "plus") -> float:
    """Pucci extremal operator P+ or P- of a symmetric matrix."""
    _check_side(side)
    return float(_pucci_from_eigs(sym_eigvals(M), ell.lam, ell.Lam, side))


def pucci_batch(M, ell: Ellipticity, side: str = "plus") -> np.ndarray:
    """Vectorized :func:`pucci_extremal` over a stack (..., n, n)."""
    _check_side(side)
    return _pucci_from_eigs(sym_eigvals_batch(M), ell.lam, ell.Lam, side)


def random_coefficient(n: int, lam: float, Lam: float, rng: np.random.Generator) -> np.ndarray:
    """Random symmetric matrix with spectrum uniform in [lam, Lam]."""
    if n == 1:
        return np.array([[rng.uniform(lam, Lam)]])
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    d = rng.uniform(lam, Lam, size=n)
    return (q * d) @ q.T


def pucci_bruteforce(M, ell: Ellipticity, n_samples: int = 1000, seed: int = 0,
                     include_candidates: bool = True) -> float:
    """Oracle for P+: maximise trace(AM) over sampled A in [[lam, Lam]].

    When ``include_candidates`` is set, the 2**n matrices diagonal in the
    eigenbasis of M with entries in {lam, Lam} are added to the sample; the
    supremum is attained among them.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    M = np.asarray(M.a if isinstance(M, SymMatrix) else M, dtype=float)
    n = M.shape[0]
    rng = np.random.default_rng(seed)
    best = -np.inf
    for _ in range(n_samples):
        A = random_coefficient(n, ell.lam, ell.Lam, rng)
        best = max(best, float(np.trace(A @ M)))
    if include_candidates:
        _, V = np.linalg.eigh(M)
        for signs in np.ndindex(*(2,) * n):
            d = np.where(np.array(signs) == 1, ell.Lam, ell.lam)
            A = (V * d) @ V.T
            best = max(best, float(np.trace(A @ M)))
    return best


def extremal_operator(j: Jet, ell: Ellipticity, side: str = "plus") -> float:
    """Spatial part of L+ (plus) or L- (minus) including the b|u| term.

    L-u uses P-; the caller subtracts u_t.
    """
    _check_side(side)
    grad = float(np.linalg.norm(j.Du))
    P = pucci_extremal(j.D2u, ell, side)
    if side == "plus":
        return P + ell.a * grad + ell.b * abs(j.u)
    return P - ell.a * grad - ell.b * abs(j.u)


def p_laplacian_ellipticity(p: float) -> Ellipticity:
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    return Ellipticity(min(1.0, p - 1.0), max(1.0, p - 1.0))


def _default_directions(n: int) -> np.ndarray:
    if n == 1:
        return np.array([[1.0]])
    if n == 2:
        ang = np.arange(8) * np.pi / 8
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    dirs = [np.eye(3)[i] for i in range(3)]
    for i, j in ((0, 1), (0, 2), (1, 2)):
        for s in (1.0, -1.0):
            v = np.zeros(3)
            v[i], v[j] = 1.0, s
            dirs.append(v / np.sqrt(2.0))
    return np.array(dirs)


def normalized_p_laplacian(j: Jet, p: float, directions: Sequence | None = None,
                           eps_g: float | None = None):
    """Normalized p-Laplacian Δu + (p-2) <D2u e, e>, e = Du/|Du|.

    Returns a float when |Du| exceeds the gradient threshold. Below it the
    operator is set-valued and the pair ``(min, max)`` over ``directions`` of
    (δ_ij + (p-2) a_i a_j) D_ij u is returned instead.
    """
    if p <= 1:
        raise ValueError(f"p must exceed 1, got {p}")
    H = j.D2u
    g = float(np.linalg.norm(j.Du))
    if eps_g is None:
        eps_g = 1e-8 * max(float(np.abs(H).max()), 1e-300)
    if g > eps_g:
        e = j.Du / g
        return float(np.trace(H) + (p - 2.0) * (e @ H @ e))
    dirs = _default_directions(j.n) if directions is None else np.atleast_2d(np.asarray(directions, float))
    if len(dirs) == 0:
        raise ValueError("direction set must be nonempty")
    norms = np.linalg.norm(dirs, axis=1)
    if not np.allclose(norms, 1.0, atol=1e-12):
        raise ValueError("directions must be unit vectors")
    vals = np.trace(H) + (p - 2.0) * np.einsum("ki,ij,kj->k", dirs, H, dirs)
    return float(vals.min()), float(vals.max())


def linear_nondiv_residual(j: Jet, A, ell: Ellipticity | None = None, tol: float = 1e-10) -> float:
    """trace(A D2u) for a coefficient sample A whose spectrum lies in [lam, Lam]."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape != j.D2u.shape:
        raise ValueError("coefficient and Hessian shapes differ")
    if ell is not None:
        e = sym_eigvals(SymMatrix(A))
        scale = max(ell.Lam, 1.0)
        if e[0] < ell.lam - tol * scale or e[-1] > ell.Lam + tol * scale:
            raise ValueError(f"coefficient spectrum {e} outside [{ell.lam}, {ell.Lam}]")
    return float(np.sum(A * j.D2u))
