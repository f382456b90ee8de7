import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bhlab.operators import (Ellipticity, Jet, SymMatrix, extremal_operator, linear_nondiv_residual,
                             normalized_p_laplacian, p_laplacian_ellipticity, pucci_batch, pucci_extremal,
                             random_coefficient, sym_eigvals, sym_eigvals_batch)

entries = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def symmetric(draw, n=None):
    n = draw(st.sampled_from([1, 2, 3])) if n is None else n
    A = draw(arrays(float, (n, n), elements=entries))
    return SymMatrix(A + A.T)


@st.composite
def ellipticity(draw):
    lam = draw(st.floats(0.1, 2.0))
    return Ellipticity(lam, lam * draw(st.floats(1.0, 5.0)))


@given(symmetric())
def test_eigvals_match_lapack(M):
    ref = np.linalg.eigvalsh(M.a)
    assert np.allclose(sym_eigvals(M), ref, rtol=0, atol=1e-12 * max(1.0, np.abs(ref).max()))


@given(symmetric())
def test_eigvals_are_odd_bitwise(M):
    assert np.array_equal(sym_eigvals(SymMatrix(-M.a)), -sym_eigvals(M)[::-1])


def test_eigvals_batch_shape_and_repeated_roots():
    stack = np.array([np.eye(3), 2 * np.eye(3), np.diag([1.0, 1.0, -2.0])])
    e = sym_eigvals_batch(stack)
    assert e.shape == (3, 3)
    assert np.allclose(e, [[1, 1, 1], [2, 2, 2], [-2, 1, 1]], atol=1e-12)


@given(symmetric(), ellipticity())
def test_pucci_duality_is_exact(M, ell):
    assert pucci_extremal(M, ell, "minus") == -pucci_extremal(SymMatrix(-M.a), ell, "plus")


@given(symmetric(), ellipticity())
def test_pucci_orders_sampled_coefficients(M, ell):
    rng = np.random.default_rng(0)
    hi, lo = pucci_extremal(M, ell, "plus"), pucci_extremal(M, ell, "minus")
    tol = 1e-12 * max(1.0, abs(hi), abs(lo))
    for _ in range(8):
        v = float(np.trace(random_coefficient(M.n, ell.lam, ell.Lam, rng) @ M.a))
        assert lo - tol <= v <= hi + tol


@given(symmetric(2), symmetric(2), ellipticity())
def test_pucci_plus_is_sublinear(M, N, ell):
    s = pucci_extremal(SymMatrix(M.a + N.a), ell)
    assert s <= pucci_extremal(M, ell) + pucci_extremal(N, ell) + 1e-10 * (1 + abs(s))
    assert pucci_extremal(SymMatrix(3 * M.a), ell) == pytest.approx(3 * pucci_extremal(M, ell), rel=1e-12, abs=1e-12)


@given(symmetric(3), arrays(float, 3, elements=st.floats(-3, 3)), ellipticity())
def test_pucci_is_monotone(M, v, ell):
    N = SymMatrix(M.a + np.outer(v, v))
    assert pucci_extremal(N, ell) >= pucci_extremal(M, ell) - 1e-10 * (1 + np.abs(N.a).max())


@given(symmetric())
def test_pucci_with_unit_ellipticity_is_trace(M):
    ell = Ellipticity(1.0, 1.0)
    tr = float(np.trace(M.a))
    for side in ("plus", "minus"):
        assert pucci_extremal(M, ell, side) == pytest.approx(tr, abs=1e-11 * (1 + np.abs(M.a).max()))


def test_pucci_batch_matches_scalar():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((20, 3, 3))
    A = A + A.transpose(0, 2, 1)
    ell = Ellipticity(0.5, 2.0)
    assert np.array_equal(pucci_batch(A, ell, "minus"), [pucci_extremal(m, ell, "minus") for m in A])


def test_pucci_diagonal_values():
    # P+(diag(2, -1)) = Lam*2 + lam*(-1); P-(same) = lam*2 + Lam*(-1)
    ell = Ellipticity(0.5, 3.0)
    M = SymMatrix(np.diag([2.0, -1.0]))
    assert pucci_extremal(M, ell, "plus") == 5.5
    assert pucci_extremal(M, ell, "minus") == -2.0


def test_bad_side_and_bad_inputs():
    with pytest.raises(ValueError):
        pucci_extremal(SymMatrix(np.eye(2)), Ellipticity(1, 1), "both")
    with pytest.raises(ValueError):
        SymMatrix([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        SymMatrix(np.eye(4))
    with pytest.raises(ValueError):
        Ellipticity(2.0, 1.0)
    with pytest.raises(ValueError):
        Ellipticity(1.0, 1.0, a=-1.0)
    with pytest.raises(ValueError):
        Jet(0.0, [1.0, 0.0], np.eye(3))


def test_extremal_operator_adds_lower_order_terms():
    ell = Ellipticity(1.0, 2.0, a=0.5, b=0.25)
    j = Jet(-2.0, [3.0, 4.0], np.diag([1.0, -1.0]))
    assert extremal_operator(j, ell, "plus") == pytest.approx(2 - 1 + 0.5 * 5 + 0.25 * 2)
    assert extremal_operator(j, ell, "minus") == pytest.approx(1 - 2 - 0.5 * 5 - 0.25 * 2)


@given(arrays(float, (2, 2), elements=entries), arrays(float, 2, elements=st.floats(0.1, 5)),
       st.floats(1.1, 5.0))
def test_normalized_p_laplacian_formula(A, g, p):
    H = A + A.T
    e = g / np.linalg.norm(g)
    val = normalized_p_laplacian(Jet(0.0, g, H), p)
    assert val == pytest.approx(np.trace(H) + (p - 2) * e @ H @ e, rel=1e-12, abs=1e-10)
    ell = p_laplacian_ellipticity(p)
    tol = 1e-10 * (1 + np.abs(H).max())
    assert pucci_extremal(SymMatrix(H), ell, "minus") - tol <= val <= pucci_extremal(SymMatrix(H), ell, "plus") + tol


def test_normalized_p_laplacian_at_critical_point_is_set_valued():
    H = np.diag([1.0, -3.0])
    lo, hi = normalized_p_laplacian(Jet(0.0, [0.0, 0.0], H), 3.0)
    # min/max of trace + (p-2) e.H.e over unit e: -2 - 3 and -2 + 1
    assert (lo, hi) == pytest.approx((-5.0, -1.0))
    with pytest.raises(ValueError):
        normalized_p_laplacian(Jet(0.0, [0.0, 0.0], H), 3.0, directions=[[1.0, 1.0]])


def test_p2_is_the_laplacian():
    j = Jet(0.0, [0.3, -0.1], [[1.0, 0.4], [0.4, 2.0]])
    assert normalized_p_laplacian(j, 2.0) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        normalized_p_laplacian(j, 1.0)


def test_linear_residual_checks_spectrum():
    j = Jet(0.0, [0.0, 0.0], np.eye(2))
    ell = Ellipticity(1.0, 2.0)
    assert linear_nondiv_residual(j, np.diag([1.0, 2.0]), ell) == 3.0
    with pytest.raises(ValueError):
        linear_nondiv_residual(j, np.diag([0.5, 2.0]), ell)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_random_coefficient_spectrum(n):
    rng = np.random.default_rng(n)
    for _ in range(50):
        e = np.linalg.eigvalsh(random_coefficient(n, 0.5, 2.0, rng))
        assert e.min() >= 0.5 - 1e-12 and e.max() <= 2.0 + 1e-12


def test_p_laplacian_ellipticity():
    assert p_laplacian_ellipticity(3.0).as_dict() == {"lam": 1.0, "Lam": 2.0, "a": 0.0, "b": 0.0}
    assert p_laplacian_ellipticity(1.5).lam == 0.5
