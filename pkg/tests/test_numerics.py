import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from missile_lqg import numerics as nx
from missile_lqg.errors import NotHurwitz, SingularMatrix


finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_lu_solve_identity():
    B = np.array([[1.0], [2.0], [3.0]])
    np.testing.assert_array_equal(nx.lu_solve(np.eye(3), B), B)


def test_lu_solve_diagonal():
    X = nx.lu_solve(np.diag([2.0, 4.0]), np.array([[2.0], [8.0]]))
    np.testing.assert_allclose(X, [[1.0], [2.0]])


def test_lu_solve_random_multiply_back():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((5, 5)) + 5 * np.eye(5)
    B = rng.standard_normal((5, 3))
    X = nx.lu_solve(A, B)
    assert nx.max_norm(A @ X - B) <= 1e-10


def test_lu_solve_singular():
    with pytest.raises(SingularMatrix):
        nx.lu_solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))


def test_kron_hand_expansion():
    np.testing.assert_array_equal(nx.kron([[1, 2]], [[3], [4]]), [[3, 6], [4, 8]])
    np.testing.assert_array_equal(
        nx.kron(np.eye(2), [[1, 2], [3, 4]]),
        [[1, 2, 0, 0], [3, 4, 0, 0], [0, 0, 1, 2], [0, 0, 3, 4]],
    )


def test_eigenvalues_closed_forms():
    np.testing.assert_allclose(nx.eigenvalues(np.diag([-1.0, -2.0, -3.0])), [-3, -2, -1])
    ev = nx.eigenvalues([[0.0, 1.0], [-1.0, 0.0]])
    np.testing.assert_allclose(sorted(ev.imag), [-1, 1], atol=1e-12)
    np.testing.assert_allclose(ev.real, 0, atol=1e-12)


def test_eigenvalues_match_char_poly_roots(nominal):
    ev = nx.eigenvalues(nominal.A)
    roots = nx.poly_roots(nx.char_poly(nominal.A))
    for z in ev:
        assert np.min(np.abs(roots - z)) < 1e-9


def test_is_hurwitz():
    assert nx.is_hurwitz(np.diag([-1.0, -0.1]))
    assert not nx.is_hurwitz(np.diag([-1.0, 0.0]))
    assert not nx.is_hurwitz(np.diag([-1.0, -0.1]), margin=0.5)


def test_lyapunov_closed_forms():
    np.testing.assert_allclose(nx.solve_lyapunov([[-1.0]], [[2.0]]), [[1.0]])
    np.testing.assert_allclose(nx.solve_lyapunov(-np.eye(2), np.eye(2)), 0.5 * np.eye(2))


def test_lyapunov_rejects_unstable():
    with pytest.raises(NotHurwitz):
        nx.solve_lyapunov(np.diag([1.0, -1.0]), np.eye(2))


def test_lyapunov_random_against_scipy():
    rng = np.random.default_rng(7)
    A = rng.standard_normal((4, 4)) - 4 * np.eye(4)
    M = rng.standard_normal((4, 4))
    Q = M @ M.T
    P = nx.solve_lyapunov(A, Q)
    assert nx.max_norm(A.T @ P + P @ A + Q) <= 1e-10 * (1 + nx.max_norm(P))
    np.testing.assert_allclose(P, P.T)
    np.testing.assert_allclose(P, scipy.linalg.solve_continuous_lyapunov(A.T, -Q), rtol=1e-9)


def test_char_poly_closed_forms(nominal):
    np.testing.assert_allclose(nx.char_poly(np.diag([1.0, 2.0])), [1, -3, 2])
    np.testing.assert_array_equal(nx.char_poly(np.zeros((3, 3))), [1, 0, 0, 0])
    np.testing.assert_allclose(nx.char_poly(nominal.A), np.real(np.poly(nx.eigenvalues(nominal.A))),
                               rtol=1e-10)


def test_char_poly_adjugate_identity():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((4, 4))
    coeffs, adj = nx.char_poly(A, return_adjugate=True)
    s = 0.7 + 1.3j
    lhs = sum(M * s ** (4 - k) for k, M in enumerate(adj, start=1))
    rhs = np.linalg.inv(s * np.eye(4) - A) * nx.polyval(coeffs, s)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_poly_roots_examples():
    r = nx.poly_roots([1.0, 17.8, 159.1])
    np.testing.assert_allclose(r.real, [-8.9, -8.9])
    assert np.all(r.imag != 0)
    np.testing.assert_allclose(sorted(nx.poly_roots([1.0, 0.0, -1.0]).real), [-1, 1])
    roots = np.array([-1.0, 2.0, -3.5, 0.5 + 1j, 0.5 - 1j])
    got = nx.poly_roots(nx.poly_from_roots(roots))
    for z in roots:
        assert np.min(np.abs(got - z)) < 1e-6


def test_poly_roots_zero_roots():
    r = nx.poly_roots([1.0, 2.0, 0.0, 0.0])
    assert np.sum(r == 0) == 2


def test_trapezoid_examples():
    assert nx.trapezoid(np.ones(11), 0.1) == pytest.approx(1.0)
    assert nx.trapezoid(np.linspace(0, 1, 11), 0.1) == pytest.approx(0.5, abs=1e-15)
    t = np.arange(0, 10 + 5e-4, 1e-3)
    assert nx.trapezoid(np.exp(-2 * t), 1e-3) == pytest.approx(0.5, abs=1e-6)


def test_matrix_rank():
    assert nx.matrix_rank(np.eye(3)) == 3
    assert nx.matrix_rank([[1.0, 2.0], [2.0, 4.0]]) == 1
    assert nx.matrix_rank(np.zeros((2, 2))) == 0


@settings(max_examples=50, deadline=None)
@given(arrays(float, (4, 4), elements=finite))
def test_eigenvalues_sum_is_trace(A):
    assert np.sum(nx.eigenvalues(A)).real == pytest.approx(np.trace(A), abs=1e-8 * (1 + nx.max_norm(A)) * 4)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 3), elements=finite))
def test_char_poly_matches_numpy(A):
    np.testing.assert_allclose(nx.char_poly(A), np.poly(A).real, atol=1e-8 * (1 + nx.max_norm(A)) ** 3)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=6))
def test_polyval_matches_numpy(coeffs):
    for s in (0.3, -1.7, 2.0 + 0.5j):
        assert nx.polyval(coeffs, s) == pytest.approx(np.polyval(coeffs, s), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(arrays(float, (3, 3), elements=finite), arrays(float, (3,), elements=finite))
def test_lu_solve_property(M, b):
    A = M + 35 * np.eye(3)
    x = nx.lu_solve(A, b)
    assert nx.max_norm(A @ x - b) <= 1e-9 * (1 + nx.max_norm(b))
