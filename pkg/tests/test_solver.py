import numpy as np
import pytest

from zmkit.solver import bounded_least_squares


def linear_problem():
    A = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    b = np.array([1.0, 2.0, 3.0])
    return (lambda x: A @ x - b), (lambda x: A), A, b


def test_unconstrained_linear_matches_lstsq():
    fun, jac, A, b = linear_problem()
    res = bounded_least_squares(fun, jac, [0.0, 0.0], [-10, -10], [10, 10])
    expected, *_ = np.linalg.lstsq(A, b, rcond=None)
    assert res.converged
    np.testing.assert_allclose(res.x, expected, atol=1e-9)
    assert not res.active.any()


def test_active_bound():
    fun, jac, *_ = linear_problem()
    res = bounded_least_squares(fun, jac, [0.0, 0.0], [-10, -10], [10, 1.5])
    assert res.converged
    assert res.x[1] == 1.5
    # with x2 pinned, x1 minimizes (x1-1)^2 + (x1+1.5-3)^2
    assert res.x[0] == pytest.approx(1.25, abs=1e-9)
    assert list(res.active) == [False, True]


def test_iterates_stay_feasible():
    lower, upper = np.array([0.0, 0.5]), np.array([2.0, 3.0])
    seen = []

    def fun(x):
        seen.append(x.copy())
        return np.array([x[0] ** 2 - 9.0, x[1] - 0.1, x[0] * x[1] - 1.0])

    def jac(x):
        return np.array([[2 * x[0], 0.0], [0.0, 1.0], [x[1], x[0]]])

    res = bounded_least_squares(fun, jac, [1.0, 1.0], lower, upper)
    assert res.converged
    for x in seen:
        assert np.all(x >= lower) and np.all(x <= upper)


def test_rosenbrock():
    fun = lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    jac = lambda x: np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])
    res = bounded_least_squares(fun, jac, [-1.2, 1.0], [-5, -5], [5, 5])
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-8)


def test_iteration_cap_reports_non_convergence():
    fun = lambda x: np.array([10 * (x[1] - x[0] ** 2), 1 - x[0]])
    jac = lambda x: np.array([[-20 * x[0], 10.0], [-1.0, 0.0]])
    res = bounded_least_squares(fun, jac, [-1.2, 1.0], [-5, -5], [5, 5], max_iter=2)
    assert not res.converged
    assert res.iterations == 2


def test_non_finite_start_raises():
    with pytest.raises(FloatingPointError):
        bounded_least_squares(lambda x: np.array([np.nan]), lambda x: np.ones((1, 1)), [0.0], [-1], [1])
