import numpy as np
import pytest

from plastopt.lbfgs import minimize

RNG = np.random.default_rng(5)


def quadratic(A, b):
    def fg(x):
        r = A @ x - b
        return 0.5 * float(r @ r), A.T @ r
    return fg


def test_quadratic_converges_to_solution():
    n = 20
    A = RNG.normal(size=(n, n)) + 3.0 * np.eye(n)
    b = RNG.normal(size=n)
    res = minimize(quadratic(A, b), np.zeros(n), maxit=500, gtol=1e-10)
    assert res.converged
    np.testing.assert_allclose(A @ res.x, b, atol=1e-7)
    # objective history is monotone (Armijo guarantees decrease)
    fs = [h[0] for h in res.history]
    assert all(a >= b_ - 1e-15 for a, b_ in zip(fs, fs[1:]))


def test_rosenbrock():
    def fg(x):
        a, b = 1.0, 100.0
        f = (a - x[0]) ** 2 + b * (x[1] - x[0] ** 2) ** 2
        g = np.array([-2 * (a - x[0]) - 4 * b * x[0] * (x[1] - x[0] ** 2),
                      2 * b * (x[1] - x[0] ** 2)])
        return f, g
    res = minimize(fg, np.array([-1.2, 1.0]), maxit=500, gtol=1e-9)
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)


def test_callback_and_history():
    seen = []
    fg = quadratic(np.eye(3), np.ones(3))
    res = minimize(fg, np.zeros(3), maxit=50, gtol=1e-12,
                   callback=lambda k, x, f, g: seen.append(k))
    assert len(seen) == len(res.history) - 1
    assert res.history[0][1] > res.history[-1][1]


def test_gtol_at_start():
    fg = quadratic(np.eye(2), np.zeros(2))
    res = minimize(fg, np.zeros(2), gtol=1e-8)
    assert res.converged
    assert len(res.history) == 1
