"""Limited-memory quasi-Newton descent with Armijo backtracking."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class MinimizeResult:
    x: np.ndarray
    f: float
    grad_norm: float
    n_iter: int
    converged: bool
    message: str
    history: list = field(default_factory=list)  # (f, grad_norm, ls_count)


def minimize(fg, x0, maxit=200, gtol=1e-8, memory=10,
             armijo_c=1e-4, max_ls=50, callback=None):
    """Minimize f via L-BFGS directions and Armijo halving line search.

    fg(x) returns (f, grad).  Accepted iterates strictly decrease f.
    Returns a MinimizeResult; `converged` is True iff the gradient norm
    dropped below gtol.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fg(x)
    s_list, y_list, rho_list = [], [], []
    history = [(f, float(np.linalg.norm(g)), 0)]
    message = "budget exhausted"
    converged = False
    it = 0
    for it in range(1, maxit + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= gtol:
            converged = True
            message = "gradient norm below tolerance"
            break

        p = -_two_loop(g, s_list, y_list, rho_list)
        slope = float(g @ p)
        if slope >= 0:  # safeguard: fall back to steepest descent
            p = -g
            slope = -gnorm**2
            s_list, y_list, rho_list = [], [], []

        alpha = 1.0
        ls_count = 0
        f_new, g_new, x_new = None, None, None
        while ls_count < max_ls:
            x_try = x + alpha * p
            f_try, g_try = fg(x_try)
            ls_count += 1
            if f_try <= f + armijo_c * alpha * slope:
                f_new, g_new, x_new = f_try, g_try, x_try
                break
            alpha *= 0.5
        if f_new is None:
            message = "line search failed"
            break

        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_list.append(s)
            y_list.append(y)
            rho_list.append(1.0 / sy)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        elif sy <= 0:
            # negative observed curvature: the stored model is stale and
            # keeps producing tiny full steps that pass Armijo forever
            s_list, y_list, rho_list = [], [], []
        x, f, g = x_new, f_new, g_new
        history.append((f, float(np.linalg.norm(g)), ls_count))
        if callback is not None:
            callback(it, x, f, g)

    return MinimizeResult(x, f, float(np.linalg.norm(g)), it,
                          converged, message, history)


def _two_loop(g, s_list, y_list, rho_list):
    q = g.copy()
    alphas = []
    for s, y, rho in zip(reversed(s_list), reversed(y_list),
                         reversed(rho_list)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if y_list:
        gamma = float(s_list[-1] @ y_list[-1]) / float(y_list[-1] @ y_list[-1])
        q *= gamma
    for (s, y, rho), a in zip(zip(s_list, y_list, rho_list),
                              reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q
