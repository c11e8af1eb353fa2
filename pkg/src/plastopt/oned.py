"""Closed-form 1D benchmark: bar on (0,1), yield interval [-1,1], unit
elastic modulus, zero initial data, boundary drive u_D(t, x) = 2 t x.

The stress is unique and depends on time only: sigma(t) = 2t up to
t = 1/2, then stays at the yield value 1.  The displacement is NOT
unique for t > 1/2; three closed-form families are provided:

* "linear":          u = 2 t x everywhere;
* "two-phase" (beta): plastic flow confined to [0, beta];
* "frozen" (alpha, beta): frozen left part plus a slip discontinuity of
  size alpha (t - 1/2) at x = beta (a strain concentration).

`verify_weak_solution` checks equilibrium, stress admissibility and the
pointwise flow-rule sign condition on a grid by centered difference
quotients evaluated inside the smooth pieces, excluding a window of one
grid cell around the slip interface x = beta.
"""

import numpy as np

TIME_KINK = 0.5


def exact_stress(t):
    """Unique stress of the benchmark: min(2 t, 1) on [0, 1]."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("t must lie in [0, 1]")
    return np.minimum(2.0 * t, 1.0)


def displacement_family(variant, t, x, alpha=None, beta=None):
    """Closed-form displacement; all variants equal 2 t x for t <= 1/2."""
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(t < 0) or np.any(t > 1) or np.any(x < 0) or np.any(x > 1):
        raise ValueError("(t, x) must lie in [0, 1]^2")
    if variant == "linear":
        return 2.0 * t * x
    if variant == "two-phase":
        _check_beta(beta)
        early = 2.0 * t * x
        left = 2.0 * t * x / beta + x - x / beta
        right = 2.0 * t + x - 1.0
        late = np.where(x <= beta, left, right)
        return np.where(t <= TIME_KINK, early, late)
    if variant == "frozen":
        _check_beta(beta)
        if alpha is None or not 0.0 <= alpha <= 2.0:
            raise ValueError("alpha must lie in [0, 2]")
        early = 2.0 * t * x
        left = x
        right = alpha * t + x - alpha / 2.0
        late = np.where(x < beta, left, right)
        return np.where(t <= TIME_KINK, early, late)
    raise ValueError(f"unknown variant {variant!r}")


def _check_beta(beta):
    if beta is None or not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")


def verify_weak_solution(variant, resolution=200, alpha=None, beta=None,
                         stress_fn=None):
    """Numerical check of the weak-solution conditions on a grid.

    Returns a report dict with the maximal violations of equilibrium
    (spatial stress variation), admissibility (|sigma| <= 1), and the 1D
    flow-rule sign condition  u_t,x - sigma_t in dI_[-1,1](sigma).
    `stress_fn` overrides the exact stress (used to probe corrupted
    candidates).  Points within one grid cell of the slip interface
    x = beta and of the kink t = 1/2 are excluded.
    """
    n = int(resolution)
    if n < 8:
        raise ValueError("resolution too coarse")
    h = 1.0 / n
    fd = h / 4.0  # difference-quotient step, stays inside a smooth piece
    ts = np.linspace(2 * fd, 1.0 - 2 * fd, n)
    xs = np.linspace(2 * fd, 1.0 - 2 * fd, n)
    sig = stress_fn if stress_fn is not None else exact_stress

    tt, xx = np.meshgrid(ts, xs, indexing="ij")
    keep = np.abs(tt - TIME_KINK) > h
    if beta is not None:
        keep &= np.abs(xx - beta) > h

    def u(t, x):
        return displacement_family(variant, t, x, alpha=alpha, beta=beta)

    # centered difference quotients inside smooth pieces
    du_tx = ((u(tt + fd, xx + fd) - u(tt + fd, xx - fd))
             - (u(tt - fd, xx + fd) - u(tt - fd, xx - fd))) / (4 * fd * fd)
    s = np.broadcast_to(np.asarray(sig(tt[:, 0]))[:, None], tt.shape)
    s_t = (np.asarray(sig(np.clip(tt[:, 0] + fd, 0, 1)))
           - np.asarray(sig(np.clip(tt[:, 0] - fd, 0, 1))))[:, None] / (2 * fd)
    s_t = np.broadcast_to(s_t, tt.shape)

    admissibility = float(np.maximum(np.abs(s[keep]) - 1.0, 0.0).max())

    zdot = du_tx - s_t  # plastic strain rate (A = 1)
    interior = np.abs(s) < 1.0 - 1e-9
    at_plus = s >= 1.0 - 1e-9
    at_minus = s <= -1.0 + 1e-9
    flow = np.zeros_like(zdot)
    flow[interior] = np.abs(zdot[interior])
    flow[at_plus] = np.maximum(-zdot[at_plus], 0.0)
    flow[at_minus] = np.maximum(zdot[at_minus], 0.0)
    flow_violation = float(flow[keep].max())

    # equilibrium: maximal spatial variation of the stress candidate
    # (it depends on time only, so this is exact up to roundoff)
    equilibrium = float(np.abs(s - s[:, :1])[keep].max())

    return {
        "equilibrium": equilibrium,
        "admissibility": admissibility,
        "flow_rule": flow_violation,
        "max_violation": max(equilibrium, admissibility, flow_violation),
    }
