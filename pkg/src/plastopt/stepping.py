"""Time stepping for the regularized coupled system and the flow-rule ODE.

Two schemes on the coupled problem:

* explicit: z_k = z_{k-1} + dt * dI_lam(sigma_{k-1}) cell-wise, then an
  equilibrium re-solve.  Requires lam > 0; a forward-Euler stability
  guard (dt <= lam * gamma_A) triggers automatic substepping when
  enabled, otherwise a warning.
* implicit: per-step fixed point over (equilibrium solve, cell-wise
  radial return).  Supports lam = 0 (classical closest-point return
  mapping) and lam > 0 (the per-cell implicit relation has a radial
  closed form because the elasticity tensor is isotropic).
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .fem import ElasticSystem, SolverError
from .yield_surface import (
    RegularizationParams,
    YieldSet,
    yield_part,
    yosida_deriv_comps,
    yosida_deriv_smoothed_comps,
)
from .tensors import frob_norm_comps, tensor_trace


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = k * T / N on [0, T]."""

    T: float
    N: int

    def __post_init__(self):
        if self.T <= 0 or self.N < 1:
            raise ValueError("need T > 0 and N >= 1")

    @property
    def dt(self):
        return self.T / self.N

    @property
    def times(self):
        return np.linspace(0.0, self.T, self.N + 1)


@dataclass
class SolverConfig:
    scheme: str = "implicit"  # "explicit-euler" | "implicit-euler" accepted too
    rp: RegularizationParams = field(default_factory=lambda: RegularizationParams(0.0))
    newton_tol: float = 1e-11
    newton_maxit: int = 200
    smoothed: bool = False
    substep: bool = True

    def __post_init__(self):
        scheme = self.scheme.replace("-euler", "")
        if scheme not in ("explicit", "implicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        self.scheme = scheme
        if self.scheme == "explicit" and self.rp.lam <= 0:
            raise ValueError("explicit scheme requires lam > 0")


@dataclass
class Trajectory:
    grid: TimeGrid
    u: np.ndarray       # (N+1, n_nodes, dim)
    sigma: np.ndarray   # (N+1, n_cells, ncomp)
    z: np.ndarray       # (N+1, n_cells, ncomp)
    diagnostics: dict


def _flow_direction(b, dim):
    """Unit direction of the yield-constrained part; zero where degenerate."""
    r = frob_norm_comps(b, dim)
    safe = np.where(r > 0, r, 1.0)
    return b / safe[..., None], r


def _dev_modulus(elast, dim):
    """Action of C on the yield-constrained subspace (scalar, isotropy)."""
    if dim == 1:
        return 2.0 * elast.lame_mu + elast.lame_lambda
    return 2.0 * elast.lame_mu


def _radial_return_radius(rb, sigma_y, k):
    """Solve r + k * (r - sigma_y)_+ = rb; k = inf clamps to sigma_y."""
    if math.isinf(k):
        return np.minimum(rb, sigma_y)
    return np.where(rb <= sigma_y, rb, (rb + k * sigma_y) / (1.0 + k))


def _flow_deriv(ys, rp, smoothed, sigma, dim):
    if smoothed:
        return yosida_deriv_smoothed_comps(ys, rp, sigma, dim)
    return yosida_deriv_comps(ys, rp, sigma, dim)


def step_explicit(system: ElasticSystem, ys: YieldSet, cfg: SolverConfig,
                  dt, state, uD_k, ell_k, uD_prev=None, ell_prev=None):
    """One explicit step from state = (u, sigma, z) at t_{k-1}.

    When substepping is active the Dirichlet data and load are
    interpolated linearly between the surrounding macro nodes.
    """
    if cfg.rp.lam <= 0:
        raise ValueError("explicit step requires lam > 0")
    u_prev, sigma_prev, z_prev = state
    dim = system.mesh.dim
    dt_stable = cfg.rp.lam * system.elast.gamma_a(dim)
    nsub = 1
    if dt > dt_stable:
        if cfg.substep:
            nsub = int(math.ceil(dt / dt_stable))
        else:
            warnings.warn(
                f"explicit step dt={dt:.3e} exceeds stability bound "
                f"{dt_stable:.3e}; consider substepping", stacklevel=2)
    sigma, z = sigma_prev, z_prev.copy()
    if nsub == 1:
        z = z + dt * _flow_deriv(ys, cfg.rp, cfg.smoothed, sigma, dim)
        u, sigma = system.solve(z, uD_k, ell_k, check_residual=False)
        return u, sigma, z

    # substep fast path: the Dirichlet/load contributions to the rhs and
    # to the strain are affine in the substep fraction, so precompute the
    # endpoint terms once and interpolate inside the loop.
    if uD_prev is None:
        uD_prev = uD_k
    if ell_prev is None and ell_k is not None:
        ell_prev = np.zeros_like(np.asarray(ell_k, dtype=float))
    free = system.free
    nc = system.nc_comp

    def _bdry(uD_s, ell_s):
        r = -(system.stiffness @ np.asarray(uD_s, dtype=float).ravel())
        if ell_s is not None:
            r = r + np.asarray(ell_s, dtype=float).ravel()
        return r

    rhs0, rhs1 = _bdry(uD_prev, ell_prev), _bdry(uD_k, ell_k)
    e0 = system.strain_op @ np.asarray(uD_prev, dtype=float).ravel()
    e1 = system.strain_op @ np.asarray(uD_k, dtype=float).ravel()
    strain_free = system.strain_op_free
    dts = dt / nsub
    for s in range(1, nsub + 1):
        z = z + dts * _flow_deriv(ys, cfg.rp, cfg.smoothed, sigma, dim)
        frac = s / nsub
        rhs = system.z_force @ z.ravel() + rhs0 + frac * (rhs1 - rhs0)
        phi = system.lu.solve(rhs[free])
        strain = (e0 + frac * (e1 - e0) + strain_free @ phi).reshape(-1, nc)
        sigma = (strain - z) @ system.cmat.T
    uD_last = np.asarray(uD_k, dtype=float)
    u = uD_last.ravel().copy()
    u[free] += phi
    if not np.all(np.isfinite(u)):
        raise SolverError("direct solve produced non-finite values")
    return u.reshape(system.mesh.n_nodes, dim), sigma, z


def _implicit_cell_update(system, ys, rp, dt, strain_comps, z_prev):
    """Radial return at frozen strain: returns (z_new, sigma_new)."""
    dim = system.mesh.dim
    trial = strain_comps - z_prev
    sigma_trial = trial @ system.cmat.T
    b = yield_part(sigma_trial, dim)
    direction, rb = _flow_direction(b, dim)
    c_dev = _dev_modulus(system.elast, dim)
    k = math.inf if rp.lam == 0 else dt * c_dev / rp.lam
    r = _radial_return_radius(rb, ys.sigma_y, k)
    dgamma = np.maximum(rb - r, 0.0) / c_dev
    z_new = z_prev + dgamma[..., None] * direction
    sigma_new = sigma_trial + (r - rb)[..., None] * direction
    return z_new, sigma_new


def step_implicit(system: ElasticSystem, ys: YieldSet, cfg: SolverConfig,
                  dt, state, uD_k, ell_k):
    """One backward step: fixed point over equilibrium and radial return."""
    u_prev, sigma_prev, z_prev = state
    z_cur = z_prev.copy()
    sigma_old = None
    scale = max(math.sqrt(system.l2_norm_sq_p0(sigma_prev)), 1.0)
    last_err = math.inf
    for it in range(cfg.newton_maxit):
        u, _ = system.solve(z_cur, uD_k, ell_k, check_residual=False)
        strain_comps = (system.strain_op @ u.ravel()).reshape(-1, system.nc_comp)
        z_cur, sigma = _implicit_cell_update(system, ys, cfg.rp, dt,
                                             strain_comps, z_prev)
        if sigma_old is not None:
            last_err = math.sqrt(system.l2_norm_sq_p0(sigma - sigma_old))
            if last_err <= cfg.newton_tol * scale:
                u, sigma_eq = system.solve(z_cur, uD_k, ell_k)
                return u, sigma_eq, z_cur
        sigma_old = sigma
    raise SolverError(
        f"implicit step did not converge in {cfg.newton_maxit} iterations; "
        f"last stress increment {last_err:.3e}")


def run_trajectory(system: ElasticSystem, ys: YieldSet, cfg: SolverConfig,
                   tg: TimeGrid, uD_path, ell_path=None, init=None):
    """Full discrete trajectory with diagnostics.

    uD_path: (N+1, n_nodes, dim); ell_path: same shape or None;
    init: (u0, sigma0) arrays or None for the zero state.
    Preconditions: ell(0) = 0 and u_D(0) = u0 on the Dirichlet nodes.
    """
    mesh = system.mesh
    dim = mesh.dim
    uD_path = np.asarray(uD_path, dtype=float)
    if uD_path.shape != (tg.N + 1, mesh.n_nodes, dim):
        raise ValueError("uD_path has wrong shape")
    if ell_path is None:
        ell_path = np.zeros_like(uD_path)
    else:
        ell_path = np.asarray(ell_path, dtype=float)
        if ell_path.shape != uD_path.shape:
            raise ValueError("ell_path has wrong shape")
    if np.abs(ell_path[0].ravel()[system.free]).max(initial=0.0) > 1e-12:
        raise ValueError("precondition violated: ell(0) must vanish")

    if init is None:
        u0 = np.zeros((mesh.n_nodes, dim))
        sigma0 = np.zeros((mesh.n_cells, system.nc_comp))
    else:
        u0 = np.asarray(init[0], dtype=float)
        sigma0 = np.asarray(init[1], dtype=float)
    dmask = np.zeros(mesh.n_nodes, dtype=bool)
    dmask[mesh.dirichlet_nodes] = True
    if np.abs(uD_path[0][dmask] - u0[dmask]).max(initial=0.0) > 1e-12:
        raise ValueError("precondition violated: u_D(0) != u0 on Gamma_D")

    strain0 = (system.strain_op @ u0.ravel()).reshape(-1, system.nc_comp)
    z0 = strain0 - system.elast.apply_a_comps(sigma0, dim)
    if dim > 1 and np.abs(tensor_trace(z0, dim)).max(initial=0.0) > 1e-10:
        raise ValueError("initial plastic strain is not trace-free")

    N = tg.N
    u = np.zeros((N + 1, mesh.n_nodes, dim))
    sigma = np.zeros((N + 1, mesh.n_cells, system.nc_comp))
    z = np.zeros((N + 1, mesh.n_cells, system.nc_comp))
    u[0], sigma[0], z[0] = u0, sigma0, z0

    dt = tg.dt
    dissipation = np.zeros(N + 1)
    energy = np.zeros(N + 1)
    energy[0] = 0.5 * float(
        (mesh.volumes * (system.weights
                         * system.elast.apply_a_comps(sigma0, dim)
                         * sigma0).sum(axis=1)).sum())
    for k in range(1, N + 1):
        state = (u[k - 1], sigma[k - 1], z[k - 1])
        if cfg.scheme == "explicit":
            u[k], sigma[k], z[k] = step_explicit(
                system, ys, cfg, dt, state, uD_path[k], ell_path[k],
                uD_prev=uD_path[k - 1], ell_prev=ell_path[k - 1])
        else:
            u[k], sigma[k], z[k] = step_implicit(
                system, ys, cfg, dt, state, uD_path[k], ell_path[k])
        dz = z[k] - z[k - 1]
        dissipation[k] = float(
            (mesh.volumes * (system.weights * sigma[k] * dz).sum(axis=1)).sum())
        avals = system.elast.apply_a_comps(sigma[k], dim)
        energy[k] = 0.5 * float(
            (mesh.volumes * (system.weights * avals * sigma[k]).sum(axis=1)).sum())

    diagnostics = trajectory_diagnostics(system, tg, u, sigma, z, uD_path)
    diagnostics["dissipation_increments"] = dissipation
    diagnostics["elastic_energy"] = energy
    return Trajectory(tg, u, sigma, z, diagnostics)


def trajectory_diagnostics(system, tg, u, sigma, z, uD_path):
    """Discrete rate norms and regularity surrogates of a trajectory."""
    mesh = system.mesh
    dim = mesh.dim
    dt = tg.dt
    sigdot_sq = 0.0
    ud_sq = 0.0
    w1p_sup = system.w1p_surrogate(sigma[0])
    for k in range(1, tg.N + 1):
        rate = (sigma[k] - sigma[k - 1]) / dt
        sigdot_sq += dt * system.l2_norm_sq_p0(rate)
        ud_rate = (uD_path[k] - uD_path[k - 1]) / dt
        ud_sq += dt * (system.h1_norm_sq_p1(uD_path[k])
                       + system.h1_norm_sq_p1(ud_rate))
        w1p_sup = max(w1p_sup, system.w1p_surrogate(sigma[k]))
    trz = 0.0
    if dim > 1:
        trz = float(np.abs(tensor_trace(z, dim)).max())
    return {
        "sigma_rate_l2l2": math.sqrt(sigdot_sq),
        "uD_h1h1": math.sqrt(ud_sq),
        "w1p_surrogate_sup": w1p_sup,
        "max_abs_trace_z": trz,
    }


def evolve_flow_rule(w_path, elast, ys: YieldSet, rp: RegularizationParams,
                     tg: TimeGrid, sigma0, dim, scheme="implicit"):
    """Strain-rate-driven evolution A sigma' + dI_lam(sigma) = w per point.

    w_path: (N+1, n, ncomp) given at all time nodes; sigma0: (n, ncomp).
    lam = 0 requires the implicit scheme (projected evolution: per-step
    A-projection onto the admissible set, which for isotropic A is the
    Frobenius radial return on the yield-constrained part).
    Returns the (N+1, n, ncomp) stress trajectory.
    """
    w_path = np.asarray(w_path, dtype=float)
    sigma0 = np.asarray(sigma0, dtype=float)
    if scheme not in ("explicit", "implicit"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if rp.lam == 0 and scheme == "explicit":
        raise ValueError("lam = 0 requires the implicit scheme")
    yr = frob_norm_comps(yield_part(sigma0, dim), dim)
    if np.any(yr > ys.sigma_y * (1 + 1e-12)):
        raise ValueError("initial stress is not admissible")

    N, dt = tg.N, tg.dt
    out = np.zeros((N + 1,) + sigma0.shape)
    out[0] = sigma0
    c_dev = _dev_modulus(elast, dim)
    k_fac = math.inf if rp.lam == 0 else dt * c_dev / rp.lam
    for n in range(1, N + 1):
        if scheme == "explicit":
            rate = w_path[n - 1] - yosida_deriv_comps(ys, rp, out[n - 1], dim)
            out[n] = out[n - 1] + dt * elast.apply_c_comps(rate, dim)
        else:
            trial = out[n - 1] + dt * elast.apply_c_comps(w_path[n], dim)
            b = yield_part(trial, dim)
            direction, rb = _flow_direction(b, dim)
            r = _radial_return_radius(rb, ys.sigma_y, k_fac)
            out[n] = trial + (r - rb)[..., None] * direction
    return out
