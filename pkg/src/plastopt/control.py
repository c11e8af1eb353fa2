"""Regularized Dirichlet-control problem: objective, discrete adjoint
gradient, quasi-Newton optimization, and the continuation study over a
decreasing sequence of flow-rule regularization parameters.

The forward model is the smoothed explicit scheme; the gradient is the
exact reverse-mode transposition of its time-stepping recursion, so it
matches central finite differences of the discrete objective.

Objective (time sums are backward rectangle rules):

  J = sum_k dt [ ws * HsL1(strain_rate_k - mu_k)^2
               + wv * HvL1(velocity_k - v_k)^2 ]
    + alpha/2 * sum_k dt [ |uD_k|_Tik^2 + |uD_rate_k|_Tik^2 ]
    + lam^(-theta) * sum_k dt |ell_k|_{-1}^2
    + load_rate_weight * sum_k dt |ell_rate_k|_{-1}^2

HsL1/HvL1 are spatial L1 norms with pointwise Huber smoothing; |.|_Tik
is the H1 norm plus a recovered-second-derivative seminorm; |.|_{-1}
is the discrete dual load norm from the elastic stiffness.
"""

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import lbfgs
from .fem import ElasticSystem
from .stepping import TimeGrid, trajectory_diagnostics, Trajectory
from .yield_surface import (
    RegularizationParams,
    YieldSet,
    yosida_deriv_smoothed_comps,
    yosida_deriv_smoothed_jacobian,
)


@dataclass
class ControlParam:
    """Dirichlet data and auxiliary loads, nodal, per time node.

    uD: (N+1, n_nodes, dim); ell: (N+1, n_nodes, dim).
    Invariants: ell[0] = 0 and uD[0] = u0 on the Dirichlet nodes;
    ell entries on Dirichlet dofs are ignored by the state solve.
    """

    uD: np.ndarray
    ell: np.ndarray

    def copy(self):
        return ControlParam(self.uD.copy(), self.ell.copy())


@dataclass
class ObjectiveSpec:
    mu_target: np.ndarray        # (N, n_cells, ncomp) desired strain rates
    v_target: np.ndarray         # (N, n_nodes, dim) desired velocities
    alpha: float
    theta: float
    rp: RegularizationParams     # lam > 0, huber_eps > 0 (flow smoothing)
    huber_eps_obj: float
    load_rate_weight: float = 1.0
    track_strain_weight: float = 1.0
    track_velocity_weight: float = 1.0
    R_monitor: float = math.inf

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie strictly in (0, 1)")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.huber_eps_obj <= 0:
            raise ValueError("huber_eps_obj must be positive")


@dataclass
class OptReport:
    objective_values: list
    grad_norms: list
    ls_counts: list
    final_control: ControlParam
    final_objective: float
    breakdown: dict
    converged: bool
    message: str
    lam: float = math.nan
    load_norm: float = math.nan
    sigma_rate: float = math.nan


def _huber(s, eps):
    return np.where(s <= eps, s * s / (2.0 * eps), s - eps / 2.0)


def _huber_prime(s, eps):
    return np.where(s <= eps, s / eps, 1.0)


class ControlProblem:
    """Bundles the state solver with the objective for fixed targets."""

    def __init__(self, system: ElasticSystem, ys: YieldSet, tg: TimeGrid,
                 spec: ObjectiveSpec, u0=None, sigma0=None):
        if spec.rp.lam <= 0 or spec.rp.huber_eps <= 0:
            raise ValueError("adjoint path requires lam > 0 and a smoothed "
                             "flow rule (huber_eps > 0)")
        self.system = system
        self.ys = ys
        self.tg = tg
        self.spec = spec
        mesh = system.mesh
        self.dim = mesh.dim
        self.u0 = (np.zeros((mesh.n_nodes, self.dim))
                   if u0 is None else np.asarray(u0, dtype=float))
        self.sigma0 = (np.zeros((mesh.n_cells, system.nc_comp))
                       if sigma0 is None else np.asarray(sigma0, dtype=float))
        self.z0 = ((system.strain_op @ self.u0.ravel()).reshape(-1, system.nc_comp)
                   - system.elast.apply_a_comps(self.sigma0, self.dim))
        dt_stable = spec.rp.lam * system.elast.gamma_a(self.dim)
        if tg.dt > dt_stable:
            warnings.warn(
                f"dt={tg.dt:.3e} exceeds the explicit stability bound "
                f"{dt_stable:.3e}; the adjoint scheme does not substep",
                stacklevel=2)
        self._build_masks()

    # -- control packing -------------------------------------------------
    def _build_masks(self):
        mesh = self.system.mesh
        N = self.tg.N
        nn, dim = mesh.n_nodes, self.dim
        dnode = np.zeros(nn, dtype=bool)
        dnode[mesh.dirichlet_nodes] = True
        ud_mask = np.ones((N + 1, nn, dim), dtype=bool)
        ud_mask[0, dnode, :] = False          # pinned to u0
        ell_mask = np.zeros((N + 1, nn, dim), dtype=bool)
        ell_mask[1:, :, :] = self.system.free.reshape(nn, dim)[None, :, :]
        self.ud_mask = ud_mask
        self.ell_mask = ell_mask
        self.n_vars = int(ud_mask.sum() + ell_mask.sum())

    def initial_control(self):
        """Feasible constant-in-time control: uD = u0, ell = 0."""
        N = self.tg.N
        uD = np.repeat(self.u0[None], N + 1, axis=0)
        return ControlParam(uD, np.zeros_like(uD))

    def pack(self, cp: ControlParam):
        return np.concatenate([cp.uD[self.ud_mask], cp.ell[self.ell_mask]])

    def unpack(self, x):
        cp = self.initial_control()
        cp.ell[:] = 0.0
        n_ud = int(self.ud_mask.sum())
        cp.uD[self.ud_mask] = x[:n_ud]
        cp.ell[self.ell_mask] = x[n_ud:]
        return cp

    def check_feasible(self, cp: ControlParam):
        mesh = self.system.mesh
        dnode = mesh.dirichlet_nodes
        if np.abs(cp.uD[0][dnode] - self.u0[dnode]).max(initial=0.0) > 1e-12:
            raise ValueError("uD(0) must match u0 on the Dirichlet nodes")
        if np.abs(cp.ell[0].ravel()[self.system.free]).max(initial=0.0) > 1e-12:
            raise ValueError("ell(0) must vanish")

    # -- forward sweep ----------------------------------------------------
    def forward(self, cp: ControlParam):
        """Smoothed explicit trajectory; returns (u, sigma, z, strain)."""
        self.check_feasible(cp)
        sysm = self.system
        N, dt = self.tg.N, self.tg.dt
        mesh = sysm.mesh
        u = np.zeros((N + 1, mesh.n_nodes, self.dim))
        sig = np.zeros((N + 1, mesh.n_cells, sysm.nc_comp))
        z = np.zeros_like(sig)
        strn = np.zeros_like(sig)
        u[0], sig[0], z[0] = self.u0, self.sigma0, self.z0
        strn[0] = (sysm.strain_op @ self.u0.ravel()).reshape(-1, sysm.nc_comp)
        for k in range(1, N + 1):
            z[k] = z[k - 1] + dt * yosida_deriv_smoothed_comps(
                self.ys, self.spec.rp, sig[k - 1], self.dim)
            u[k], sig[k] = sysm.solve(z[k], cp.uD[k], cp.ell[k],
                                      check_residual=False)
            strn[k] = (sysm.strain_op @ u[k].ravel()).reshape(-1, sysm.nc_comp)
        return u, sig, z, strn

    # -- objective ----------------------------------------------------------
    def _huber_l1_p0(self, resid):
        """Huber-smoothed spatial L1 of a P0 tensor field: value, d/dresid."""
        sysm = self.system
        eps = self.spec.huber_eps_obj
        r = np.sqrt((sysm.weights * resid * resid).sum(axis=1))
        val = float((sysm.mesh.volumes * _huber(r, eps)).sum())
        safe = np.where(r > 0, r, 1.0)
        coef = sysm.mesh.volumes * _huber_prime(r, eps) / safe
        grad = coef[:, None] * (sysm.weights * resid)
        return val, grad

    def _huber_l1_p1(self, resid):
        """Huber-smoothed spatial L1 of a P1 vector field (lumped mass)."""
        sysm = self.system
        eps = self.spec.huber_eps_obj
        r = np.linalg.norm(resid, axis=1)
        val = float((sysm.mass_lumped * _huber(r, eps)).sum())
        safe = np.where(r > 0, r, 1.0)
        coef = sysm.mass_lumped * _huber_prime(r, eps) / safe
        grad = coef[:, None] * resid
        return val, grad

    def eval_objective(self, cp: ControlParam, want_parts=False):
        """Objective value, trajectory and a term-by-term breakdown."""
        u, sig, z, strn = self.forward(cp)
        J, parts, _, _ = self._objective_terms(cp, u, strn, grads=False)
        diags = trajectory_diagnostics(self.system, self.tg, u, sig, z, cp.uD)
        parts["r_monitor"] = (diags["sigma_rate_l2l2"]
                              + diags["w1p_surrogate_sup"])
        parts["r_monitor_budget"] = self.spec.R_monitor
        traj = Trajectory(self.tg, u, sig, z, diags)
        if want_parts:
            return J, traj, parts
        return J, traj

    def _objective_terms(self, cp, u, strn, grads=True):
        """Shared evaluation of all objective terms.

        Returns (J, parts, bar_u, bar_strain) where the bar arrays hold
        the tracking-term cotangents of u_k and strain_k (None when
        grads=False)."""
        sysm = self.system
        sp = self.spec
        N, dt = self.tg.N, self.tg.dt
        lam_pen = sp.rp.lam ** (-sp.theta)

        bar_u = np.zeros_like(u) if grads else None
        bar_e = np.zeros_like(strn) if grads else None

        j_strain = 0.0
        j_vel = 0.0
        for k in range(1, N + 1):
            rs = (strn[k] - strn[k - 1]) / dt - sp.mu_target[k - 1]
            hs, dhs = self._huber_l1_p0(rs)
            j_strain += dt * sp.track_strain_weight * hs * hs
            rv = (u[k] - u[k - 1]) / dt - sp.v_target[k - 1]
            hv, dhv = self._huber_l1_p1(rv)
            j_vel += dt * sp.track_velocity_weight * hv * hv
            if grads:
                ce = dt * sp.track_strain_weight * 2.0 * hs / dt * dhs
                bar_e[k] += ce
                bar_e[k - 1] -= ce
                cv = dt * sp.track_velocity_weight * 2.0 * hv / dt * dhv
                bar_u[k] += cv
                bar_u[k - 1] -= cv

        tik = sysm.tikhonov_mat
        j_tik = 0.0
        for k in range(1, N + 1):
            v = cp.uD[k].ravel()
            r = (cp.uD[k] - cp.uD[k - 1]).ravel() / dt
            j_tik += dt * float(v @ (tik @ v)) + dt * float(r @ (tik @ r))
        j_tik *= sp.alpha / 2.0

        j_load = 0.0
        j_load_rate = 0.0
        for k in range(1, N + 1):
            j_load += dt * sysm.hminus1_norm_sq(cp.ell[k])
            lr = (cp.ell[k] - cp.ell[k - 1]) / dt
            j_load_rate += dt * sysm.hminus1_norm_sq(lr)
        j_load *= lam_pen
        j_load_rate *= sp.load_rate_weight

        parts = {
            "tracking_strain": j_strain,
            "tracking_velocity": j_vel,
            "tikhonov": j_tik,
            "load": j_load,
            "load_rate": j_load_rate,
            "load_l2m1": math.sqrt(sum(
                dt * sysm.hminus1_norm_sq(cp.ell[k]) for k in range(1, N + 1))),
        }
        J = j_strain + j_vel + j_tik + j_load + j_load_rate
        return J, parts, bar_u, bar_e

    # -- adjoint gradient -------------------------------------------------
    def eval_gradient(self, cp: ControlParam):
        """Exact gradient of the discrete objective via reverse sweep.

        Returns (J, grad) with grad a ControlParam-shaped pair of arrays;
        pinned/ignored coefficients carry structural zeros."""
        sysm = self.system
        sp = self.spec
        N, dt = self.tg.N, self.tg.dt
        u, sig, z, strn = self.forward(cp)
        J, _, bar_u, bar_e = self._objective_terms(cp, u, strn, grads=True)

        g_uD = np.zeros_like(cp.uD)
        g_ell = np.zeros_like(cp.ell)
        cmat = sysm.cmat  # symmetric
        bar_z_next = None  # cotangent of z_{k+1}, flows into sigma_k and z_k
        for k in range(N, 0, -1):
            bar_sig_k = np.zeros_like(sig[k])
            if bar_z_next is not None:
                jac = yosida_deriv_smoothed_jacobian(
                    self.ys, sp.rp, sig[k], self.dim)
                bar_sig_k += dt * np.einsum("cij,ci->cj", jac, bar_z_next)
            # sigma_k = C(strain_k - z_k)
            bar_e_k = bar_e[k] + bar_sig_k @ cmat
            bu = bar_u[k].ravel() + sysm.strain_op.T @ bar_e_k.ravel()
            psi = np.zeros(sysm.mesh.n_dofs)
            psi[sysm.free] = sysm.adjoint_solve(bu[sysm.free])
            # u_k = uD_k + extension(K_ff^{-1} [Z2F z_k + ell_k - K uD_k]_f)
            g_uD[k] += bu.reshape(g_uD[k].shape)
            g_uD[k] -= (sysm.stiffness @ psi).reshape(g_uD[k].shape)
            g_ell[k] += psi.reshape(g_ell[k].shape)
            bar_z_k = (sysm.z_force.T @ psi).reshape(bar_sig_k.shape)
            bar_z_k -= bar_sig_k @ cmat
            if bar_z_next is not None:
                bar_z_k += bar_z_next
            bar_z_next = bar_z_k
        # remaining cotangent flows into z_0 / sigma_0 / u_0: all fixed data

        # explicit control terms
        tik = sysm.tikhonov_mat
        alpha = sp.alpha
        for k in range(1, N + 1):
            g_uD[k] += alpha * dt * (tik @ cp.uD[k].ravel()).reshape(
                g_uD[k].shape)
            rate = (cp.uD[k] - cp.uD[k - 1]).ravel() / dt
            tr = alpha * (tik @ rate).reshape(g_uD[k].shape)
            g_uD[k] += tr
            g_uD[k - 1] -= tr
        lam_pen = sp.rp.lam ** (-sp.theta)
        for k in range(1, N + 1):
            lf = cp.ell[k].ravel()
            sol = np.zeros_like(lf)
            sol[sysm.free] = sysm.lu.solve(lf[sysm.free])
            g_ell[k] += 2.0 * lam_pen * dt * sol.reshape(g_ell[k].shape)
            lr = (cp.ell[k] - cp.ell[k - 1]).ravel() / dt
            solr = np.zeros_like(lr)
            solr[sysm.free] = sysm.lu.solve(lr[sysm.free])
            tr = (2.0 * sp.load_rate_weight * solr).reshape(g_ell[k].shape)
            g_ell[k] += tr
            g_ell[k - 1] -= tr

        g_uD[~self.ud_mask] = 0.0
        g_ell[~self.ell_mask] = 0.0
        return J, ControlParam(g_uD, g_ell)


def optimize(problem: ControlProblem, cp0=None, maxit=200, gtol=1e-8,
             memory=10):
    """Quasi-Newton descent on the packed control coefficients."""
    if cp0 is None:
        cp0 = problem.initial_control()
    problem.check_feasible(cp0)

    def fg(x):
        cp = problem.unpack(x)
        J, grad = problem.eval_gradient(cp)
        return J, problem.pack(grad)

    res = lbfgs.minimize(fg, problem.pack(cp0), maxit=maxit, gtol=gtol,
                         memory=memory)
    cp_opt = problem.unpack(res.x)
    J, traj, parts = problem.eval_objective(cp_opt, want_parts=True)
    return OptReport(
        objective_values=[h[0] for h in res.history],
        grad_norms=[h[1] for h in res.history],
        ls_counts=[h[2] for h in res.history],
        final_control=cp_opt,
        final_objective=J,
        breakdown=parts,
        converged=res.converged,
        message=res.message,
        lam=problem.spec.rp.lam,
        load_norm=parts["load_l2m1"],
        sigma_rate=traj.diagnostics["sigma_rate_l2l2"],
    )


def lambda_continuation(system, ys, tg, spec: ObjectiveSpec, lambda_seq,
                        u0=None, sigma0=None, maxit=150, gtol=1e-7,
                        cp0=None, memory=10):
    """Solve the control problem along a decreasing lam sequence.

    Warm-starts every problem from the previous minimizer (the first one
    from cp0 when given) and records the trend quantities (J_lam, dual
    load norm, stress rate, control drift).  Per-lam failures are
    recorded and the sweep continues.
    """
    lams = list(lambda_seq)
    if any(l <= 0 for l in lams):
        raise ValueError("lambda sequence must be positive")
    if any(b >= a for a, b in zip(lams, lams[1:])):
        raise ValueError("lambda sequence must be strictly decreasing")

    reports = []
    cp_prev = cp0
    for lam in lams:
        spec_lam = replace(spec, rp=replace(spec.rp, lam=lam))
        problem = ControlProblem(system, ys, tg, spec_lam,
                                 u0=u0, sigma0=sigma0)
        cp_start = cp_prev if cp_prev is not None else problem.initial_control()
        try:
            rep = optimize(problem, cp_start, maxit=maxit, gtol=gtol,
                           memory=memory)
        except Exception as exc:  # record and continue the sweep
            rep = OptReport([], [], [], cp_start, math.nan,
                            {"error": str(exc)}, False, f"failed: {exc}",
                            lam=lam)
            reports.append(rep)
            continue
        if cp_prev is not None:
            drift = float(np.linalg.norm(
                rep.final_control.uD - cp_prev.uD))
            rep.breakdown["control_drift"] = drift
        cp_prev = rep.final_control
        reports.append(rep)
    return reports
