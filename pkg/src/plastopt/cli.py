"""Command-line entry point and study drivers.

Modes: ``simulate`` (one trajectory with exports), ``optimize``
(boundary-control optimization, optionally along a lambda-continuation
sequence), ``rate-study`` (regularization-gap rate fit on the pointwise
flow rule), ``oracle-1d`` (analytic benchmark dumps + self-test) and
``sweep`` (parallel parameter grid of simulations).

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 self-test failure (oracle or rate-study outside documented bounds).
Errors emit a single-line JSON record on stderr.
"""

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import fileio, report
from .config import ConfigError, load_config
from .control import (ControlParam, ObjectiveSpec, ControlProblem,
                      lambda_continuation, optimize)
from .fem import ElasticSystem, SolverError
from .mesh import build_interval_mesh, build_rect_mesh
from .oned import exact_stress, displacement_family, verify_weak_solution
from .stepping import (SolverConfig, TimeGrid, evolve_flow_rule,
                       run_trajectory)
from .tensors import ElasticityTensor
from .yield_surface import RegularizationParams, YieldSet

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_SELFTEST = 4


class SelfTestError(RuntimeError):
    """A self-checking mode found results outside its documented bounds."""


# -- scenario assembly ----------------------------------------------------

def build_scene(cfg):
    """Mesh, material and assembled equilibrium system from a config."""
    m = cfg["mesh"]
    if m["dim"] == 1:
        mesh = build_interval_mesh(m["nx"], dirichlet_spec=m["dirichlet"])
    else:
        mesh = build_rect_mesh(m["nx"], m["ny"], dirichlet_spec=m["dirichlet"])
    mat = cfg["material"]
    elast = ElasticityTensor(lame_lambda=mat["lame_lambda"], lame_mu=mat["mu"])
    ys = YieldSet(mat["sigma_y"])
    tg = TimeGrid(cfg["time"]["t_final"], cfg["time"]["steps"])
    system = ElasticSystem(mesh, elast)
    return mesh, elast, ys, tg, system


def drive_path(cfg, mesh, tg):
    """Nodal Dirichlet-data path for the configured drive preset.

    ramp (1D):    u(t, x) = a t x
    shear (2D):   u(t, x) = (a t x2, 0)
    stretch (2D): u(t, x) = (a t x1, -a t x2)   (trace-free strain)
    """
    preset = cfg["drive"]["preset"]
    amp = cfg["drive"]["amplitude"]
    x = mesh.nodes
    path = np.zeros((tg.N + 1, mesh.n_nodes, mesh.dim))
    for k, t in enumerate(tg.times):
        if preset == "ramp":
            path[k, :, 0] = amp * t * x[:, 0]
        elif preset == "shear":
            path[k, :, 0] = amp * t * x[:, 1]
        elif preset == "stretch":
            path[k, :, 0] = amp * t * x[:, 0]
            path[k, :, 1] = -amp * t * x[:, 1]
        else:
            raise ConfigError(f"unknown drive preset {preset!r}")
    return path


def _solver_config(cfg):
    s = cfg["solver"]
    rp = RegularizationParams(lam=s["lam"], huber_eps=s["huber_eps"])
    return SolverConfig(scheme=s["scheme"], rp=rp,
                        smoothed=s["huber_eps"] > 0, substep=s["substep"])


# -- mode drivers ----------------------------------------------------------

def run_simulate(cfg, outdir, verbosity=1):
    mesh, elast, ys, tg, system = build_scene(cfg)
    uD = drive_path(cfg, mesh, tg)
    traj = run_trajectory(system, ys, _solver_config(cfg), tg, uD)

    fileio.write_mesh(os.path.join(outdir, "mesh.txt"), mesh)
    fileio.write_field_p1(os.path.join(outdir, "u_final.csv"), mesh,
                          traj.u[-1], prefix="u")
    fileio.write_field_p0(os.path.join(outdir, "sigma_final.csv"), mesh,
                          traj.sigma[-1], prefix="s")
    fileio.write_field_p0(os.path.join(outdir, "z_final.csv"), mesh,
                          traj.z[-1], prefix="z")

    dt = tg.dt
    stress_norm = [math.sqrt(system.l2_norm_sq_p0(s)) for s in traj.sigma]
    rows = []
    for k in range(tg.N + 1):
        rate = 0.0
        if k > 0:
            rate = math.sqrt(system.l2_norm_sq_p0(
                (traj.sigma[k] - traj.sigma[k - 1]) / dt))
        rows.append([k, tg.times[k], rate,
                     traj.diagnostics["dissipation_increments"][k],
                     traj.diagnostics["elastic_energy"][k],
                     stress_norm[k]])
    fileio.write_csv(os.path.join(outdir, "diagnostics.csv"),
                     ["step", "t", "sigma_rate_l2", "dissipation_increment",
                      "elastic_energy", "sigma_norm_l2"], rows)

    d = traj.diagnostics
    bound = d["uD_h1h1"] / system.elast.gamma_a(mesh.dim)
    fileio.write_csv(os.path.join(outdir, "summary.csv"),
                     ["sigma_rate_l2l2", "uD_h1h1", "apriori_bound",
                      "w1p_surrogate_sup", "max_abs_trace_z"],
                     [[d["sigma_rate_l2l2"], d["uD_h1h1"], bound,
                       d["w1p_surrogate_sup"], d["max_abs_trace_z"]]])
    report.render_trajectory(os.path.join(outdir, "trajectory.png"),
                             tg.times, stress_norm,
                             d["dissipation_increments"],
                             d["elastic_energy"])
    if verbosity:
        print(f"simulate: {tg.N} steps, |sigma_rate|={d['sigma_rate_l2l2']:.6g}"
              f" (bound {bound:.6g}), max|tr z|={d['max_abs_trace_z']:.3e}")
    return EXIT_OK


def _targets_from_reference(cfg, system, ys, tg):
    """Tracking targets: strain rates and velocities of the drive run."""
    uD = drive_path(cfg, system.mesh, tg)
    traj = run_trajectory(system, ys, _solver_config(cfg), tg, uD)
    dt = tg.dt
    strains = np.array([(system.strain_op @ u.ravel()).reshape(
        system.mesh.n_cells, system.nc_comp) for u in traj.u])
    mu_target = (strains[1:] - strains[:-1]) / dt
    v_target = (traj.u[1:] - traj.u[:-1]) / dt
    return mu_target, v_target, uD


def run_optimize(cfg, outdir, verbosity=1):
    mesh, elast, ys, tg, system = build_scene(cfg)
    o = cfg["objective"]
    mu_target, v_target, uD_ref = _targets_from_reference(cfg, system, ys, tg)
    rp = RegularizationParams(lam=cfg["solver"]["lam"],
                              huber_eps=cfg["solver"]["huber_eps"])
    spec = ObjectiveSpec(mu_target=mu_target, v_target=v_target,
                         alpha=o["alpha"], theta=o["theta"], rp=rp,
                         huber_eps_obj=o["huber_eps_obj"],
                         load_rate_weight=o["load_rate_weight"],
                         track_strain_weight=o["strain_weight"],
                         track_velocity_weight=o["velocity_weight"])
    lams = cfg.get("continuation", {}).get("lambdas")

    if lams:
        # warm-start the first problem at the drive itself: the targets
        # are reachable from there, which keeps the sweep well-behaved
        cp0 = ControlParam(uD_ref.copy(), np.zeros_like(uD_ref))
        reports = lambda_continuation(system, ys, tg, spec, lams,
                                      maxit=o["maxit"], gtol=o["gtol"],
                                      cp0=cp0, memory=25)
        rows = []
        for rep in reports:
            rows.append([rep.lam, rep.final_objective, rep.load_norm,
                         rep.sigma_rate, int(rep.converged),
                         len(rep.objective_values),
                         rep.breakdown.get("control_drift", math.nan)])
        fileio.write_csv(os.path.join(outdir, "continuation.csv"),
                         ["lam", "objective", "load_norm_l2m1",
                          "sigma_rate_l2l2", "converged", "iterations",
                          "control_drift"], rows)
        report.render_continuation(
            os.path.join(outdir, "continuation.png"),
            [r.lam for r in reports],
            [r.final_objective for r in reports],
            [r.load_norm for r in reports])
        final = reports[-1]
    else:
        problem = ControlProblem(system, ys, tg, spec)
        final = optimize(problem, maxit=o["maxit"], gtol=o["gtol"])
        rows = [[i, f, g, ls] for i, (f, g, ls) in enumerate(
            zip(final.objective_values, final.grad_norms, final.ls_counts))]
        fileio.write_csv(os.path.join(outdir, "iterations.csv"),
                         ["iter", "objective", "grad_norm", "ls_count"], rows)

    _write_control(outdir, mesh, tg, final.final_control)
    parts = {k: v for k, v in final.breakdown.items()
             if isinstance(v, (int, float))}
    fileio.write_csv(os.path.join(outdir, "objective_breakdown.csv"),
                     list(parts), [list(parts.values())])
    if verbosity:
        print(f"optimize: lam={final.lam:g} J={final.final_objective:.6g} "
              f"load_norm={final.load_norm:.6g} converged={final.converged}")
    return EXIT_OK


def _write_control(outdir, mesh, tg, cp: ControlParam):
    ncols = mesh.dim
    header = (["step", "node"]
              + fileio.vector_column_names("uD", ncols)
              + fileio.vector_column_names("ell", ncols))
    rows = []
    for k in range(tg.N + 1):
        for i in range(mesh.n_nodes):
            rows.append([k, i] + list(cp.uD[k, i]) + list(cp.ell[k, i]))
    fileio.write_csv(os.path.join(outdir, "control_opt.csv"), header, rows)


def run_rate_study(cfg, outdir, verbosity=1):
    """Regularization-gap decay of the pointwise flow rule, w == 2.

    The driven evolution A sigma' + dI_lam(sigma) = w starts at 0 and is
    integrated implicitly; the gap to the lam = 0 evolution (clamped at
    the yield radius) is measured in C(L^2) and compared against the
    evaluated bound sqrt(lam * |C|^2 / gamma_C * |w - A sigma'|^2).
    """
    mat = cfg["material"]
    elast = ElasticityTensor(lame_lambda=mat["lame_lambda"],
                             lame_mu=mat["mu"])
    ys = YieldSet(mat["sigma_y"])
    r = cfg["rate_study"]
    tg = TimeGrid(r["t_final"], r["steps"])
    dim = 1
    w_path = np.full((tg.N + 1, 1, 1), 2.0)
    sigma0 = np.zeros((1, 1))

    rp0 = RegularizationParams(lam=0.0)
    sig_limit = evolve_flow_rule(w_path, elast, ys, rp0, tg, sigma0, dim,
                                 scheme="implicit")
    # |w - A sigma'|^2_{L2(L2)} evaluated on the limit trajectory
    c1d = 2.0 * elast.lame_mu + elast.lame_lambda
    rates = (sig_limit[1:] - sig_limit[:-1]) / tg.dt
    w_res_sq = float(tg.dt * ((w_path[1:] - rates / c1d) ** 2).sum())

    gaps, bounds = [], []
    for lam in r["lambdas"]:
        rp = RegularizationParams(lam=lam)
        sig = evolve_flow_rule(w_path, elast, ys, rp, tg, sigma0, dim,
                               scheme="implicit")
        gap = float(np.abs(sig - sig_limit).max())
        bound = math.sqrt(lam * elast.c_norm(dim) ** 2
                          / elast.gamma_c * w_res_sq)
        gaps.append(gap)
        bounds.append(bound)

    lams = np.asarray(r["lambdas"], dtype=float)
    slope = np.polyfit(np.log(np.sqrt(lams)), np.log(gaps), 1)[0]
    rows = [[lam, gap, bound, int(gap <= bound)]
            for lam, gap, bound in zip(lams, gaps, bounds)]
    fileio.write_csv(os.path.join(outdir, "rate_study.csv"),
                     ["lam", "gap_c_l2", "bound", "within_bound"], rows)
    fileio.write_csv(os.path.join(outdir, "summary.csv"),
                     ["fitted_order_sqrt_lam", "w_residual_sq"],
                     [[float(slope), w_res_sq]])
    report.render_rate_study(os.path.join(outdir, "rate_study.png"),
                             lams, gaps, bounds, float(slope))
    if verbosity:
        print(f"rate-study: fitted order {slope:.3f} in sqrt(lam), "
              f"{sum(g <= b for g, b in zip(gaps, bounds))}/{len(gaps)} "
              "within bound")
    if slope < 0.45 or any(g > b for g, b in zip(gaps, bounds)):
        raise SelfTestError(
            f"rate study outside documented bounds (order {slope:.3f})")
    return EXIT_OK


def run_oracle_1d(cfg, outdir, verbosity=1):
    o = cfg["oracle"]
    res = o["resolution"]
    times = np.linspace(0.0, 1.0, res + 1)
    sigma = np.array([exact_stress(t) for t in times])
    fileio.write_csv(os.path.join(outdir, "oracle_stress.csv"),
                     ["t", "sigma"], np.c_[times, sigma])
    report.render_oracle(os.path.join(outdir, "oracle_stress.png"),
                         times, sigma)

    variants = (["linear", "two-phase", "frozen"] if o["variant"] == "all"
                else [o["variant"]])
    xs = np.linspace(0.0, 1.0, res + 1)
    rows = []
    worst = 0.0
    for variant in variants:
        u_final = displacement_family(variant, 1.0, xs,
                                      alpha=o["alpha"], beta=o["beta"])
        fileio.write_csv(
            os.path.join(outdir, f"displacement_{variant}.csv"),
            ["x", "u"], np.c_[xs, u_final])
        rep = verify_weak_solution(variant, resolution=res,
                                   alpha=o["alpha"], beta=o["beta"])
        rows.append([variant, rep["equilibrium"], rep["admissibility"],
                     rep["flow_rule"], rep["max_violation"]])
        worst = max(worst, rep["max_violation"])
    fileio.write_csv(os.path.join(outdir, "verification.csv"),
                     ["variant", "equilibrium", "admissibility",
                      "flow_rule", "max_violation"], rows)
    if verbosity:
        print(f"oracle-1d: {len(variants)} variant(s) verified, "
              f"max violation {worst:.3e}")
    if worst > 1e-10:
        raise SelfTestError(
            f"weak-solution verification violated: {worst:.3e} > 1e-10")
    return EXIT_OK


def _sweep_worker(args):
    cfg, subdir = args
    os.makedirs(subdir, exist_ok=True)
    code = run_simulate(cfg, subdir, verbosity=0)
    fileio.write_manifest(subdir)
    _, rows = fileio.read_csv(os.path.join(subdir, "summary.csv"))
    return (cfg["solver"]["lam"], cfg["solver"]["scheme"],
            os.path.basename(subdir), rows[0], code)


def run_sweep(cfg, outdir, verbosity=1, threads=1):
    sw = cfg["sweep"]
    jobs = []
    idx = 0
    for scheme in sw["schemes"]:
        for lam in sw["lambdas"]:
            sub = dict((k, dict(v)) for k, v in cfg.items())
            sub["solver"]["lam"] = lam
            sub["solver"]["scheme"] = scheme
            sub["run"]["mode"] = "simulate"
            subdir = os.path.join(outdir, f"run_{idx:03d}_{scheme}_{lam:g}")
            jobs.append((sub, subdir))
            idx += 1

    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]

    rows = [[lam, scheme, name] + list(summ)
            for lam, scheme, name, summ, _ in results]
    fileio.write_csv(os.path.join(outdir, "sweep_summary.csv"),
                     ["lam", "scheme", "run", "sigma_rate_l2l2", "uD_h1h1",
                      "apriori_bound", "w1p_surrogate_sup",
                      "max_abs_trace_z"], rows)
    if verbosity:
        print(f"sweep: {len(results)} runs completed")
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def _error_record(exc, code):
    rec = {"error": type(exc).__name__, "message": str(exc),
           "exit_code": code}
    print(json.dumps(rec), file=sys.stderr)


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="plastopt",
        description="Quasi-static elasto-plasticity simulation and "
                    "Dirichlet boundary-control optimization.")
    parser.add_argument("--config", required=True, help="scenario file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for randomized property probes")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker pool size for sweep mode")
    parser.add_argument("--mode", default=None,
                        help="override the mode given in the config")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, mode_override=args.mode)
    except ConfigError as exc:
        _error_record(exc, EXIT_CONFIG)
        return EXIT_CONFIG
    mode = cfg["run"]["mode"]
    verbosity = cfg["run"]["verbosity"]

    os.makedirs(args.out, exist_ok=True)
    try:
        if mode == "simulate":
            code = run_simulate(cfg, args.out, verbosity)
        elif mode == "optimize":
            code = run_optimize(cfg, args.out, verbosity)
        elif mode == "rate-study":
            code = run_rate_study(cfg, args.out, verbosity)
        elif mode == "oracle-1d":
            code = run_oracle_1d(cfg, args.out, verbosity)
        else:
            code = run_sweep(cfg, args.out, verbosity, threads=args.threads)
    except ConfigError as exc:
        _error_record(exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except SelfTestError as exc:
        fileio.write_manifest(args.out)
        _error_record(exc, EXIT_SELFTEST)
        return EXIT_SELFTEST
    except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
        _error_record(exc, EXIT_SOLVER)
        return EXIT_SOLVER

    fileio.write_manifest(args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
