"""Yosida-regularized quasi-static perfect plasticity with boundary control.

Library layout:

- ``tensors``: symmetric-tensor component convention and isotropic
  elasticity operators C and A.
- ``yield_surface``: yield ball, radial projection, the Yosida flow map
  and its Huber-smoothed variant.
- ``mesh``: structured interval / rectangle meshes (P1 simplices).
- ``fem``: P1/P0 elastic equilibrium system, norms and dual norms.
- ``stepping``: explicit / implicit time stepping of the regularized
  flow rule, trajectory diagnostics, pointwise flow-rule evolutions.
- ``oned``: analytic uniaxial benchmark (stress ``min(2t, 1)``) and a
  grid-based weak-solution verifier.
- ``control``: tracking-type objective over Dirichlet data and an
  auxiliary volume load, discrete adjoint gradient, quasi-Newton
  optimization and lambda-continuation.
- ``lbfgs``: limited-memory quasi-Newton with Armijo backtracking.
- ``fileio`` / ``config`` / ``report`` / ``cli``: deterministic file
  formats, scenario configuration, figure rendering, command line.
"""

from .tensors import (SymTensor, ElasticityTensor, ncomp, frob_weights,
                      deviator, frob_inner, tensor_trace, deviator_comps,
                      frob_norm_comps)
from .yield_surface import (YieldSet, RegularizationParams, project_K,
                            yosida_value, yosida_deriv, yosida_deriv_smoothed,
                            project_comps, yosida_deriv_comps,
                            yosida_deriv_smoothed_comps, yield_part)
from .mesh import Mesh, build_interval_mesh, build_rect_mesh
from .fem import (ElasticSystem, FieldP1, FieldP0, SolverError, strain,
                  solve_equilibrium)
from .stepping import (TimeGrid, SolverConfig, Trajectory, run_trajectory,
                       evolve_flow_rule, trajectory_diagnostics)
from .oned import exact_stress, displacement_family, verify_weak_solution
from .control import (ControlParam, ObjectiveSpec, ControlProblem, OptReport,
                      optimize, lambda_continuation)

__version__ = "1.0.0"

__all__ = [
    "SymTensor", "ElasticityTensor", "ncomp", "frob_weights", "deviator",
    "frob_inner", "tensor_trace", "deviator_comps", "frob_norm_comps",
    "YieldSet", "RegularizationParams", "project_K", "yosida_value",
    "yosida_deriv", "yosida_deriv_smoothed", "project_comps",
    "yosida_deriv_comps", "yosida_deriv_smoothed_comps", "yield_part",
    "Mesh", "build_interval_mesh", "build_rect_mesh",
    "ElasticSystem", "FieldP1", "FieldP0", "SolverError", "strain",
    "solve_equilibrium",
    "TimeGrid", "SolverConfig", "Trajectory", "run_trajectory",
    "evolve_flow_rule", "trajectory_diagnostics",
    "exact_stress", "displacement_family", "verify_weak_solution",
    "ControlParam", "ObjectiveSpec", "ControlProblem", "OptReport",
    "optimize", "lambda_continuation",
]
