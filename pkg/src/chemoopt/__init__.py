"""Bilinear optimal control of a 2D chemo-repulsion system.

Library layout:

* :mod:`chemoopt.grid`       cell-centered mesh, Neumann operators, integration
* :mod:`chemoopt.linsolve`   matrix-free SPD solves (preconditioned CG)
* :mod:`chemoopt.forward`    semi-implicit, mass-conservative time stepping
* :mod:`chemoopt.functional` tracking-plus-cost objective
* :mod:`chemoopt.adjoint`    exact-transpose backward sweep, reduced gradient
* :mod:`chemoopt.optimizer`  projected gradient descent with Armijo search
* :mod:`chemoopt.config`     JSON problem specifications
* :mod:`chemoopt.output`     VTK and CSV writers
* :mod:`chemoopt.plots`      figure rendering for CLI reports
* :mod:`chemoopt.verify`     runtime invariant suite
* :mod:`chemoopt.cli`        command-line interface
"""

from .adjoint import (
    AdjointTrajectory,
    ControlGradient,
    adjoint_sweep,
    linearized_forward,
    reduced_gradient,
    solve_adjoint,
)
from .forward import (
    Control,
    ModelParams,
    TimeGrid,
    Trajectory,
    coupled_step_refine,
    mass_series,
    solve_forward,
    step_u,
    step_v,
)
from .functional import CostWeights, DesiredStates, evaluate_j
from .grid import (
    Grid,
    ScalarField,
    build_grid,
    chemotaxis_divergence,
    integrate,
    laplacian_apply,
)
from .linsolve import StencilOperator, solve_spd
from .optimizer import (
    BoxSet,
    FreeSet,
    OptimizeOptions,
    OptimizeReport,
    gradient_check,
    optimize,
    project,
    stationarity_residual,
)

__version__ = "0.1.0"

__all__ = [
    "Grid", "ScalarField", "build_grid", "laplacian_apply",
    "chemotaxis_divergence", "integrate",
    "StencilOperator", "solve_spd",
    "TimeGrid", "ModelParams", "Control", "Trajectory",
    "step_v", "step_u", "solve_forward", "coupled_step_refine", "mass_series",
    "CostWeights", "DesiredStates", "evaluate_j",
    "AdjointTrajectory", "ControlGradient", "adjoint_sweep", "solve_adjoint",
    "linearized_forward", "reduced_gradient",
    "FreeSet", "BoxSet", "OptimizeOptions", "OptimizeReport",
    "project", "stationarity_residual", "optimize", "gradient_check",
    "__version__",
]
