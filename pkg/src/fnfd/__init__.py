"""Monotone finite-difference schemes for 1-D fully nonlinear elliptic problems.

Solves ``F(u'', u, x) = 0`` on ``(a, b)`` with Dirichlet data using
Lax-Friedrichs-like and Godunov-like numerical operators.
"""

from .assembly import BandMatrix, DiscreteSystem, GhostPolicy, SchemeConfig, jacobian_fd, residual
from .grid import Grid, GridFunction, linf_error, make_grid, piecewise_constant_eval
from .harness import (
    CoarseSolveInterpolate,
    ConvergenceRow,
    CustomFunction,
    LinearInterpolant,
    StudyConfig,
    emit_csv,
    emit_plot_data,
    emit_table,
    observed_order,
    preset_config,
    run_study,
)
from .operators import (
    GodunovExt,
    GodunovExtr,
    LaxFriedrichs,
    LFWeights,
    check_consistency,
    check_ellipticity,
    check_gmonotonicity,
    make_operator,
)
from .problems import PROBLEMS, Problem, get_problem
from .solvers import (
    FixedPointOptions,
    NewtonOptions,
    SolveReport,
    Status,
    mrho_map,
    mrho_solve,
    newton_solve,
    rho_window,
)

__version__ = "0.1.0"
