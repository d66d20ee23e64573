"""Scenario-based stochastic economic dispatch.

Two-stage dispatch under wind forecast error, solved in extensive form over
a weighted scenario set. Three interchangeable scenario strategies: plain
Monte Carlo, importance sampling from a loss-shaped proposal, and
kernel-quadrature nodes with solved weights. A rolling-horizon harness
replays a week of 5-minute decisions and accounts realized costs.
"""

from .dispatch import (
    DispatchSolution,
    WeightedScenarioSet,
    assemble_extensive_form,
    solve_deterministic,
    solve_stochastic,
)
from .errordist import (
    GaussianDensity,
    GridDistribution,
    StudentTDistribution,
    TParams,
    build_grid,
    fit_student_t,
    grid_from_values,
    persistence_errors,
    sample_grid,
)
from .errors import DataFormatError, InputError, IterationLimitError, NumericalError
from .gpbq import (
    BQRule,
    KernelConfig,
    bq_estimate,
    bq_variance,
    bq_weights,
    embedding_w,
    fit_surrogate,
    gp_posterior,
    prior_integral_Z,
    project_weights,
    quadrature_rule,
    select_points,
)
from .harness import (
    CostBreakdown,
    CostSummary,
    SimResult,
    Timeseries,
    evaluate_realized_cost,
    fit_error_distribution,
    resolve_kernel,
    run_rolling_horizon,
    summarize,
)
from .lp import LPSolution, StandardFormLP, solve_lp, verify_solution
from .model import (
    LoadBus,
    SystemModel,
    ThermalGenerator,
    TimestepInput,
    WindPlant,
    default_system,
    validate_system,
)
from .recourse import (
    RecourseOutcome,
    available_wind,
    build_recourse_lp,
    eval_loss_analytic,
    eval_loss_lp,
    loss_curve,
)
from .scenarios import (
    STRATEGY_KINDS,
    StrategyConfig,
    build_importance_distribution,
    generate_bq,
    generate_is,
    generate_mc,
)

__version__ = "0.1.0"

__all__ = [
    "BQRule",
    "CostBreakdown",
    "CostSummary",
    "DataFormatError",
    "DispatchSolution",
    "GaussianDensity",
    "GridDistribution",
    "InputError",
    "IterationLimitError",
    "KernelConfig",
    "LoadBus",
    "LPSolution",
    "NumericalError",
    "RecourseOutcome",
    "STRATEGY_KINDS",
    "SimResult",
    "StandardFormLP",
    "StrategyConfig",
    "StudentTDistribution",
    "SystemModel",
    "TParams",
    "ThermalGenerator",
    "Timeseries",
    "TimestepInput",
    "WeightedScenarioSet",
    "WindPlant",
    "assemble_extensive_form",
    "available_wind",
    "bq_estimate",
    "bq_variance",
    "bq_weights",
    "build_grid",
    "build_importance_distribution",
    "build_recourse_lp",
    "default_system",
    "embedding_w",
    "eval_loss_analytic",
    "eval_loss_lp",
    "evaluate_realized_cost",
    "fit_error_distribution",
    "fit_student_t",
    "fit_surrogate",
    "generate_bq",
    "generate_is",
    "generate_mc",
    "gp_posterior",
    "grid_from_values",
    "loss_curve",
    "persistence_errors",
    "prior_integral_Z",
    "project_weights",
    "quadrature_rule",
    "resolve_kernel",
    "run_rolling_horizon",
    "sample_grid",
    "select_points",
    "solve_deterministic",
    "solve_lp",
    "solve_stochastic",
    "summarize",
    "validate_system",
    "verify_solution",
]
