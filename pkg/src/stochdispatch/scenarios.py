"""Scenario generation strategies: plain Monte Carlo, loss-weighted
importance sampling, and GP quadrature rules, all emitting WeightedScenarioSet
so the extensive-form assembler treats them identically.

MC draws from the fitted error density with 1/N weights. IS draws from a
gridded proposal proportional to loss times density, built from a
deterministic proxy dispatch, and carries p/(Nq) weights. The quadrature
strategy needs no draws at all: nodes and weights depend only on the density
and kernel, so one rule serves every timestep.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .dispatch import WeightedScenarioSet, solve_deterministic
from .errordist import (
    DEFAULT_GRID_HALF_WIDTH,
    DEFAULT_GRID_NODES,
    GaussianDensity,
    GridDistribution,
    grid_from_values,
    sample_grid,
)
from .errors import InputError, NumericalError
from .gpbq import KernelConfig, project_weights, quadrature_rule
from .model import SystemModel, TimestepInput
from .recourse import loss_curve

log = logging.getLogger(__name__)

STRATEGY_KINDS = ("mc", "is", "bq")


@dataclass(frozen=True)
class StrategyConfig:
    kind: str  # one of STRATEGY_KINDS
    n_scenarios: int
    normalize_is: bool = False  # self-normalize p/q weights instead of p/(Nq)
    grid_nodes: int = DEFAULT_GRID_NODES
    grid_half_width: float = DEFAULT_GRID_HALF_WIDTH
    kernel: KernelConfig | None = None  # required for kind == "bq"

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise InputError(f"unknown strategy kind {self.kind!r}, expected one of {STRATEGY_KINDS}")
        if self.n_scenarios < 1:
            raise InputError(f"n_scenarios must be >= 1, got {self.n_scenarios}")


def generate_mc(p, n: int, rng: np.random.Generator) -> WeightedScenarioSet:
    """N i.i.d. draws from the nominal density, equal weights."""
    if n < 1:
        raise InputError("need at least one scenario")
    points = np.asarray(p.sample(n, rng), dtype=float)
    return WeightedScenarioSet(points=points, weights=np.full(n, 1.0 / n), provenance="mc")


def _as_grid(p, n_nodes: int, half_width: float) -> GridDistribution:
    if isinstance(p, GridDistribution):
        return p
    return p.to_grid(n_nodes=n_nodes, half_width=half_width)


def build_importance_distribution(
    sys: SystemModel,
    step: TimestepInput,
    p,
    n_nodes: int = DEFAULT_GRID_NODES,
    half_width: float = DEFAULT_GRID_HALF_WIDTH,
) -> tuple[GridDistribution, float, np.ndarray]:
    """Proposal q proportional to loss times density on a grid.

    The loss is evaluated at the proxy dispatch from the deterministic solve,
    so q concentrates where errors are actually expensive given a sensible
    first stage. mu_tilde is the trapezoid of L times p's own pdf values at
    the nodes (q's normalizer). A loss that is identically zero on the grid
    leaves q undefined; we fall back to q = p with a warning.
    """
    x_star = solve_deterministic(sys, step).dispatch
    if isinstance(p, GridDistribution):
        nodes, p_vals = p.nodes, p.density
    else:
        grid = _as_grid(p, n_nodes, half_width)
        nodes, p_vals = grid.nodes, np.atleast_1d(p.pdf(grid.nodes))
    losses = loss_curve(x_star, nodes, sys, step)
    mu_tilde = float(np.trapezoid(losses * p_vals, nodes))
    if mu_tilde <= 0.0:
        warnings.warn(
            "loss is zero everywhere on the grid; importance distribution "
            "falls back to the nominal density",
            RuntimeWarning,
            stacklevel=2,
        )
        return _as_grid(p, n_nodes, half_width), 0.0, x_star
    q = grid_from_values(nodes, losses * p_vals)
    return q, mu_tilde, x_star


def generate_is(
    q: GridDistribution,
    p,
    n: int,
    rng: np.random.Generator,
    normalize: bool = False,
) -> WeightedScenarioSet:
    """N draws from the proposal q with density-ratio weights p/(Nq)."""
    if n < 1:
        raise InputError("need at least one scenario")
    points = sample_grid(q, rng.random(n))
    q_at = np.atleast_1d(q.pdf(points))
    if np.any(q_at <= 0.0):
        raise NumericalError("proposal density vanished at a drawn point")
    weights = np.atleast_1d(p.pdf(points)) / (n * q_at)
    if normalize:
        weights = weights / weights.sum()
    return WeightedScenarioSet(points=np.atleast_1d(points), weights=weights, provenance="is")


def generate_bq(p, n: int, config: KernelConfig) -> WeightedScenarioSet:
    """Quadrature nodes and (projected) weights; no randomness involved."""
    if n < 1:
        raise InputError("need at least one scenario")
    if isinstance(p, (GridDistribution, GaussianDensity)):
        prior = p
    else:
        prior = _as_grid(p, DEFAULT_GRID_NODES, DEFAULT_GRID_HALF_WIDTH)
    rule = quadrature_rule(n, prior, config)
    weights = project_weights(rule.weights)
    if np.any(rule.weights < 0):
        log.info("projected %d negative quadrature weights at n=%d", int((rule.weights < 0).sum()), n)
    return WeightedScenarioSet(points=rule.nodes, weights=weights, provenance="bq")
