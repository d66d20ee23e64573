"""Rolling-horizon dispatch simulation over a week of 5-minute intervals.

Each step solves the scenario-weighted dispatch with ramp coupling to the
previous step's decision, then realizes the actual wind and prices the
resulting recourse. The error density is fit once on the whole wind series
(persistence errors); the importance proposal is rebuilt every step around
that step's proxy dispatch, while quadrature nodes/weights are built once
and reused across the week.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .dispatch import DispatchSolution, WeightedScenarioSet, solve_deterministic, solve_stochastic
from .errordist import StudentTDistribution, fit_student_t, persistence_errors
from .errors import InputError, NumericalError
from .gpbq import KernelConfig
from .model import SystemModel, TimestepInput
from .recourse import RecourseOutcome, eval_loss_lp
from .scenarios import (
    STRATEGY_KINDS,
    StrategyConfig,
    build_importance_distribution,
    generate_bq,
    generate_is,
    generate_mc,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Timeseries:
    timestamps: np.ndarray  # datetime64, strictly increasing
    load: np.ndarray  # MW
    wind: np.ndarray  # MW

    def __post_init__(self):
        stamps = np.asarray(self.timestamps)
        load = np.asarray(self.load, dtype=float)
        wind = np.asarray(self.wind, dtype=float)
        n = stamps.shape[0]
        if n < 2:
            raise InputError("timeseries needs at least 2 rows")
        if load.shape[0] != n or wind.shape[0] != n:
            raise InputError("timestamps, load, wind must have equal lengths")
        if np.any(np.diff(stamps).astype("timedelta64[s]").astype(float) <= 0):
            raise InputError("timestamps must be strictly increasing")
        if np.any(~np.isfinite(load)) or np.any(~np.isfinite(wind)):
            raise InputError("load and wind must be finite")
        if np.any(wind < 0):
            raise InputError("wind actuals must be nonnegative")
        object.__setattr__(self, "timestamps", stamps)
        object.__setattr__(self, "load", load)
        object.__setattr__(self, "wind", wind)

    def __len__(self) -> int:
        return self.timestamps.shape[0]


@dataclass(frozen=True)
class SimResult:
    """Per-step accounting of one rolling-horizon run.

    second_stage_realized prices the single actual error, not the scenario
    set; expected_recourse keeps the in-sample scenario-weighted estimate
    alongside for comparison.
    """

    strategy: str
    n_scenarios: int
    seed: int | None
    timestamps: np.ndarray  # decision steps (input rows 1..T-1)
    first_stage_cost: np.ndarray  # $ per step
    second_stage_realized: np.ndarray  # $ per step
    expected_recourse: np.ndarray  # $ per step, in-sample
    dispatch: np.ndarray  # (steps, n_gen) MW
    realized_xi: np.ndarray  # MW per step
    unserved_mw: np.ndarray  # MW per step

    @property
    def stage1_total(self) -> float:
        return float(self.first_stage_cost.sum())

    @property
    def stage2_total(self) -> float:
        return float(self.second_stage_realized.sum())

    @property
    def total_cost(self) -> float:
        return self.stage1_total + self.stage2_total

    @property
    def expected_recourse_total(self) -> float:
        return float(self.expected_recourse.sum())


def fit_error_distribution(wind_series) -> StudentTDistribution:
    """Student's t fit to one-step persistence errors of the wind series."""
    return StudentTDistribution(fit_student_t(persistence_errors(wind_series)))


def resolve_kernel(sys: SystemModel, p, mean_demand: float) -> KernelConfig:
    """Default kernel: output scale from the worst-case shortfall bill over a
    tenth of mean demand, length scale from the error spread."""
    tau = float(np.max(sys.shortfall_costs())) * mean_demand / 10.0
    length = float(getattr(p, "std_surrogate", p.std)())
    return KernelConfig(tau=tau, length_scale=length)


def run_rolling_horizon(
    sys: SystemModel,
    ts: Timeseries,
    strat: StrategyConfig,
    seed: int | None = None,
    p=None,
    kernel: KernelConfig | None = None,
) -> SimResult:
    if sys.n_wind != 1 or sys.n_load != 1:
        raise InputError("rolling horizon expects the flattened system: 1 wind plant, 1 load bus")
    if p is None:
        p = fit_error_distribution(ts.wind)
    rng = np.random.default_rng(seed)

    bq_set: WeightedScenarioSet | None = None
    if strat.kind == "bq":
        cfg = strat.kernel or kernel or resolve_kernel(sys, p, float(ts.load.mean()))
        bq_set = generate_bq(p, strat.n_scenarios, cfg)

    n_steps = len(ts) - 1
    first = np.zeros(n_steps)
    second = np.zeros(n_steps)
    expected = np.zeros(n_steps)
    xi = np.zeros(n_steps)
    unserved = np.zeros(n_steps)
    dispatch = np.zeros((n_steps, sys.n_gen))

    # ramp seed: deterministic solve against the first row, no prior dispatch
    seed_step = TimestepInput(
        demand=np.array([ts.load[0]]), wind_forecast=np.array([ts.wind[0]]), prev_dispatch=None
    )
    x_prev = solve_deterministic(sys, seed_step).dispatch

    for t in range(1, len(ts)):
        try:
            step = TimestepInput(
                demand=np.array([ts.load[t]]),
                wind_forecast=np.array([ts.wind[t - 1]]),
                prev_dispatch=x_prev,
            )
            if strat.kind == "mc":
                scen = generate_mc(p, strat.n_scenarios, rng)
            elif strat.kind == "is":
                q, _, _ = build_importance_distribution(
                    sys, step, p, strat.grid_nodes, strat.grid_half_width
                )
                scen = generate_is(q, p, strat.n_scenarios, rng, strat.normalize_is)
            else:
                scen = bq_set
            sol = solve_stochastic(sys, step, scen)
            xi_t = ts.wind[t] - ts.wind[t - 1]
            out = eval_loss_lp(sol.dispatch, np.array([xi_t]), sys, step)
        except Exception as exc:
            raise NumericalError(
                f"simulation failed at step {t} ({ts.timestamps[t]}): {exc}"
            ) from exc
        i = t - 1
        dispatch[i] = sol.dispatch
        first[i] = sol.first_stage_cost
        expected[i] = sol.expected_recourse
        second[i] = out.loss
        xi[i] = xi_t
        unserved[i] = out.unserved_total
        x_prev = sol.dispatch

    return SimResult(
        strategy=strat.kind,
        n_scenarios=strat.n_scenarios,
        seed=seed,
        timestamps=ts.timestamps[1:],
        first_stage_cost=first,
        second_stage_realized=second,
        expected_recourse=expected,
        dispatch=dispatch,
        realized_xi=xi,
        unserved_mw=unserved,
    )


@dataclass(frozen=True)
class CostBreakdown:
    wind_cost: float  # $
    spill_cost: float  # $
    loss_of_load_cost: float  # $
    excess_cost: float  # $

    @property
    def total(self) -> float:
        return self.wind_cost + self.spill_cost + self.loss_of_load_cost + self.excess_cost


def evaluate_realized_cost(x, xi, sys: SystemModel, step: TimestepInput) -> CostBreakdown:
    """Itemize the realized recourse bill into its four cost terms."""
    out: RecourseOutcome = eval_loss_lp(x, xi, sys, step)
    br = CostBreakdown(
        wind_cost=float(sys.wind_costs() @ out.wind_dispatch),
        spill_cost=float(sys.spill_costs() @ out.wind_spill),
        loss_of_load_cost=float(sys.shortfall_costs() @ out.unserved),
        excess_cost=float(sys.surplus_costs() @ out.surplus),
    )
    if abs(br.total - out.loss) > 1e-8 * (1.0 + abs(out.loss)):
        raise NumericalError(f"cost terms sum to {br.total}, LP loss is {out.loss}")
    return br


@dataclass(frozen=True)
class CostSummary:
    """Seed-averaged totals, rows indexed by scenario count, columns by
    strategy, in the fixed (mc, is, bq) order filtered to those present."""

    strategies: tuple[str, ...]
    counts: tuple[int, ...]
    total: np.ndarray
    stage1: np.ndarray
    stage2: np.ndarray


def _as_runs(entry) -> list[SimResult]:
    if isinstance(entry, SimResult):
        return [entry]
    runs = list(entry)
    if not runs:
        raise InputError("empty run list in results")
    return runs


def summarize(results: Mapping[str, Mapping[int, object]]) -> CostSummary:
    if not results:
        raise InputError("no results to summarize")
    strategies = tuple(k for k in STRATEGY_KINDS if k in results)
    if set(results) - set(strategies):
        raise InputError(f"unknown strategy keys: {sorted(set(results) - set(strategies))}")
    counts = sorted({n for by_n in results.values() for n in by_n})
    total = np.full((len(counts), len(strategies)), np.nan)
    stage1 = np.full_like(total, np.nan)
    stage2 = np.full_like(total, np.nan)
    for j, strat in enumerate(strategies):
        by_n = results[strat]
        for i, n in enumerate(counts):
            if n not in by_n:
                raise InputError(f"strategy {strat!r} missing scenario count {n}")
            runs = _as_runs(by_n[n])
            total[i, j] = float(np.mean([r.total_cost for r in runs]))
            stage1[i, j] = float(np.mean([r.stage1_total for r in runs]))
            stage2[i, j] = float(np.mean([r.stage2_total for r in runs]))
    return CostSummary(
        strategies=strategies, counts=tuple(counts), total=total, stage1=stage1, stage2=stage2
    )
