"""First-stage dispatch: deterministic proxy and weighted-scenario solves.

The stochastic problem is solved in extensive form: first-stage dispatch
variables plus one full recourse block per scenario, with each block's
costs multiplied by that scenario's weight. A weight vector of 1/N gives
the usual sample average; importance and quadrature strategies supply
their own nonnegative weights.

The deterministic proxy is the same LP with a single zero-error scenario
at weight one, so the two code paths cannot drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InputError, NumericalError
from .lp import StandardFormLP, StartingBasis, solve_lp
from .model import SystemModel, TimestepInput, check_step
from .recourse import RecourseOutcome, _check_balance

_PROVENANCES = ("mc", "is", "bq")


@dataclass(frozen=True)
class WeightedScenarioSet:
    """Scenario support points and their quadrature weights.

    points has shape (N, n_wind): one error vector per scenario. Weights
    are nonnegative; they need not sum to one (raw importance weights and
    quadrature weights generally do not).
    """

    points: np.ndarray
    weights: np.ndarray
    provenance: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        wts = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InputError("points must be a nonempty (N, n_wind) array")
        if wts.shape[0] != pts.shape[0]:
            raise InputError(
                f"{wts.shape[0]} weights for {pts.shape[0]} scenario points"
            )
        if not np.all(np.isfinite(pts)) or not np.all(np.isfinite(wts)):
            raise InputError("scenario points and weights must be finite")
        if self.provenance not in _PROVENANCES:
            raise InputError(
                f"provenance {self.provenance!r} not one of {_PROVENANCES}"
            )
        neg = np.flatnonzero(wts < 0)
        if neg.size:
            raise InputError(
                f"scenario {neg[0]} has negative weight {wts[neg[0]]:g}"
            )
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", wts)

    @property
    def n_scenarios(self) -> int:
        return self.points.shape[0]

    @property
    def weight_sum(self) -> float:
        return float(np.sum(self.weights))


@dataclass(frozen=True)
class DispatchSolution:
    """First-stage dispatch with its per-scenario recourse breakdown."""

    dispatch: np.ndarray
    first_stage_cost: float
    expected_recourse: float
    outcomes: tuple[RecourseOutcome, ...]

    @property
    def objective(self) -> float:
        return self.first_stage_cost + self.expected_recourse


def _dispatch_bounds(sys: SystemModel, step: TimestepInput):
    lo = sys.gen_min()
    hi = sys.gen_max()
    if step.prev_dispatch is not None:
        lo = np.maximum(lo, step.prev_dispatch - sys.gen_ramp_down())
        hi = np.minimum(hi, step.prev_dispatch + sys.gen_ramp_up())
    bad = np.flatnonzero(lo > hi + 1e-12)
    if bad.size:
        g = sys.generators[bad[0]]
        raise InputError(
            f"generator {g.name}: ramp window [{lo[bad[0]]:g}, {hi[bad[0]]:g}] "
            "is empty given the previous dispatch"
        )
    return lo, np.maximum(hi, lo)


def assemble_extensive_form(
    sys: SystemModel, step: TimestepInput, scen: WeightedScenarioSet
) -> StandardFormLP:
    """Build the extensive-form LP.

    Columns: x_g for each generator, then per scenario a recourse block
    [omega, spill, unserved, surplus]. Rows: per scenario, one
    spill-definition equality per plant, then that scenario's balance row.
    """
    check_step(sys, step)
    if scen.points.shape[1] != sys.n_wind:
        raise InputError(
            f"scenario points have {scen.points.shape[1]} error dims for "
            f"{sys.n_wind} wind plants"
        )
    G, W, D, N = sys.n_gen, sys.n_wind, sys.n_load, scen.n_scenarios
    blk = 2 * W + 2 * D
    n = G + N * blk
    m = N * (W + 1)

    avail = np.maximum(step.wind_forecast[None, :] + scen.points, 0.0)  # (N, W)
    demand_total = float(np.sum(step.demand))

    lo_x, hi_x = _dispatch_bounds(sys, step)
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    lower[:G] = lo_x
    upper[:G] = hi_x
    col0 = G + blk * np.arange(N)  # first column of each block
    omega_cols = (col0[:, None] + np.arange(W)[None, :]).ravel()
    upper[omega_cols] = avail.ravel()

    block_cost = np.concatenate(
        [sys.wind_costs(), sys.spill_costs(), sys.shortfall_costs(), sys.surplus_costs()]
    )
    c = np.concatenate([sys.gen_costs(), (scen.weights[:, None] * block_cost).ravel()])

    row0 = (W + 1) * np.arange(N)
    spill_rows = (row0[:, None] + np.arange(W)[None, :]).ravel()
    bal_rows = row0 + W
    spill_cols = omega_cols + W
    yp_cols = (col0[:, None] + 2 * W + np.arange(D)[None, :]).ravel()
    ym_cols = yp_cols + D

    rows = np.concatenate(
        [
            spill_rows,  # omega in spill rows
            spill_rows,  # spill in spill rows
            np.repeat(bal_rows, G),  # x in balance rows
            np.repeat(bal_rows, W),  # omega in balance rows
            np.repeat(bal_rows, D),  # unserved
            np.repeat(bal_rows, D),  # surplus
        ]
    )
    cols = np.concatenate(
        [
            omega_cols,
            spill_cols,
            np.tile(np.arange(G), N),
            omega_cols,
            yp_cols,
            ym_cols,
        ]
    )
    vals = np.concatenate(
        [
            np.ones(2 * N * W + N * G + N * W + N * D),
            -np.ones(N * D),
        ]
    )
    a_eq = sp.csc_matrix((vals, (rows, cols)), shape=(m, n))

    b_eq = np.empty(m)
    b_eq[spill_rows] = avail.ravel()
    b_eq[bal_rows] = demand_total
    return StandardFormLP(
        c=c, a_eq=a_eq, b_eq=b_eq, lower=lower, upper=upper, names=()
    )


def _extensive_start(
    lp: StandardFormLP, sys: SystemModel, scen: WeightedScenarioSet
) -> StartingBasis:
    """Crash basis: per scenario the spill columns cover the spill rows and
    a slack column of the right sign covers the balance row; omega starts
    at full availability and x at its lower bound."""
    G, W, D, N = sys.n_gen, sys.n_wind, sys.n_load, scen.n_scenarios
    blk = 2 * W + 2 * D
    col0 = G + blk * np.arange(N)
    at_upper = np.zeros(lp.n_cols, dtype=bool)
    omega_cols = (col0[:, None] + np.arange(W)[None, :]).ravel()
    at_upper[omega_cols] = True

    avail_sum = lp.upper[omega_cols].reshape(N, W).sum(axis=1)
    residual = lp.b_eq[(W + 1) * np.arange(N) + W] - float(
        np.sum(lp.lower[:G])
    ) - avail_sum
    yp = 2 * W + int(np.argmin(sys.shortfall_costs()))
    ym = 2 * W + D + int(np.argmin(sys.surplus_costs()))
    bal_cols = np.where(residual >= 0, col0 + yp, col0 + ym)

    basic = np.empty(N * (W + 1), dtype=np.int64)
    spill_rows = ((W + 1) * np.arange(N)[:, None] + np.arange(W)[None, :]).ravel()
    basic[spill_rows] = omega_cols + W
    basic[(W + 1) * np.arange(N) + W] = bal_cols
    return StartingBasis(basic_cols=basic, at_upper=at_upper)


def solve_stochastic(
    sys: SystemModel, step: TimestepInput, scen: WeightedScenarioSet
) -> DispatchSolution:
    """Minimize first-stage cost plus weighted recourse over all scenarios."""
    lp = assemble_extensive_form(sys, step, scen)
    sol = solve_lp(lp, start=_extensive_start(lp, sys, scen))
    if sol.status != "optimal":
        raise NumericalError(f"extensive form returned status {sol.status}")

    G, W, D, N = sys.n_gen, sys.n_wind, sys.n_load, scen.n_scenarios
    blk = 2 * W + 2 * D
    x = sol.x[:G]
    block_cost = np.concatenate(
        [sys.wind_costs(), sys.spill_costs(), sys.shortfall_costs(), sys.surplus_costs()]
    )
    blocks = sol.x[G:].reshape(N, blk)
    outcomes = []
    for i in range(N):
        v = np.maximum(blocks[i], 0.0)
        out = RecourseOutcome(
            loss=float(block_cost @ v),
            wind_dispatch=v[:W],
            wind_spill=v[W : 2 * W],
            unserved=v[2 * W : 2 * W + D],
            surplus=v[2 * W + D :],
        )
        _check_balance(out, sys, step, x)
        outcomes.append(out)
    losses = np.array([o.loss for o in outcomes])
    return DispatchSolution(
        dispatch=x,
        first_stage_cost=float(sys.gen_costs() @ x),
        expected_recourse=float(scen.weights @ losses),
        outcomes=tuple(outcomes),
    )


def solve_deterministic(sys: SystemModel, step: TimestepInput) -> DispatchSolution:
    """Dispatch against the forecast alone: a single zero-error scenario
    with weight one appended to the first stage."""
    zero = WeightedScenarioSet(
        points=np.zeros((1, sys.n_wind)), weights=np.ones(1), provenance="mc"
    )
    return solve_stochastic(sys, step, zero)
