"""Second-stage recourse loss for a fixed dispatch.

Given first-stage dispatch x and a realized wind forecast error xi, the
recourse problem chooses wind usage, wind spill, unserved load, and excess
capacity to restore power balance at least cost. Thermal units do not
participate: their output is fixed between steps.

Two evaluation routes are provided on purpose. eval_loss_lp states the
problem as an LP and solves it with the package solver; eval_loss_analytic
computes the same optimum by a closed-form merit-order argument. The two
must agree, which the tests exploit, and the analytic route is cheap
enough to trace the whole loss curve over an error grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InputError, NumericalError
from .lp import LPSolution, StandardFormLP, StartingBasis, solve_lp
from .model import SystemModel, TimestepInput, check_step

_BALANCE_TOL = 1e-8


@dataclass(frozen=True)
class RecourseOutcome:
    """Optimal second-stage decision and its cost.

    wind_dispatch + wind_spill equals available wind per plant; unserved
    and surplus are the per-bus slack injections (at most one of the two
    aggregate sides is nonzero at an optimum with positive penalties).
    """

    loss: float
    wind_dispatch: np.ndarray
    wind_spill: np.ndarray
    unserved: np.ndarray
    surplus: np.ndarray

    @property
    def unserved_total(self) -> float:
        return float(np.sum(self.unserved))


def _check_recourse_args(x, xi, sys: SystemModel, step: TimestepInput):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    check_step(sys, step)
    if x.shape[0] != sys.n_gen:
        raise InputError(f"dispatch has {x.shape[0]} entries for {sys.n_gen} generators")
    if xi.shape[0] != sys.n_wind:
        raise InputError(f"error vector has {xi.shape[0]} entries for {sys.n_wind} plants")
    return x, xi


def available_wind(xi: np.ndarray, step: TimestepInput) -> np.ndarray:
    """Wind that can physically be delivered: forecast plus error, floored
    at zero because plant output cannot be negative."""
    return np.maximum(step.wind_forecast + xi, 0.0)


def build_recourse_lp(x, xi, sys: SystemModel, step: TimestepInput) -> StandardFormLP:
    """Assemble the recourse LP for fixed dispatch x and error xi.

    Variables are ordered [omega (per plant), spill (per plant),
    unserved (per bus), surplus (per bus)]. Rows are one spill-definition
    equality per plant followed by the single aggregate balance row.
    """
    x, xi = _check_recourse_args(x, xi, sys, step)
    W, D = sys.n_wind, sys.n_load
    n = 2 * W + 2 * D
    m = W + 1
    avail = available_wind(xi, step)

    c = np.concatenate(
        [sys.wind_costs(), sys.spill_costs(), sys.shortfall_costs(), sys.surplus_costs()]
    )
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    upper[:W] = avail

    rows = []
    cols = []
    vals = []
    for w in range(W):
        rows += [w, w]
        cols += [w, W + w]
        vals += [1.0, 1.0]
    bal = W
    for w in range(W):
        rows.append(bal)
        cols.append(w)
        vals.append(1.0)
    for q in range(D):
        rows += [bal, bal]
        cols += [2 * W + q, 2 * W + D + q]
        vals += [1.0, -1.0]
    a_eq = sp.csc_matrix(
        (np.asarray(vals), (np.asarray(rows), np.asarray(cols))), shape=(m, n)
    )
    b_eq = np.concatenate([avail, [float(np.sum(step.demand) - np.sum(x))]])

    names = (
        tuple(f"omega[{w.name}]" for w in sys.wind)
        + tuple(f"spill[{w.name}]" for w in sys.wind)
        + tuple(f"unserved[{q.name}]" for q in sys.loads)
        + tuple(f"surplus[{q.name}]" for q in sys.loads)
    )
    return StandardFormLP(c=c, a_eq=a_eq, b_eq=b_eq, lower=lower, upper=upper, names=names)


def _recourse_start(lp: StandardFormLP, sys: SystemModel) -> StartingBasis:
    """Feasible crash basis: spill columns carry the spill rows, and the
    cheapest slack of the right sign carries the balance row, with omega
    parked at its upper bound (full wind usage)."""
    W, D = sys.n_wind, sys.n_load
    n = lp.n_cols
    at_upper = np.zeros(n, dtype=bool)
    at_upper[:W] = True
    residual = lp.b_eq[W] - float(np.sum(lp.upper[:W]))
    if residual >= 0:
        bal_col = 2 * W + int(np.argmin(lp.c[2 * W : 2 * W + D]))
    else:
        bal_col = 2 * W + D + int(np.argmin(lp.c[2 * W + D :]))
    basic = np.concatenate([W + np.arange(W), [bal_col]])
    return StartingBasis(basic_cols=basic, at_upper=at_upper)


def _outcome_from_solution(
    sol: LPSolution, sys: SystemModel, step: TimestepInput, x: np.ndarray
) -> RecourseOutcome:
    W, D = sys.n_wind, sys.n_load
    v = sol.x
    out = RecourseOutcome(
        loss=sol.objective,
        wind_dispatch=np.maximum(v[:W], 0.0),
        wind_spill=np.maximum(v[W : 2 * W], 0.0),
        unserved=np.maximum(v[2 * W : 2 * W + D], 0.0),
        surplus=np.maximum(v[2 * W + D :], 0.0),
    )
    _check_balance(out, sys, step, x)
    return out


def _check_balance(out: RecourseOutcome, sys, step, x):
    injected = (
        float(np.sum(out.unserved) - np.sum(out.surplus))
        + float(np.sum(out.wind_dispatch))
        + float(np.sum(x))
    )
    scale = 1.0 + abs(float(np.sum(step.demand)))
    if abs(injected - float(np.sum(step.demand))) > _BALANCE_TOL * scale:
        raise NumericalError(
            f"recourse outcome violates power balance by "
            f"{injected - float(np.sum(step.demand)):.3e}"
        )


def eval_loss_lp(x, xi, sys: SystemModel, step: TimestepInput) -> RecourseOutcome:
    """Recourse loss via the LP route."""
    x, xi = _check_recourse_args(x, xi, sys, step)
    lp = build_recourse_lp(x, xi, sys, step)
    sol = solve_lp(lp, start=_recourse_start(lp, sys))
    if sol.status != "optimal":
        # Slack columns make the LP feasible and bounded for nonnegative
        # costs, so anything else is an internal failure.
        raise NumericalError(f"recourse LP returned status {sol.status}")
    return _outcome_from_solution(sol, sys, step, x)


def eval_loss_analytic(x, xi, sys: SystemModel, step: TimestepInput) -> RecourseOutcome:
    """Recourse loss via the merit-order argument, no LP involved.

    Wind plants are filled cheapest-effective-cost first (dispatch cost
    minus avoided spill cost); the aggregate shortfall left after wind is
    priced at the cheapest unserved-load penalty and any surplus at the
    cheapest excess-capacity penalty.
    """
    x, xi = _check_recourse_args(x, xi, sys, step)
    W, D = sys.n_wind, sys.n_load
    avail = available_wind(xi, step)
    shortfall = float(np.sum(step.demand) - np.sum(x))

    cw = sys.wind_costs()
    cs = sys.spill_costs()
    eff = cw - cs
    q_short = int(np.argmin(sys.shortfall_costs()))
    q_surp = int(np.argmin(sys.surplus_costs()))
    cp = float(sys.shortfall_costs()[q_short])
    cm = float(sys.surplus_costs()[q_surp])

    omega = np.zeros(W)
    rem = max(shortfall, 0.0)
    for w in np.argsort(eff, kind="stable"):
        if eff[w] < -cm:
            # Dispatching past the shortfall still pays for itself.
            omega[w] = avail[w]
            rem = max(rem - avail[w], 0.0)
        elif eff[w] < cp and rem > 0.0:
            omega[w] = min(avail[w], rem)
            rem -= omega[w]

    net = shortfall - float(np.sum(omega))
    unserved = np.zeros(D)
    surplus = np.zeros(D)
    if net > 0:
        unserved[q_short] = net
    elif net < 0:
        surplus[q_surp] = -net
    spill = avail - omega
    loss = float(
        cw @ omega + cs @ spill + cp * max(net, 0.0) + cm * max(-net, 0.0)
    )
    out = RecourseOutcome(
        loss=loss,
        wind_dispatch=omega,
        wind_spill=spill,
        unserved=unserved,
        surplus=surplus,
    )
    _check_balance(out, sys, step, x)
    return out


def loss_curve(x, xi_values, sys: SystemModel, step: TimestepInput) -> np.ndarray:
    """Vectorized merit-order loss over a 1-D array of error values.

    Requires a single wind plant (the aggregate-error setting); mirrors
    eval_loss_analytic pointwise.
    """
    if sys.n_wind != 1:
        raise InputError("loss_curve needs exactly one (aggregate) wind plant")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    xi = np.asarray(xi_values, dtype=float)
    avail = np.maximum(step.wind_forecast[0] + xi, 0.0)
    shortfall = float(np.sum(step.demand) - np.sum(x))
    cw = float(sys.wind_costs()[0])
    csp = float(sys.spill_costs()[0])
    eff = cw - csp
    cp = float(np.min(sys.shortfall_costs()))
    cm = float(np.min(sys.surplus_costs()))

    if eff < -cm:
        omega = avail
    elif eff < cp:
        omega = np.minimum(avail, max(shortfall, 0.0))
    else:
        omega = np.zeros_like(avail)
    net = shortfall - omega
    return (
        eff * omega
        + csp * avail
        + cp * np.maximum(net, 0.0)
        + cm * np.maximum(-net, 0.0)
    )
