"""Bounded-variable linear programming by the revised simplex method.

Problems are stated in equality standard form

    minimize    c @ x
    subject to  A_eq @ x == b_eq,   lower <= x <= upper,

where individual bounds may be -inf/+inf. The solver runs a two-phase
revised simplex: phase 1 minimizes the total infeasibility of artificial
columns, phase 2 optimizes the true objective. The basis inverse is kept
explicitly and updated by product-form pivots with periodic
refactorization. Pricing is Dantzig (most violating reduced cost) until a
configurable number of degenerate pivots has accumulated, after which
Bland's smallest-index rule takes over to rule out cycling.

Callers that know a feasible basis (e.g. the dispatch assemblers, whose
constraint rows always contain slack-like columns) can pass a
StartingBasis to skip phase 1 entirely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import InputError, IterationLimitError, NumericalError

Status = Literal["optimal", "infeasible", "unbounded"]

# Nonbasic state codes.
_AT_LOWER = 0
_AT_UPPER = 1
_FREE = 2

# Absolute pivot tolerance; feasibility tolerance is scaled by (1 + |b|_inf).
PIVOT_TOL = 1e-10
FEAS_TOL = 1e-8
DEGENERATE_PIVOT_LIMIT = 200
REFACTOR_EVERY = 100


@dataclass(frozen=True)
class StandardFormLP:
    """Equality-form LP data.

    Attributes:
        c: objective coefficients, shape (n,).
        a_eq: equality constraint matrix, scipy CSC sparse, shape (m, n).
        b_eq: equality right-hand side, shape (m,).
        lower: variable lower bounds, -inf allowed, shape (n,).
        upper: variable upper bounds, +inf allowed, shape (n,).
        names: optional column labels for diagnostics.
    """

    c: np.ndarray
    a_eq: sp.csc_matrix
    b_eq: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        b = np.atleast_1d(np.asarray(self.b_eq, dtype=float))
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        a = self.a_eq
        if not sp.issparse(a):
            a = sp.csc_matrix(np.atleast_2d(np.asarray(a, dtype=float)))
        elif not sp.isspmatrix_csc(a):
            a = a.tocsc()
        n = c.shape[0]
        m = b.shape[0]
        if a.shape != (m, n):
            raise InputError(
                f"constraint matrix is {a.shape}, expected ({m}, {n}) "
                f"from len(b_eq)={m} and len(c)={n}"
            )
        if lo.shape[0] != n or hi.shape[0] != n:
            raise InputError(
                f"bounds have lengths {lo.shape[0]}/{hi.shape[0]}, expected {n}"
            )
        if self.names and len(self.names) != n:
            raise InputError(f"{len(self.names)} names for {n} columns")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(b))):
            raise InputError("objective and right-hand side must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
            raise InputError("bounds must not contain NaN")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "a_eq", a)
        object.__setattr__(self, "b_eq", b)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n_rows(self) -> int:
        return self.b_eq.shape[0]

    @property
    def n_cols(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class LPSolution:
    """Result of solve_lp.

    x and duals are None unless status == "optimal". duals holds one
    multiplier per equality row, signed so that c - a_eq.T @ duals gives
    the reduced costs.
    """

    status: Status
    x: np.ndarray | None
    objective: float
    duals: np.ndarray | None
    iterations: int = 0
    degenerate_pivots: int = 0


@dataclass(frozen=True)
class StartingBasis:
    """Caller-supplied feasible basis: one basic column per row.

    at_upper marks nonbasic columns that should start at their upper
    bound instead of the default (lower bound when finite).
    """

    basic_cols: np.ndarray
    at_upper: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


@dataclass(frozen=True)
class SolutionCheck:
    """Residual report from verify_solution; all entries are >= 0."""

    primal_residual: float
    bound_violation: float
    complementarity_gap: float
    objective_gap: float

    def max_violation(self) -> float:
        return max(
            self.primal_residual,
            self.bound_violation,
            self.complementarity_gap,
            self.objective_gap,
        )


def solve_lp(
    problem: StandardFormLP,
    start: StartingBasis | None = None,
    max_iter: int | None = None,
    degenerate_pivot_limit: int = DEGENERATE_PIVOT_LIMIT,
) -> LPSolution:
    """Solve an equality-form LP.

    Args:
        problem: LP data.
        start: optional feasible starting basis; silently ignored if it
            turns out infeasible or singular.
        max_iter: pivot budget across both phases; default scales with size.
        degenerate_pivot_limit: degenerate pivots tolerated before the
            pricing switches to Bland's rule.

    Returns:
        LPSolution with status "optimal", "infeasible", or "unbounded".

    Raises:
        IterationLimitError: pivot budget exhausted (carries last iterate).
        NumericalError: basis factorization broke down irrecoverably.
    """
    m = problem.n_rows
    n = problem.n_cols
    if max_iter is None:
        max_iter = max(2000, 40 * (m + n))

    lo, hi = problem.lower, problem.upper
    if np.any(lo > hi):
        # Crossed bounds make the box empty; report as infeasible rather
        # than raising, so randomized callers can treat it uniformly.
        return LPSolution("infeasible", None, np.nan, None)

    state = _Workspace(problem)
    used_start = False
    if start is not None and m > 0:
        used_start = state.try_start_basis(start)
    if not used_start:
        if m == 0:
            state.cold_start_no_rows()
        else:
            status, iters = state.phase1(max_iter, degenerate_pivot_limit)
            if status == "iterlimit":
                raise IterationLimitError(
                    f"phase 1 exceeded {max_iter} pivots", state.x[:n].copy()
                )
            if status == "infeasible":
                return LPSolution(
                    "infeasible", None, np.nan, None, state.total_iters,
                    state.degenerate_count,
                )
            if status != "optimal":
                raise NumericalError(f"phase 1 ended with status {status!r}")
            max_iter -= iters

    status, _ = state.phase2(max_iter, degenerate_pivot_limit)
    if status == "iterlimit":
        raise IterationLimitError(
            f"phase 2 exceeded iteration budget", state.x[:n].copy()
        )
    if status == "unbounded":
        return LPSolution(
            "unbounded", None, -np.inf, None, state.total_iters,
            state.degenerate_count,
        )

    x, duals = state.finalize()
    resid = 0.0
    if m:
        resid = float(np.max(np.abs(problem.a_eq @ x - problem.b_eq)))
    if resid > FEAS_TOL * (1.0 + float(np.max(np.abs(problem.b_eq), initial=0.0))):
        raise NumericalError(
            f"optimal basis failed the feasibility check (residual {resid:.3e})"
        )
    objective = float(problem.c @ x)
    return LPSolution(
        "optimal", x, objective, duals, state.total_iters, state.degenerate_count
    )


class _Workspace:
    """Mutable simplex state: dense matrix copy, basis, inverse, iterate."""

    def __init__(self, problem: StandardFormLP):
        self.problem = problem
        m, n = problem.n_rows, problem.n_cols
        self.m, self.n = m, n
        nt = n + m  # artificial columns are appended once, reused by both phases
        self.nt = nt
        A = np.zeros((m, nt), order="F")
        if m:
            A[:, :n] = problem.a_eq.toarray()
        self.A = A
        self.b = problem.b_eq
        self.lo = np.concatenate([problem.lower, np.zeros(m)])
        self.hi = np.concatenate([problem.upper, np.zeros(m)])
        self.x = np.zeros(nt)
        self.nb_state = np.full(nt, _AT_LOWER, dtype=np.int8)
        self.is_basic = np.zeros(nt, dtype=bool)
        self.basic = np.zeros(m, dtype=np.int64)
        self.Binv = np.zeros((m, m))
        self.c_work = np.zeros(nt)
        self.total_iters = 0
        self.degenerate_count = 0
        self._since_refactor = 0
        bscale = float(np.max(np.abs(self.b), initial=0.0))
        self.ftol = FEAS_TOL * (1.0 + bscale)
        self.degen_tol = 1e-11 * (1.0 + bscale)

    # -- starting points ---------------------------------------------------

    def reset_nonbasic_values(self):
        lo_ok = np.isfinite(self.lo)
        hi_ok = np.isfinite(self.hi)
        self.nb_state = np.where(
            lo_ok, _AT_LOWER, np.where(hi_ok, _AT_UPPER, _FREE)
        ).astype(np.int8)
        self.x = np.where(lo_ok, self.lo, np.where(hi_ok, self.hi, 0.0))

    def cold_start_no_rows(self):
        self.reset_nonbasic_values()

    def try_start_basis(self, start: StartingBasis) -> bool:
        basic = np.asarray(start.basic_cols, dtype=np.int64)
        if basic.shape != (self.m,) or np.unique(basic).size != self.m:
            return False
        if np.any(basic < 0) or np.any(basic >= self.n):
            return False
        self.reset_nonbasic_values()
        au = np.asarray(start.at_upper, dtype=bool)
        if au.size == self.n:
            flip = np.concatenate([au, np.zeros(self.m, dtype=bool)])
            flip &= np.isfinite(self.hi)
            self.nb_state[flip] = _AT_UPPER
            self.x[flip] = self.hi[flip]
        try:
            self.Binv = np.linalg.inv(self.A[:, basic])
        except np.linalg.LinAlgError:
            return False
        self.basic = basic
        self.is_basic[:] = False
        self.is_basic[basic] = True
        self.recompute_basic_values()
        xB = self.x[basic]
        if np.any(xB < self.lo[basic] - self.ftol) or np.any(
            xB > self.hi[basic] + self.ftol
        ):
            self.is_basic[:] = False
            return False
        return True

    # -- phases ------------------------------------------------------------

    def phase1(self, max_iter: int, degen_limit: int) -> tuple[str, int]:
        self.reset_nonbasic_values()
        resid = self.b - self.A[:, : self.n] @ self.x[: self.n]
        sign = np.where(resid >= 0.0, 1.0, -1.0)
        art = self.n + np.arange(self.m)
        self.A[np.arange(self.m), art] = sign
        self.hi[art] = np.inf
        self.x[art] = np.abs(resid)
        self.basic = art.copy()
        self.is_basic[:] = False
        self.is_basic[art] = True
        self.Binv = np.diag(sign)
        self.c_work[:] = 0.0
        self.c_work[art] = 1.0
        status, iters = self._iterate(max_iter, degen_limit)
        if status != "optimal":
            return ("iterlimit" if status == "iterlimit" else status), iters
        infeas = float(np.sum(self.x[art]))
        if infeas > self.ftol:
            return "infeasible", iters
        self._expel_artificials()
        self.hi[art] = 0.0
        self.x[art] = np.where(self.is_basic[art], self.x[art], 0.0)
        return "optimal", iters

    def phase2(self, max_iter: int, degen_limit: int) -> tuple[str, int]:
        self.c_work[:] = 0.0
        self.c_work[: self.n] = self.problem.c
        return self._iterate(max_iter, degen_limit)

    def _expel_artificials(self):
        """Pivot zero-valued artificial columns out of the basis where a real
        column can replace them; rows that admit none are redundant and keep
        their artificial pinned at zero."""
        for r in range(self.m):
            j_art = self.basic[r]
            if j_art < self.n:
                continue
            row = self.Binv[r] @ self.A[:, : self.n]
            row[self.is_basic[: self.n]] = 0.0
            cand = int(np.argmax(np.abs(row)))
            if abs(row[cand]) <= PIVOT_TOL:
                continue  # redundant row
            d = self.Binv @ self.A[:, cand]
            self._apply_pivot(cand, r, d, t=0.0, direction=1.0)

    # -- core iteration ----------------------------------------------------

    def recompute_basic_values(self):
        xw = self.x.copy()
        xw[self.basic] = 0.0
        rhs = self.b - self.A @ xw
        self.x[self.basic] = self.Binv @ rhs
        self._since_refactor = 0

    def refactorize(self):
        try:
            self.Binv = np.linalg.inv(self.A[:, self.basic])
        except np.linalg.LinAlgError as exc:
            raise NumericalError("singular basis during refactorization") from exc
        self.recompute_basic_values()

    def _iterate(self, max_iter: int, degen_limit: int) -> tuple[str, int]:
        if self.m == 0:
            return self._iterate_boxonly(max_iter)
        A, lo, hi, x = self.A, self.lo, self.hi, self.x
        c = self.c_work
        dtol = 1e-9 * (1.0 + float(np.max(np.abs(c), initial=0.0)))
        movable = (hi - lo) > 0.0
        iters = 0
        while iters < max_iter:
            y = self.c_work[self.basic] @ self.Binv
            r = c - y @ A
            state = self.nb_state
            viol = np.where(
                self.is_basic | ~movable,
                0.0,
                np.where(
                    state == _AT_LOWER,
                    np.maximum(-r, 0.0),
                    np.where(state == _AT_UPPER, np.maximum(r, 0.0), np.abs(r)),
                ),
            )
            if self.degenerate_count >= degen_limit:
                cand = np.flatnonzero(viol > dtol)
                if cand.size == 0:
                    return "optimal", iters
                j = int(cand[0])  # Bland: lowest index
            else:
                j = int(np.argmax(viol))
                if viol[j] <= dtol:
                    return "optimal", iters
            direction = 1.0 if (state[j] == _AT_LOWER or (state[j] == _FREE and r[j] < 0)) else -1.0

            d = self.Binv @ A[:, j]
            delta = -direction * d
            xB = x[self.basic]
            loB = lo[self.basic]
            hiB = hi[self.basic]
            t_cand = np.full(self.m, np.inf)
            neg = delta < -PIVOT_TOL
            pos = delta > PIVOT_TOL
            t_cand[neg] = (xB[neg] - loB[neg]) / -delta[neg]
            t_cand[pos] = (hiB[pos] - xB[pos]) / delta[pos]
            np.maximum(t_cand, 0.0, out=t_cand)
            t_basic = float(t_cand.min()) if self.m else np.inf
            t_flip = hi[j] - lo[j]
            t = min(t_basic, t_flip)
            if not np.isfinite(t):
                return "unbounded", iters

            iters += 1
            self.total_iters += 1
            if t <= self.degen_tol:
                self.degenerate_count += 1
            if t_flip <= t_basic:
                x[self.basic] = xB + t_flip * delta
                if state[j] == _AT_LOWER:
                    x[j] = hi[j]
                    state[j] = _AT_UPPER
                else:
                    x[j] = lo[j]
                    state[j] = _AT_LOWER
                continue

            near = t_cand <= t * (1.0 + 1e-9) + 1e-13
            rows = np.flatnonzero(near)
            if self.degenerate_count >= degen_limit:
                rr = rows[np.argmin(self.basic[rows])]  # Bland on leaving too
            else:
                rr = rows[np.argmax(np.abs(delta[rows]))]
            x[self.basic] = xB + t * delta
            x[j] = x[j] + direction * t
            self._apply_pivot(j, int(rr), d, t, direction)
            if self._since_refactor >= REFACTOR_EVERY:
                self.refactorize()
        return "iterlimit", iters

    def _iterate_boxonly(self, max_iter: int) -> tuple[str, int]:
        # No equality rows: each variable independently runs to its cheap bound.
        c = self.c_work[: self.n]
        lo, hi = self.lo[: self.n], self.hi[: self.n]
        dtol = 1e-9 * (1.0 + float(np.max(np.abs(c), initial=0.0)))
        for j in range(self.n):
            if c[j] > dtol:
                if not np.isfinite(lo[j]):
                    return "unbounded", 0
                self.x[j] = lo[j]
                self.nb_state[j] = _AT_LOWER
            elif c[j] < -dtol:
                if not np.isfinite(hi[j]):
                    return "unbounded", 0
                self.x[j] = hi[j]
                self.nb_state[j] = _AT_UPPER
        return "optimal", 0

    def _apply_pivot(self, j: int, row: int, d: np.ndarray, t: float, direction: float):
        leaving = self.basic[row]
        piv = d[row]
        if abs(piv) <= PIVOT_TOL:
            self.refactorize()
            d = self.Binv @ self.A[:, j]
            piv = d[row]
            if abs(piv) <= PIVOT_TOL:
                raise NumericalError("vanishing pivot element")
        # Leaving variable lands exactly on the bound it ran into.
        delta_row = -direction * piv
        if t > 0.0:
            if delta_row < 0:
                self.x[leaving] = self.lo[leaving]
                self.nb_state[leaving] = _AT_LOWER
            else:
                self.x[leaving] = self.hi[leaving]
                self.nb_state[leaving] = _AT_UPPER
        else:
            snap_lo = abs(self.x[leaving] - self.lo[leaving]) <= abs(
                self.x[leaving] - self.hi[leaving]
            )
            if snap_lo and np.isfinite(self.lo[leaving]):
                self.x[leaving] = self.lo[leaving]
                self.nb_state[leaving] = _AT_LOWER
            else:
                self.x[leaving] = self.hi[leaving]
                self.nb_state[leaving] = _AT_UPPER
        self.is_basic[leaving] = False
        self.is_basic[j] = True
        self.basic[row] = j
        fac = self.Binv[row] / piv
        self.Binv -= np.outer(d, fac)
        self.Binv[row] = fac
        self._since_refactor += 1

    # -- wrap-up -----------------------------------------------------------

    def finalize(self) -> tuple[np.ndarray, np.ndarray]:
        if self.m:
            self.refactorize()  # fresh inverse, then exact basic recompute
        y = self.c_work[self.basic] @ self.Binv if self.m else np.zeros(0)
        return self.x[: self.n].copy(), y


def verify_solution(problem: StandardFormLP, solution: LPSolution) -> SolutionCheck:
    """Independent residual check of a claimed optimal solution.

    Computes the equality residual, the worst bound violation, the
    complementarity gap implied by the returned duals (reduced costs must
    be >= 0 at lower bounds, <= 0 at upper bounds, ~0 for interior
    variables), and the gap between the reported objective and c @ x.
    """
    if solution.x is None:
        raise InputError("verify_solution needs a solution with an iterate")
    x = solution.x
    if x.shape[0] != problem.n_cols:
        raise InputError(
            f"solution has {x.shape[0]} entries, expected {problem.n_cols}"
        )
    if problem.n_rows:
        primal = float(np.max(np.abs(problem.a_eq @ x - problem.b_eq)))
    else:
        primal = 0.0
    bound = float(
        max(
            np.max(problem.lower - x, initial=0.0),
            np.max(x - problem.upper, initial=0.0),
            0.0,
        )
    )
    comp = 0.0
    if solution.duals is not None:
        r = problem.c - problem.a_eq.T @ solution.duals
        span = problem.upper - problem.lower
        btol = 1e-7 * (1.0 + np.abs(x))
        at_lo = np.abs(x - problem.lower) <= btol
        at_hi = np.abs(x - problem.upper) <= btol
        fixed = span <= 1e-12
        gap = np.where(
            fixed,
            0.0,
            np.where(
                at_lo & at_hi,
                0.0,
                np.where(
                    at_lo,
                    np.maximum(-r, 0.0),
                    np.where(at_hi, np.maximum(r, 0.0), np.abs(r)),
                ),
            ),
        )
        comp = float(np.max(gap, initial=0.0))
    obj_gap = (
        abs(float(problem.c @ x) - solution.objective)
        if np.isfinite(solution.objective)
        else np.inf
    )
    return SolutionCheck(primal, bound, comp, obj_gap)
