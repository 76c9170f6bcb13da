"""Dense linear programming: a bounded-variable primal simplex core and a
specialized solver for the weighted-L1 (pinball-loss) decision-rule problem.

The core is a two-phase revised simplex over the equality system
``A x + s = b`` where each row's sense is encoded in the slack bounds
(``<=`` gives ``s >= 0``, ``>=`` gives ``s <= 0``, ``=`` pins ``s = 0``).
Pricing is Dantzig's most-violated rule; after a run of degenerate steps it
falls back to Bland's rule, which guarantees termination.  Everything is
deterministic for a fixed input: ties break toward the smallest index.

``solve_weighted_l1`` minimizes

    (1/|T|) * sum_t  psi_minus_t * (x_t . q - E_t)^+  +  psi_plus_t * (E_t - x_t . q)^+

subject to ``0 <= x_t . q <= e_bar`` on every training row.  Rather than
handing the simplex the tall primal reformulation (two auxiliary variables
and several rows per training sample), it solves the LP dual, which has one
row per *coefficient* and three bounded variables per sample, and reads the
coefficient vector off the optimal simplex multipliers.  The optimum is the
same; only the solve is cheaper.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import SolverError

logger = logging.getLogger(__name__)

# nonbasic/basic variable states
_BASIC = 0
_AT_LOWER = 1
_AT_UPPER = 2
_FREE_ZERO = 3

_SENSES = ("<=", ">=", "=")


@dataclass(frozen=True)
class LinearProgram:
    """``minimize c.x  s.t.  a x (sense) b,  lower <= x <= upper``.

    Bounds may be ``+-inf``; objective coefficients must be finite.
    """

    c: np.ndarray
    a: np.ndarray
    senses: tuple[str, ...]
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.c, dtype=np.float64))
        a = np.atleast_2d(np.asarray(self.a, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.b, dtype=np.float64))
        lower = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        n = len(c)
        m = a.shape[0] if a.size else len(b)
        if a.size == 0:
            a = np.zeros((m, n))
        if a.shape != (m, n) or len(b) != m or len(lower) != n or len(upper) != n:
            raise SolverError(
                f"inconsistent LP dimensions: c={n}, a={a.shape}, b={len(b)}, "
                f"bounds=({len(lower)}, {len(upper)})"
            )
        senses = tuple(self.senses)
        if len(senses) != m or any(s not in _SENSES for s in senses):
            raise SolverError(f"row senses must be one of {_SENSES}, got {senses}")
        if not np.isfinite(c).all():
            raise SolverError("objective coefficients must be finite")
        if not np.isfinite(a).all() or not np.isfinite(b).all():
            raise SolverError("constraint matrix and right-hand side must be finite")
        if np.any(lower > upper):
            raise SolverError("lower bound exceeds upper bound")
        for name, arr in (("c", c), ("a", a), ("b", b), ("lower", lower), ("upper", upper)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "senses", senses)

    @property
    def n_vars(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.b)


@dataclass(frozen=True)
class LpSolution:
    """Outcome of a solve; ``x``/``objective``/``duals`` are None unless optimal."""

    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: float | None
    iterations: int
    duals: np.ndarray | None = None


class SimplexSolver:
    """Bounded-variable primal simplex (revised, dense).

    Tolerances assume data roughly scaled to order one: feasibility is
    absolute 1e-8, reduced-cost optimality 1e-9.  Bland's rule engages after
    ``stall_threshold`` consecutive degenerate steps and stays on until a
    step makes progress.
    """

    feasibility_tol = 1e-8
    optimality_tol = 1e-9
    pivot_tol = 1e-10
    degenerate_step_tol = 1e-12
    ratio_tie_tol = 1e-10
    stall_threshold = 50
    refresh_every = 500

    def solve(self, lp: LinearProgram) -> LpSolution:
        n, m = lp.n_vars, lp.n_rows
        if m == 0:
            return self._solve_unconstrained(lp)

        # equality form: [A | I] z = b with sense encoded in slack bounds
        slack_lower = np.zeros(m)
        slack_upper = np.zeros(m)
        for i, sense in enumerate(lp.senses):
            if sense == "<=":
                slack_lower[i], slack_upper[i] = 0.0, np.inf
            elif sense == ">=":
                slack_lower[i], slack_upper[i] = -np.inf, 0.0
            else:
                slack_lower[i], slack_upper[i] = 0.0, 0.0

        a_cols = [lp.a, np.eye(m)]
        lower = np.concatenate([lp.lower, slack_lower])
        upper = np.concatenate([lp.upper, slack_upper])

        # crash: nonbasic structurals at their nearest finite bound
        xval = np.zeros(n + m)
        status = np.full(n + m, _AT_LOWER, dtype=np.int8)
        for j in range(n):
            if np.isfinite(lower[j]):
                xval[j], status[j] = lower[j], _AT_LOWER
            elif np.isfinite(upper[j]):
                xval[j], status[j] = upper[j], _AT_UPPER
            else:
                xval[j], status[j] = 0.0, _FREE_ZERO

        # rows whose slack cannot carry the crash residual get an artificial
        residual = lp.b - lp.a @ xval[:n]
        basis = np.empty(m, dtype=np.int64)
        art_cols: list[np.ndarray] = []
        art_info: list[tuple[int, float]] = []  # (row, basic value)
        for i in range(m):
            r = residual[i]
            if slack_lower[i] - self.feasibility_tol <= r <= slack_upper[i] + self.feasibility_tol:
                basis[i] = n + i
                status[n + i] = _BASIC
            else:
                pinned = slack_upper[i] if r > slack_upper[i] else slack_lower[i]
                xval[n + i] = pinned
                status[n + i] = _AT_UPPER if pinned == slack_upper[i] else _AT_LOWER
                gap = r - pinned
                col = np.zeros(m)
                col[i] = 1.0 if gap > 0 else -1.0
                art_cols.append(col)
                art_info.append((i, abs(gap)))

        n_art = len(art_cols)
        if n_art:
            a_cols.append(np.column_stack(art_cols))
            lower = np.concatenate([lower, np.zeros(n_art)])
            upper = np.concatenate([upper, np.full(n_art, np.inf)])
            xval = np.concatenate([xval, np.zeros(n_art)])
            status = np.concatenate([status, np.full(n_art, _AT_LOWER, dtype=np.int8)])
            for k, (row, value) in enumerate(art_info):
                basis[row] = n + m + k
                status[n + m + k] = _BASIC
                xval[n + m + k] = value
        a_full = np.hstack(a_cols)

        state = _SimplexState(
            a=a_full, b=lp.b, lower=lower, upper=upper,
            xval=xval, status=status, basis=basis,
            n_struct=n, n_art=n_art, solver=self,
        )
        state.refresh()

        # phase 1: drive artificial variables to zero
        if n_art:
            c1 = np.zeros(a_full.shape[1])
            c1[n + m:] = 1.0
            outcome = state.optimize(c1, allow_artificials=True)
            if outcome != "optimal":
                raise SolverError(f"phase-1 anomaly: {outcome}")
            if c1 @ state.current_x() > self.feasibility_tol:
                return LpSolution("infeasible", None, None, state.iterations)
            # pin artificials so they can never re-enter
            state.lower[n + m:] = 0.0
            state.upper[n + m:] = 0.0

        # phase 2
        c2 = np.zeros(a_full.shape[1])
        c2[:n] = lp.c
        outcome = state.optimize(c2, allow_artificials=False)
        if outcome == "unbounded":
            return LpSolution("unbounded", None, None, state.iterations)

        x_full = state.current_x()
        x = x_full[:n].copy()
        duals = c2[state.basis] @ state.binv
        return LpSolution(
            status="optimal",
            x=x,
            objective=float(lp.c @ x),
            iterations=state.iterations,
            duals=duals,
        )

    def _solve_unconstrained(self, lp: LinearProgram) -> LpSolution:
        # no rows: each variable sits at whichever bound its cost prefers
        x = np.zeros(lp.n_vars)
        for j, cj in enumerate(lp.c):
            if cj > 0:
                best = lp.lower[j]
            elif cj < 0:
                best = lp.upper[j]
            else:
                best = lp.lower[j] if np.isfinite(lp.lower[j]) else min(0.0, lp.upper[j])
                if not np.isfinite(best):
                    best = 0.0
            if not np.isfinite(best):
                return LpSolution("unbounded", None, None, 0)
            x[j] = best
        return LpSolution("optimal", x, float(lp.c @ x), 0, np.zeros(0))


class _SimplexState:
    """Mutable solver state shared by the two phases."""

    def __init__(self, a, b, lower, upper, xval, status, basis, n_struct, n_art, solver):
        self.a = a
        self.b = b
        self.lower = lower
        self.upper = upper
        self.xval = xval
        self.status = status
        self.basis = basis
        self.n_struct = n_struct
        self.n_art = n_art
        self.solver = solver
        self.m, self.n_total = a.shape
        self.binv = np.eye(self.m)
        self.xb = np.zeros(self.m)
        self.iterations = 0

    def refresh(self):
        """Recompute the basis inverse and basic values from scratch."""
        try:
            self.binv = np.linalg.inv(self.a[:, self.basis])
        except np.linalg.LinAlgError as exc:
            raise SolverError("singular basis") from exc
        xn = self.xval.copy()
        xn[self.basis] = 0.0
        self.xb = self.binv @ (self.b - self.a @ xn)

    def current_x(self) -> np.ndarray:
        x = self.xval.copy()
        x[self.basis] = self.xb
        return x

    def optimize(self, cvec: np.ndarray, allow_artificials: bool) -> str:
        sv = self.solver
        n_real = self.n_total - self.n_art
        limit = max(10_000, 50 * self.n_total)
        bland = False
        stall = 0
        steps_since_refresh = 0
        # fixed variables (lower == upper) can never usefully enter the basis
        fixed = ~(self.upper > self.lower)

        while True:
            if self.iterations > limit:
                raise SolverError(f"iteration limit {limit} exceeded")
            if steps_since_refresh >= sv.refresh_every:
                self.refresh()
                steps_since_refresh = 0

            y = cvec[self.basis] @ self.binv
            d = cvec - y @ self.a

            at_lower = self.status == _AT_LOWER
            at_upper = self.status == _AT_UPPER
            free = self.status == _FREE_ZERO
            violation = np.where(
                at_lower, -d, np.where(at_upper, d, np.where(free, np.abs(d), -np.inf))
            )
            if not allow_artificials and self.n_art:
                violation[n_real:] = -np.inf
            violation[fixed] = -np.inf
            eligible = violation > sv.optimality_tol
            if not eligible.any():
                return "optimal"

            if bland:
                j = int(np.argmax(eligible))  # smallest eligible index
            else:
                j = int(np.argmax(violation))
            direction = 1.0
            if at_upper[j] or (free[j] and d[j] > 0):
                direction = -1.0

            w = self.binv @ self.a[:, j]
            coeff = direction * w
            blo = self.lower[self.basis]
            bup = self.upper[self.basis]
            theta = np.full(self.m, np.inf)
            pos = coeff > sv.pivot_tol
            neg = coeff < -sv.pivot_tol
            theta[pos] = np.maximum(self.xb[pos] - blo[pos], 0.0) / coeff[pos]
            theta[neg] = np.maximum(bup[neg] - self.xb[neg], 0.0) / (-coeff[neg])

            theta_basic = theta.min() if self.m else np.inf
            theta_bound = self.upper[j] - self.lower[j] if not free[j] else np.inf
            step = min(theta_basic, theta_bound)
            if not np.isfinite(step):
                return "unbounded"

            self.iterations += 1
            steps_since_refresh += 1
            if step <= sv.degenerate_step_tol:
                stall += 1
                if stall >= sv.stall_threshold:
                    bland = True
            else:
                stall = 0
                bland = False

            if theta_bound <= theta_basic:
                # bound flip: the entering variable crosses to its other bound
                self.xb -= theta_bound * coeff
                self.xval[j] = self.upper[j] if direction > 0 else self.lower[j]
                self.status[j] = _AT_UPPER if direction > 0 else _AT_LOWER
                continue

            # choose the leaving row among the tied minimum ratios
            tied = np.flatnonzero(theta <= theta_basic + sv.ratio_tie_tol)
            if bland:
                r = int(tied[np.argmin(self.basis[tied])])
            else:
                r = int(tied[np.argmax(np.abs(coeff[tied]))])

            entering_value = self.xval[j] + direction * step
            leaving = self.basis[r]
            self.xb -= step * coeff
            if coeff[r] > 0:
                self.xval[leaving] = self.lower[leaving]
                self.status[leaving] = _AT_LOWER
            else:
                self.xval[leaving] = self.upper[leaving]
                self.status[leaving] = _AT_UPPER
            self.basis[r] = j
            self.status[j] = _BASIC
            self.xb[r] = entering_value

            pivot = w[r]
            self.binv[r] /= pivot
            others = np.arange(self.m) != r
            self.binv[others] -= np.outer(w[others], self.binv[r])


def solve(lp: LinearProgram) -> LpSolution:
    """Solve a dense LP with the default simplex settings."""
    return SimplexSolver().solve(lp)


@dataclass(frozen=True)
class WeightedL1Problem:
    """Training data for the weighted-L1 decision-rule fit.

    ``x`` has one row per training hour and one column per feature; the fit
    searches coefficient vectors ``q`` whose predictions ``x @ q`` stay inside
    ``[0, e_bar]`` on all training rows.  ``coef_lower``/``coef_upper`` are
    optional per-coefficient bounds.
    """

    x: np.ndarray
    targets: np.ndarray
    psi_minus: np.ndarray
    psi_plus: np.ndarray
    e_bar: float
    coef_lower: np.ndarray | None = None
    coef_upper: np.ndarray | None = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        t, p = x.shape
        targets = np.asarray(self.targets, dtype=np.float64)
        psi_minus = np.asarray(self.psi_minus, dtype=np.float64)
        psi_plus = np.asarray(self.psi_plus, dtype=np.float64)
        if t < 1 or p < 1:
            raise SolverError("need at least one training row and one feature")
        if targets.shape != (t,) or psi_minus.shape != (t,) or psi_plus.shape != (t,):
            raise SolverError("targets/weights must match the number of rows")
        if np.any(psi_minus < 0) or np.any(psi_plus < 0):
            raise SolverError("weights must be nonnegative")
        if not (np.isfinite(self.e_bar) and self.e_bar > 0):
            raise SolverError(f"prediction bound must be positive, got {self.e_bar}")
        for name, arr, size in (
            ("coef_lower", self.coef_lower, p),
            ("coef_upper", self.coef_upper, p),
        ):
            if arr is not None:
                arr = np.asarray(arr, dtype=np.float64)
                if arr.shape != (size,):
                    raise SolverError(f"{name} must have one entry per feature")
                object.__setattr__(self, name, arr)
        for name, arr in (("x", x), ("targets", targets),
                          ("psi_minus", psi_minus), ("psi_plus", psi_plus)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]


def pinball_objective(problem: WeightedL1Problem, q: np.ndarray) -> float:
    """Mean weighted pinball loss of coefficient vector ``q`` on the problem."""
    residual = problem.x @ np.asarray(q, dtype=np.float64) - problem.targets
    loss = problem.psi_minus @ np.maximum(residual, 0.0) + problem.psi_plus @ np.maximum(
        -residual, 0.0
    )
    return float(loss) / problem.n_rows


def solve_weighted_l1(
    problem: WeightedL1Problem, solver: SimplexSolver | None = None
) -> tuple[np.ndarray, float]:
    """Minimize the mean weighted pinball loss over bounded linear rules.

    Returns ``(q, objective)`` where the objective carries the ``1/|T|``
    normalization.  Coefficients of all-zero feature columns are fixed to 0.
    When several coefficient vectors are optimal (flat L1 regions) the
    returned vertex depends only on the deterministic pivot order, so
    cross-checks should compare objectives, not coefficients.
    """
    solver = solver or SimplexSolver()
    p = problem.n_features
    active = np.flatnonzero(np.any(problem.x != 0.0, axis=0))
    dropped = p - len(active)
    if dropped:
        logger.warning(
            "weighted-L1 fit: %d all-zero feature column(s) fixed to coefficient 0",
            dropped,
        )
    q = np.zeros(p)
    if len(active) == 0:
        return q, pinball_objective(problem, q)

    lp = _build_dual(problem, active)
    solution = solver.solve(lp)
    if solution.status != "optimal":
        # the dual is always feasible, so unbounded means the primal
        # constraints (coefficient bounds included) admit no rule at all
        raise SolverError(f"weighted-L1 fit infeasible (dual {solution.status})")
    q[active] = -solution.duals
    objective = pinball_objective(problem, q)
    lp_objective = -solution.objective / problem.n_rows
    if abs(objective - lp_objective) > 1e-6 * (1.0 + abs(objective)):
        logger.warning(
            "weighted-L1 duality gap %.3e (objective %.6g vs LP %.6g)",
            objective - lp_objective, objective, lp_objective,
        )
    return q, objective


def _build_dual(problem: WeightedL1Problem, active: np.ndarray) -> LinearProgram:
    """LP dual of the weighted-L1 problem restricted to ``active`` columns.

    Variables are, per training row, the residual price ``alpha`` in
    ``[-psi_minus, psi_plus]`` and the multipliers of the two prediction
    bounds; plus one multiplier per finite coefficient bound.  Rows (one per
    active coefficient) say ``sum_t x_tj (alpha + gamma - delta) = mu - nu``;
    the optimal simplex multipliers of these rows are the coefficients.
    """
    x = problem.x[:, active]
    t, k = x.shape
    blocks = [x.T, x.T, -x.T]  # alpha, gamma, delta
    costs = [-problem.targets, np.zeros(t), np.full(t, problem.e_bar)]
    lowers = [-problem.psi_minus, np.zeros(t), np.zeros(t)]
    uppers = [problem.psi_plus, np.full(t, np.inf), np.full(t, np.inf)]

    if problem.coef_upper is not None:
        finite = np.isfinite(problem.coef_upper[active])
        if finite.any():
            cols = np.zeros((k, int(finite.sum())))
            cols[np.flatnonzero(finite), np.arange(int(finite.sum()))] = -1.0
            blocks.append(cols)
            costs.append(problem.coef_upper[active][finite])
            lowers.append(np.zeros(int(finite.sum())))
            uppers.append(np.full(int(finite.sum()), np.inf))
    if problem.coef_lower is not None:
        finite = np.isfinite(problem.coef_lower[active])
        if finite.any():
            cols = np.zeros((k, int(finite.sum())))
            cols[np.flatnonzero(finite), np.arange(int(finite.sum()))] = 1.0
            blocks.append(cols)
            costs.append(-problem.coef_lower[active][finite])
            lowers.append(np.zeros(int(finite.sum())))
            uppers.append(np.full(int(finite.sum()), np.inf))

    return LinearProgram(
        c=np.concatenate(costs),
        a=np.hstack(blocks),
        senses=("=",) * k,
        b=np.zeros(k),
        lower=np.concatenate(lowers),
        upper=np.concatenate(uppers),
    )


def dump_lp(lp: LinearProgram) -> str:
    """Plain-text rendering of an LP for cross-checks with external solvers.

    One line per objective/constraint/bound; variables are named ``x0..xN``.
    """
    def term(coef: float, j: int) -> str:
        return f"{float(coef)!r}*x{j}"

    lines = ["minimize"]
    lines.append("  " + " + ".join(term(c, j) for j, c in enumerate(lp.c)))
    lines.append("subject to")
    for i in range(lp.n_rows):
        body = " + ".join(
            term(lp.a[i, j], j) for j in range(lp.n_vars) if lp.a[i, j] != 0.0
        ) or "0"
        lines.append(f"  r{i}: {body} {lp.senses[i]} {float(lp.b[i])!r}")
    lines.append("bounds")
    for j in range(lp.n_vars):
        lines.append(f"  {float(lp.lower[j])!r} <= x{j} <= {float(lp.upper[j])!r}")
    return "\n".join(lines) + "\n"
