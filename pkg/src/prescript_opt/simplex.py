"""Dense bounded primal simplex with dual certificates, plus branch and bound.

The solver works on

    min c^T x  s.t.  A_i x {<=, =, >=} b_i,  l <= x <= u,

by appending one slack per row (bounded according to the row sense) and
one artificial per row for phase 1.  Nonbasic variables sit at a finite
bound, or at zero when free.  Pricing is Dantzig's rule; after a run of
degenerate pivots it switches to Bland's smallest-index rule, which keeps
the whole procedure deterministic and cycle free.

Dual values follow the Lagrangian ``c^T x - y^T (A x - b)``: ``y_i >= 0``
on ``>=`` rows and ``y_i <= 0`` on ``<=`` rows at an optimum.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput, NumericalError, SolverStalled

FEAS_TOL = 1e-7
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
_REFACTOR_EVERY = 64
_DEGENERATE_STREAK = 25

SENSES = ("<=", "=", ">=")


@dataclass(frozen=True)
class LinearProgram:
    """A minimization LP (or MILP when ``integer`` marks any variable)."""

    cost: np.ndarray
    A: np.ndarray
    senses: tuple
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray

    def __init__(self, cost, A=None, senses=None, rhs=None, lower=None, upper=None, integer=None):
        c = np.array(cost, dtype=float).ravel()
        n = len(c)
        if n == 0:
            raise InvalidInput("LP needs at least one variable")
        A = np.zeros((0, n)) if A is None else np.array(A, dtype=float)
        if A.ndim == 1:
            A = A[None, :]
        if A.ndim != 2 or A.shape[1] != n:
            raise InvalidInput(f"constraint matrix must have {n} columns")
        m = A.shape[0]
        senses = tuple(senses) if senses is not None else ("<=",) * m
        rhs = np.zeros(m) if rhs is None else np.array(rhs, dtype=float).ravel()
        if len(senses) != m or len(rhs) != m:
            raise InvalidInput("one sense and one rhs per constraint row")
        bad = [s for s in senses if s not in SENSES]
        if bad:
            raise InvalidInput(f"unknown constraint sense {bad[0]!r}")
        lo = np.zeros(n) if lower is None else np.array(lower, dtype=float).ravel()
        up = np.full(n, np.inf) if upper is None else np.array(upper, dtype=float).ravel()
        if len(lo) != n or len(up) != n:
            raise InvalidInput("one bound pair per variable")
        if not (np.isfinite(c).all() and np.isfinite(A).all() and np.isfinite(rhs).all()):
            raise InvalidInput("LP coefficients must be finite")
        if (lo > up).any() or np.isnan(lo).any() or np.isnan(up).any():
            raise InvalidInput("inconsistent variable bounds")
        integer = np.zeros(n, dtype=bool) if integer is None else np.array(integer, dtype=bool).ravel()
        if len(integer) != n:
            raise InvalidInput("integrality mask length mismatch")
        for name, val in (("cost", c), ("A", A), ("senses", senses), ("rhs", rhs),
                          ("lower", lo), ("upper", up), ("integer", integer)):
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_vars(self) -> int:
        return len(self.cost)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def with_bounds(self, lower, upper) -> "LinearProgram":
        return LinearProgram(self.cost, self.A, self.senses, self.rhs, lower, upper, self.integer)

    def relaxation(self) -> "LinearProgram":
        return LinearProgram(self.cost, self.A, self.senses, self.rhs, self.lower, self.upper)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    objective: float = math.nan
    dual_objective: float = math.nan
    iterations: int = 0
    nodes: int = 0
    reduced_costs: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    @property
    def gap(self) -> float:
        return abs(self.objective - self.dual_objective)


class _Tableau:
    """Working state of one simplex run (basis inverse, values, bounds)."""

    def __init__(self, A, b, lower, upper, basis, x):
        self.A = A
        self.b = b
        self.lower = lower
        self.upper = upper
        self.basis = list(basis)
        self.x = x
        self.iterations = 0
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("simplex basis became singular") from exc
        nonbasic = np.ones(self.A.shape[1], dtype=bool)
        nonbasic[self.basis] = False
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ rhs

    def duals(self, cost):
        return cost[self.basis] @ self.Binv

    def run(self, cost, max_iter):
        m, ntot = self.A.shape
        streak = 0
        since_refactor = 0
        span = self.upper - self.lower
        movable = span > 0
        is_basic = np.zeros(ntot, dtype=bool)
        while True:
            if self.iterations >= max_iter:
                raise SolverStalled(f"simplex exceeded {max_iter} iterations", self.iterations)
            y = self.duals(cost)
            d = cost - y @ self.A
            is_basic[:] = False
            is_basic[self.basis] = True
            at_lower = np.isfinite(self.lower) & (self.x <= self.lower + FEAS_TOL)
            at_upper = np.isfinite(self.upper) & (self.x >= self.upper - FEAS_TOL)
            can_up = movable & ~at_upper & (d < -OPT_TOL)
            can_down = movable & ~at_lower & (d > OPT_TOL)
            cand = (can_up | can_down) & ~is_basic
            if not cand.any():
                return "optimal", y, d
            idx = np.flatnonzero(cand)
            if streak >= _DEGENERATE_STREAK:
                j = int(idx[0])
            else:
                j = int(idx[np.argmax(np.abs(d[idx]))])
            sigma = 1.0 if d[j] < 0 else -1.0
            w = self.Binv @ self.A[:, j]
            # rate of change of basic variables per unit step
            rate = -sigma * w
            theta = span[j] if np.isfinite(span[j]) else np.inf
            leave = -1
            leave_to_upper = False
            xb = self.x[self.basis]
            lb = self.lower[self.basis]
            ub = self.upper[self.basis]
            dec = rate < -PIVOT_TOL
            inc = rate > PIVOT_TOL
            # Harris two-pass ratio test: the longest step keeping every basic
            # variable within FEAS_TOL of its bound, then the largest pivot
            # among the rows that block within that step
            ratios = np.full(m, np.inf)
            relaxed = np.full(m, np.inf)
            with np.errstate(invalid="ignore", divide="ignore"):
                ratios[dec] = (xb[dec] - lb[dec]) / -rate[dec]
                ratios[inc] = (ub[inc] - xb[inc]) / rate[inc]
                relaxed[dec] = (xb[dec] - lb[dec] + FEAS_TOL) / -rate[dec]
                relaxed[inc] = (ub[inc] - xb[inc] + FEAS_TOL) / rate[inc]
            ratios = np.maximum(ratios, 0.0)
            rmax = relaxed.min() if m else np.inf
            if ratios.min(initial=np.inf) < theta:
                ties = np.flatnonzero(ratios <= rmax)
                if streak >= _DEGENERATE_STREAK:
                    r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(w[ties]))])
                theta = ratios[r]
                leave = r
                leave_to_upper = rate[r] > 0
            if not np.isfinite(theta):
                return "unbounded", y, d
            step = sigma * theta
            self.x[j] += step
            self.x[self.basis] += step * -w
            self.iterations += 1
            streak = streak + 1 if theta <= 1e-12 else 0
            if leave < 0:
                # bound flip, basis unchanged
                self.x[j] = self.upper[j] if sigma > 0 else self.lower[j]
                continue
            out = self.basis[leave]
            self.x[out] = self.upper[out] if leave_to_upper else self.lower[out]
            piv = w[leave]
            row = self.Binv[leave] / piv
            self.Binv -= np.outer(w, row)
            self.Binv[leave] = row
            self.basis[leave] = j
            since_refactor += 1
            if since_refactor >= _REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0


def _start_value(lo, up):
    if np.isfinite(lo):
        return lo
    if np.isfinite(up):
        return up
    return 0.0


def solve_lp(lp: LinearProgram, max_iter=None) -> LpSolution:
    """Solve a continuous LP; integrality marks must all be false."""
    if lp.integer.any():
        raise InvalidInput("solve_lp got integer variables; use solve_milp")
    n, m = lp.n_vars, lp.n_rows
    if max_iter is None:
        max_iter = 50 * (n + 2 * m) + 1000
    x0 = np.array([_start_value(lo, up) for lo, up in zip(lp.lower, lp.upper)])
    if m == 0:
        return _solve_box(lp, x0)

    slack_lo = np.array([0.0 if s == "<=" else (-np.inf if s == ">=" else 0.0) for s in lp.senses])
    slack_up = np.array([np.inf if s == "<=" else 0.0 for s in lp.senses])
    resid = lp.rhs - lp.A @ x0
    use_slack = ((resid >= 0) & (slack_up > 0)) | ((resid <= 0) & (slack_lo < 0))
    sign = np.where(resid >= 0, 1.0, -1.0)
    A_full = np.hstack([lp.A, np.eye(m), np.diag(sign)])
    lower = np.concatenate([lp.lower, slack_lo, np.zeros(m)])
    upper = np.concatenate([lp.upper, slack_up, np.where(use_slack, 0.0, np.inf)])
    x = np.concatenate([x0, np.zeros(m), np.zeros(m)])
    basis = [n + i if use_slack[i] else n + m + i for i in range(m)]
    tab = _Tableau(A_full, lp.rhs.copy(), lower, upper, basis, x)

    if not use_slack.all():
        c1 = np.concatenate([np.zeros(n + m), (~use_slack).astype(float)])
        tab.run(c1, max_iter)
        tab.refactor()
        infeas = tab.x[n + m:].sum()
        if infeas > FEAS_TOL * max(1.0, np.abs(lp.rhs).max(initial=0.0)):
            return LpSolution("infeasible", iterations=tab.iterations)
        tab.upper[n + m:] = 0.0
        tab.x[n + m:] = np.clip(tab.x[n + m:], 0.0, 0.0)
        tab.refactor()

    c2 = np.concatenate([lp.cost, np.zeros(2 * m)])
    status, y, d = tab.run(c2, max_iter)
    tab.refactor()
    if status == "unbounded":
        return LpSolution("unbounded", iterations=tab.iterations)
    y = tab.duals(c2)
    x = tab.x[:n].copy()
    rc = lp.cost - y @ lp.A
    return LpSolution(
        "optimal",
        x=x,
        duals=y,
        objective=float(lp.cost @ x),
        dual_objective=_dual_objective(lp, y, rc),
        iterations=tab.iterations,
        reduced_costs=rc,
    )


def _solve_box(lp, x0):
    x = x0.copy()
    for j, cj in enumerate(lp.cost):
        if cj > 0:
            x[j] = lp.lower[j]
        elif cj < 0:
            x[j] = lp.upper[j]
        if not np.isfinite(x[j]):
            return LpSolution("unbounded")
    return LpSolution("optimal", x=x, duals=np.zeros(0), objective=float(lp.cost @ x),
                      dual_objective=float(lp.cost @ x), reduced_costs=lp.cost.copy())


def _dual_objective(lp, y, rc):
    val = float(lp.rhs @ y)
    for j, dj in enumerate(rc):
        if dj > OPT_TOL:
            bound = lp.lower[j]
        elif dj < -OPT_TOL:
            bound = lp.upper[j]
        else:
            continue
        if not np.isfinite(bound):
            return -math.inf
        val += dj * bound
    return val


def solve_milp(lp: LinearProgram, max_nodes=20000) -> LpSolution:
    """Best-bound branch and bound on the integrality-marked variables.

    Branches on the most fractional variable (lowest index on ties).  Node
    bounds come from :func:`solve_lp`; the depth of any node is capped at
    ten times the number of integer variables.
    """
    ints = np.flatnonzero(lp.integer)
    relaxed = lp.relaxation()
    root = solve_lp(relaxed)
    if not ints.size or root.status != "optimal":
        root.nodes = 1
        return root
    depth_cap = 10 * len(ints)
    counter = 0
    heap = [(root.objective, counter, 0, np.array(lp.lower), np.array(lp.upper), root)]
    incumbent = None
    best = math.inf
    nodes = 0
    iterations = 0
    while heap:
        bound, _, depth, lo, up, sol = heapq.heappop(heap)
        if _dominated(bound, best):
            continue
        nodes += 1
        if nodes > max_nodes:
            raise SolverStalled(f"branch and bound exceeded {max_nodes} nodes", nodes)
        frac = np.abs(sol.x[ints] - np.round(sol.x[ints]))
        if frac.max() <= 1e-6:
            xi = sol.x.copy()
            xi[ints] = np.round(xi[ints])
            best = float(lp.cost @ xi)
            incumbent = LpSolution("optimal", x=xi, duals=sol.duals, objective=best,
                                   dual_objective=sol.dual_objective,
                                   reduced_costs=sol.reduced_costs)
            continue
        if depth >= depth_cap:
            raise SolverStalled("branch and bound depth cap reached", nodes)
        k = int(ints[np.argmax(frac)])
        v = sol.x[k]
        down_up = up.copy()
        down_up[k] = math.floor(v)
        up_lo = lo.copy()
        up_lo[k] = math.ceil(v)
        for clo, cup in ((lo, down_up), (up_lo, up)):
            if (clo > cup).any():
                continue
            child = solve_lp(relaxed.with_bounds(clo, cup))
            iterations += child.iterations
            if child.status != "optimal":
                continue
            if not _dominated(child.objective, best):
                counter += 1
                heapq.heappush(heap, (child.objective, counter, depth + 1, clo, cup, child))
    if incumbent is None:
        return LpSolution("infeasible", iterations=iterations, nodes=nodes)
    incumbent.iterations = iterations
    incumbent.nodes = nodes
    return incumbent


def _dominated(bound, best):
    return math.isfinite(best) and bound >= best - 1e-9 * (1 + abs(best))


def format_lp(lp: LinearProgram) -> str:
    """Fixed-format text listing of an LP, meant for bug reports."""
    lines = [f"LP  vars={lp.n_vars}  rows={lp.n_rows}", "MIN"]
    lines.append("  " + " ".join(f"{v:>12.6g}" for v in lp.cost))
    lines.append("ROWS")
    for i in range(lp.n_rows):
        coeffs = " ".join(f"{v:>12.6g}" for v in lp.A[i])
        lines.append(f"  R{i:<5d} {coeffs} {lp.senses[i]:>2} {lp.rhs[i]:>12.6g}")
    lines.append("BOUNDS")
    for j in range(lp.n_vars):
        tag = " I" if lp.integer[j] else ""
        lines.append(f"  x{j:<5d} {lp.lower[j]:>12.6g} {lp.upper[j]:>12.6g}{tag}")
    return "\n".join(lines) + "\n"
