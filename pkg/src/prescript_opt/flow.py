"""Shortest-path and CVaR-epigraph LPs over one graph.

Every decision rule in the package reduces to one of two programs over
the flow polytope ``X = {x in [0,1]^A : flow balance}``:

* the shortest path ``min_x c^T x``;
* the epigraph program

      min  t + cap * sum_i p_i s_i
      s.t. s_i + t - xi_i^T x >= -offset_i,   s >= 0,  x in X,

  whose value is the worst-case expectation of ``xi^T x - offset`` over
  the capped simplex around ``p``.

:class:`FlowOracle` solves both with either the in-house simplex
(``engine="simplex"``) or HiGHS (``engine="highs"``).  The HiGHS engine
keeps one persistent model per *slot* so that repeated solves of the
same family (e.g. one context across bisection steps) warm-start from the
previous basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cvar
from .errors import InvalidInput, NumericalError
from .model import Decision, DirectedGraph
from .simplex import LinearProgram, solve_lp, solve_milp

ENGINES = ("simplex", "highs")


@dataclass(frozen=True)
class EpigraphSolution:
    value: float
    decision: Decision
    var_level: float
    excess: np.ndarray
    worst_weights: np.ndarray


class FlowOracle:
    def __init__(self, graph: DirectedGraph, binary=False, engine="simplex"):
        if engine not in ENGINES:
            raise InvalidInput(f"engine must be one of {ENGINES}, got {engine!r}")
        self.graph = graph
        self.binary = bool(binary)
        self.engine = engine
        inc = graph.incidence()
        keep = [i for i in range(graph.node_count) if i != graph.destination]
        self._N = inc[keep]
        self._b = graph.supply()[keep]
        self._models = {}
        self.solves = 0

    # -- public API -------------------------------------------------------

    def shortest_path(self, costs, slot=None):
        """Return ``(value, Decision)`` minimizing ``costs @ x`` over X."""
        c = np.asarray(costs, dtype=float)
        if c.shape != (self.graph.n_arcs,):
            raise InvalidInput("cost vector length does not match the arc count")
        self.solves += 1
        if self.engine == "highs":
            x = self._highs_path(c, slot)
        else:
            x = self._simplex_path(c)
        dec = Decision.from_solver(x, self.binary)
        return float(dec.flow @ c), dec

    def epigraph(self, scenarios, weights, offsets, level, slot=None) -> EpigraphSolution:
        """Minimize the worst-case expectation of ``scenarios @ x - offsets``."""
        xi = np.asarray(scenarios, dtype=float)
        p = np.asarray(weights, dtype=float)
        off = np.asarray(offsets, dtype=float)
        if xi.ndim != 2 or xi.shape[1] != self.graph.n_arcs or len(p) != len(xi) or len(off) != len(xi):
            raise InvalidInput("scenario, weight and offset shapes disagree")
        lvl = level if isinstance(level, cvar.AmbiguityLevel) else cvar.AmbiguityLevel(level)
        self.solves += 1
        if self.engine == "highs":
            x, q = self._highs_epigraph(xi, p, off, lvl.cap, slot)
        else:
            x, q = self._simplex_epigraph(xi, p, off, lvl.cap)
        dec = Decision.from_solver(x, self.binary)
        g = xi @ dec.flow - off
        wc = cvar.worst_case_expectation(g, p, lvl)
        if q is not None and _valid_worst(q, p, lvl.cap):
            q = np.clip(q, 0.0, lvl.cap * p)
            q = q / q.sum()
            if abs(q @ g - wc.value) > 1e-6 * (1 + abs(wc.value)):
                q = None
        else:
            q = None
        if q is None:
            q = wc.distribution
        t, _ = _var_level(g, p, lvl)
        excess = np.where(p > 0, np.maximum(g - t, 0.0), 0.0)
        return EpigraphSolution(wc.value, dec, t, excess, q)

    # -- native simplex ---------------------------------------------------

    def _solve(self, lp):
        sol = solve_milp(lp) if self.binary else solve_lp(lp)
        if sol.status != "optimal":
            raise NumericalError(f"flow LP returned status {sol.status}")
        return sol

    def _simplex_path(self, c):
        A = self.graph.n_arcs
        lp = LinearProgram(c, self._N, ("=",) * len(self._b), self._b,
                           np.zeros(A), np.ones(A), np.full(A, self.binary))
        return self._solve(lp).x

    def _simplex_epigraph(self, xi, p, off, cap):
        active = np.flatnonzero(p > 0)
        k = len(active)
        A = self.graph.n_arcs
        nflow = len(self._b)
        n = A + 1 + k
        cost = np.concatenate([np.zeros(A), [1.0], cap * p[active]])
        rows = np.zeros((nflow + k, n))
        rows[:nflow, :A] = self._N
        rows[nflow:, :A] = -xi[active]
        rows[nflow:, A] = 1.0
        rows[nflow:, A + 1:] = np.eye(k)
        rhs = np.concatenate([self._b, -off[active]])
        senses = ("=",) * nflow + (">=",) * k
        lower = np.concatenate([np.zeros(A), [-np.inf], np.zeros(k)])
        upper = np.concatenate([np.ones(A), [np.inf], np.full(k, np.inf)])
        integer = np.concatenate([np.full(A, self.binary), np.zeros(1 + k, dtype=bool)])
        sol = self._solve(LinearProgram(cost, rows, senses, rhs, lower, upper, integer))
        q = None
        if not self.binary:
            q = np.zeros(len(p))
            q[active] = sol.duals[nflow:]
        return sol.x[:A], q

    # -- HiGHS ------------------------------------------------------------

    def _highs_model(self, key, build):
        model = self._models.get(key)
        if model is None:
            model = build()
            self._models[key] = model
        return model

    def _new_highs(self, cost, lower, upper, row_lo, row_hi, matrix, integer_cols):
        import highspy
        import scipy.sparse as sp

        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.setOptionValue("threads", 1)
        h.setOptionValue("presolve", "off")
        h.setOptionValue("primal_feasibility_tolerance", 1e-9)
        h.setOptionValue("dual_feasibility_tolerance", 1e-9)
        lp = highspy.HighsLp()
        lp.num_col_ = len(cost)
        lp.num_row_ = len(row_lo)
        lp.col_cost_ = np.asarray(cost, dtype=float)
        lp.col_lower_ = np.asarray(lower, dtype=float)
        lp.col_upper_ = np.asarray(upper, dtype=float)
        lp.row_lower_ = np.asarray(row_lo, dtype=float)
        lp.row_upper_ = np.asarray(row_hi, dtype=float)
        csc = sp.csc_matrix(matrix)
        lp.a_matrix_.format_ = highspy.MatrixFormat.kColwise
        lp.a_matrix_.start_ = csc.indptr
        lp.a_matrix_.index_ = csc.indices
        lp.a_matrix_.value_ = csc.data
        if integer_cols is not None and len(integer_cols):
            lp.integrality_ = [highspy.HighsVarType.kInteger if i in integer_cols
                               else highspy.HighsVarType.kContinuous for i in range(len(cost))]
        h.passModel(lp)
        return h

    def _run_highs(self, h):
        import highspy

        h.run()
        status = h.getModelStatus()
        if status != highspy.HighsModelStatus.kOptimal:
            # retry from scratch once; warm bases occasionally stall
            h.clearSolver()
            h.run()
            status = h.getModelStatus()
            if status != highspy.HighsModelStatus.kOptimal:
                raise NumericalError(f"HiGHS finished with status {h.modelStatusToString(status)}")
        return h.getSolution()

    def _highs_path(self, c, slot):
        A = self.graph.n_arcs

        def build():
            return self._new_highs(c, np.zeros(A), np.ones(A), self._b, self._b, self._N,
                                   set(range(A)) if self.binary else None)

        h = self._highs_model(("path", slot), build)
        h.changeColsCost(A, np.arange(A, dtype=np.int32), c)
        sol = self._run_highs(h)
        return np.array(sol.col_value)

    def _highs_epigraph(self, xi, p, off, cap, slot):
        import highspy

        # zero-weight scenarios never bind; the active set is fixed per context
        active = np.flatnonzero(p > 0)
        S = len(active)
        A = self.graph.n_arcs
        nflow = len(self._b)
        inf = highspy.kHighsInf
        key = ("epi", slot)

        def build():
            sub = xi[active]
            mat = np.zeros((nflow + S, A + 1 + S))
            mat[:nflow, :A] = self._N
            mat[nflow:, :A] = -sub
            mat[nflow:, A] = 1.0
            mat[nflow:, A + 1:] = np.eye(S)
            cost = np.concatenate([np.zeros(A), [1.0], cap * p[active]])
            lower = np.concatenate([np.zeros(A), [-inf], np.zeros(S)])
            upper = np.concatenate([np.ones(A), [inf], np.full(S, inf)])
            row_lo = np.concatenate([self._b, -off[active]])
            row_hi = np.concatenate([self._b, np.full(S, inf)])
            h = self._new_highs(cost, lower, upper, row_lo, row_hi, mat,
                                set(range(A)) if self.binary else None)
            return h, xi, sub.copy(), active

        h, pool, sub, act = self._highs_model(key, build)
        if not (np.array_equal(act, active) and
                (pool is xi or np.array_equal(sub, xi[active]))):
            del self._models[key]
            h, pool, sub, act = self._highs_model(key, build)
        idx = np.arange(A + 1, A + 1 + S, dtype=np.int32)
        h.changeColsCost(S, idx, cap * p[active])
        rows = np.arange(nflow, nflow + S, dtype=np.int32)
        h.changeRowsBounds(S, rows, -off[active], np.full(S, inf))
        sol = self._run_highs(h)
        x = np.array(sol.col_value[:A])
        q = None
        if not self.binary:
            q = np.zeros(len(p))
            q[active] = np.array(sol.row_dual[nflow:])
        return x, q


def _valid_worst(q, p, cap, tol=1e-7):
    return (q >= -tol).all() and (q <= cap * p + tol).all() and abs(q.sum() - 1.0) <= 1e-6


def _var_level(g, p, level):
    """Optimal ``t`` of the epigraph: the upper (1-alpha)-quantile cut point."""
    order = np.argsort(-g, kind="stable")
    limits = np.minimum(level.cap * p[order], 1.0)
    cum = np.cumsum(limits)
    k = int(np.searchsorted(cum, 1.0 - 1e-12))
    k = min(k, len(order) - 1)
    return float(g[order[k]]), order[k]
