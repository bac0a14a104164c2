"""Robust prescriptiveness maximization by bisection on the ratio.

For a target ratio ``gamma`` each context ``w`` contributes the value

    phi_w(gamma) = min_x  sup_q  E_q[ cost(x) - (1-gamma) cost(benchmark) - gamma hindsight ]

where ``q`` ranges over the capped simplex around the conditional weights
of context ``w``.  The aggregate ``psi(gamma)`` (context-weighted sum of
``phi_w``) is nondecreasing in ``gamma``, nonpositive at 0, and the
largest ``gamma`` with ``psi(gamma) <= 0`` is the best worst-case ratio.

:func:`bisection` halves ``[0, 1]`` on the sign of ``psi``.
:func:`accelerated_bisection` additionally uses convexity of ``psi`` for
relaxed decisions: a supporting line built from the worst-case weights
shrinks the upper bound and a secant through two evaluated points lifts
the lower bound.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import cvar
from .errors import InvalidInput, NonConvexDetected
from .flow import FlowOracle
from .model import Decision, DiscreteConditional, JointModel, PolicyTable
from .solvers import HindsightTable, _oracle

SECANT_TOL = 1e-6


@dataclass(frozen=True)
class GammaInterval:
    lo: float = 0.0
    hi: float = 1.0
    epsilon: float = 1e-3

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise InvalidInput(f"need 0 <= lo <= hi <= 1, got [{self.lo}, {self.hi}]")
        if not self.epsilon > 0:
            raise InvalidInput("epsilon must be positive")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class PhiResult:
    value: float
    decision: Decision
    worst_weights: np.ndarray
    var_level: float
    excess: np.ndarray


@dataclass(frozen=True)
class TraceStep:
    iteration: int
    gamma_mid: float
    psi_value: float
    lo: float
    hi: float


@dataclass
class BisectionResult:
    gamma_star: float
    trace: list
    policy: PolicyTable
    evaluations: int
    values: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``gamma, trace = bisection(...)``
        return iter((self.gamma_star, self.trace))


def gamma_offsets(cond: DiscreteConditional, gamma, benchmark: Decision, hindsight_values):
    """Per-scenario target ``(1-gamma) cost(benchmark) + gamma hindsight``."""
    bench = cond.support @ benchmark.flow
    return (1.0 - gamma) * bench + gamma * np.asarray(hindsight_values)


def _check_gamma(gamma):
    if not (0.0 <= gamma <= 1.0):
        raise InvalidInput(f"gamma must lie in [0, 1], got {gamma}")


def phi_omega(graph, cond: DiscreteConditional, gamma, level, benchmark: Decision,
              hindsight: HindsightTable, binary=False, oracle=None, slot=None) -> PhiResult:
    _check_gamma(gamma)
    oracle = _oracle(graph, binary, oracle)
    offsets = gamma_offsets(cond, gamma, benchmark, hindsight.values_for(cond.support))
    sol = oracle.epigraph(cond.support, cond.weights, offsets, level, slot)
    return PhiResult(sol.value, sol.decision, sol.worst_weights, sol.var_level, sol.excess)


class _Psi:
    """Cached evaluations of psi on one joint model."""

    def __init__(self, graph, joint, level, benchmark, hindsight, binary, oracle):
        self.graph = graph
        self.joint = joint
        self.level = level if isinstance(level, cvar.AmbiguityLevel) else cvar.AmbiguityLevel(level)
        self.benchmark = benchmark
        self.hindsight = hindsight
        self.binary = binary
        self.oracle = _oracle(graph, binary, oracle)
        for cond in joint.conditionals:
            hindsight.values_for(cond.support)
        bench = [c.support @ benchmark.flow for c in joint.conditionals]
        # feasibility tolerance on psi, scaled to the cost magnitude
        scale = max(float(np.abs(b).max()) for b in bench)
        self.tol = 1e-9 * (1.0 + scale)
        self.cache = {}

    def __call__(self, gamma):
        if gamma not in self.cache:
            phis = [phi_omega(self.graph, c, gamma, self.level, self.benchmark, self.hindsight,
                              self.binary, self.oracle, slot=("ctx", w))
                    for w, c in enumerate(self.joint.conditionals)]
            total = float(sum(p * r.value for p, r in zip(self.joint.context_weights, phis)))
            self.cache[gamma] = (total, phis)
        return self.cache[gamma][0]

    def feasible(self, gamma) -> bool:
        return self(gamma) <= self.tol

    def supporting_line(self, gamma):
        """Offset and slope of a line below psi, tight at ``gamma`` when a saddle point exists."""
        self(gamma)
        a = b = 0.0
        for w, (p, cond, r) in enumerate(zip(self.joint.context_weights, self.joint.conditionals,
                                             self.cache[gamma][1])):
            q = r.worst_weights
            bench = q @ (cond.support @ self.benchmark.flow)
            best, _ = self.oracle.shortest_path(q @ cond.support, slot=("line", w))
            a += p * (best - bench)
            b += p * (bench - q @ self.hindsight.values_for(cond.support))
        return a, b

    def policy(self, gamma) -> PolicyTable:
        self(gamma)
        decisions = [r.decision for r in self.cache[gamma][1]]
        return PolicyTable(dict(enumerate(decisions)), self.benchmark, self.joint.contexts)

    @property
    def evaluations(self):
        return len(self.cache)

    def best_accepted(self):
        ok = [g for g, (v, _) in self.cache.items() if v <= self.tol]
        return max(ok) if ok else None


def psi(graph, joint: JointModel, gamma, level, benchmark, hindsight, binary=False,
        oracle=None) -> float:
    _check_gamma(gamma)
    return _Psi(graph, joint, level, benchmark, hindsight, binary, oracle)(gamma)


def _finish(f: _Psi, lo, epsilon, trace):
    g = f.best_accepted()
    if g is None or g < lo - epsilon:
        g = lo
        f(g)
    return BisectionResult(lo, trace, f.policy(g), f.evaluations,
                           {k: v for k, (v, _) in sorted(f.cache.items())})


def bisection(graph, joint, level, benchmark, hindsight, epsilon=1e-3, binary=False,
              oracle=None) -> BisectionResult:
    """Plain bisection on the sign of psi; returns the last feasible lower bound."""
    interval = GammaInterval(0.0, 1.0, epsilon)
    f = _Psi(graph, joint, level, benchmark, hindsight, binary, oracle)
    lo, hi = interval.lo, interval.hi
    trace = []
    while hi - lo > epsilon:
        mid = (lo + hi) / 2.0
        if f.feasible(mid):
            lo = mid
        else:
            hi = mid
        trace.append(TraceStep(len(trace) + 1, mid, f(mid), lo, hi))
    return _finish(f, lo, epsilon, trace)


def max_iterations(epsilon) -> int:
    return max(0, math.ceil(math.log2(1.0 / epsilon)))


def accelerated_bisection(graph, joint, level, benchmark, hindsight, epsilon=1e-3, binary=False,
                          oracle=None) -> BisectionResult:
    """Bisection with supporting-line and secant cuts.

    Valid for relaxed (convex) decision sets.  A later evaluation lying
    above a previously built secant proves ``psi`` is not convex and
    raises :class:`NonConvexDetected`.
    """
    GammaInterval(0.0, 1.0, epsilon)
    f = _Psi(graph, joint, level, benchmark, hindsight, binary, oracle)
    lo, hi = 0.0, 1.0
    secants = []
    trace = []

    def evaluate(g):
        v = f(g)
        for g1, v1, g2, v2 in secants:
            if g1 < g < g2:
                bound = v1 + (v2 - v1) * (g - g1) / (g2 - g1)
                if v > bound + SECANT_TOL * (1.0 + abs(bound)):
                    raise NonConvexDetected(
                        f"psi({g:.6g}) = {v:.6g} lies above the secant value {bound:.6g}")
        return v

    while hi - lo > epsilon:
        mid = (lo + hi) / 2.0
        v_mid = evaluate(mid)
        a, b = f.supporting_line(mid)
        if b > 0 and -a / b < hi:
            hi = max(-a / b, lo)
        if v_mid <= f.tol:
            lo = mid
            other = hi
        else:
            hi = min(hi, mid)
            other = lo
        if hi - lo > epsilon:
            v_other = evaluate(other)
            g1, v1, g2, v2 = (mid, v_mid, other, v_other) if other > mid else (other, v_other, mid, v_mid)
            if g2 > g1:
                secants.append((g1, v1, g2, v2))
            if v1 <= f.tol < v2:
                root = g1 - v1 * (g2 - g1) / (v2 - v1)
                lo = min(max(lo, root), hi)
            elif v2 <= f.tol:
                # psi is nonpositive on the whole segment by monotonicity
                lo = min(max(lo, g2), hi)
        trace.append(TraceStep(len(trace) + 1, mid, v_mid, lo, hi))
    return _finish(f, lo, epsilon, trace)


def extract_policy(graph, cond: DiscreteConditional, gamma_star, level, benchmark: Decision,
                   hindsight: HindsightTable, binary=False, oracle=None, slot=None) -> Decision:
    """Decision for a new context: the subproblem at ``gamma_star`` under its own weights."""
    return phi_omega(graph, cond, gamma_star, level, benchmark, hindsight, binary, oracle,
                     slot).decision


def nearest_policy(result: BisectionResult, zeta) -> Decision:
    """Decision stored for the closest training context."""
    return result.policy.nearest(zeta)


def write_trace(trace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "gamma_mid", "psi_value", "lo", "hi"])
        for s in trace:
            writer.writerow([s.iteration, repr(s.gamma_mid), repr(s.psi_value), repr(s.lo), repr(s.hi)])


def closed_form_gamma(graph, joint: JointModel, benchmark: Decision, hindsight: HindsightTable,
                      oracle: FlowOracle | None = None) -> float:
    """Exact root for the unambiguous case (alpha = 0), where psi is affine."""
    oracle = _oracle(graph, False, oracle)
    bench = best = hind = 0.0
    for p, cond in zip(joint.context_weights, joint.conditionals):
        w = cond.weights
        bench += p * (w @ (cond.support @ benchmark.flow))
        best += p * oracle.shortest_path(cond.mean())[0]
        hind += p * (w @ hindsight.values_for(cond.support))
    denom = bench - hind
    if denom <= 1e-12 * (1.0 + abs(hind)):
        return 1.0
    return float(min(max((bench - best) / denom, 0.0), 1.0))
