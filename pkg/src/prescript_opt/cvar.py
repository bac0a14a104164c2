"""Worst-case expectations over the capped probability simplex.

For nominal weights ``p`` and level ``alpha`` the admissible distributions
are ``{q >= 0, sum(q) = 1, q_i <= p_i / (1 - alpha)}``.  The worst case of
a linear functional over that set is the discrete CVaR of the values,
obtained by pouring probability mass onto the largest values first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class AmbiguityLevel:
    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 <= a < 1.0):
            raise InvalidInput(f"alpha must lie in [0, 1), got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def cap(self) -> float:
        """Largest admissible likelihood ratio ``1 / (1 - alpha)``."""
        return 1.0 / (1.0 - self.alpha)


@dataclass(frozen=True)
class WorstCase:
    value: float
    distribution: np.ndarray


def _as_level(level) -> AmbiguityLevel:
    return level if isinstance(level, AmbiguityLevel) else AmbiguityLevel(level)


def _check(values, weights):
    v = np.asarray(values, dtype=float).ravel()
    p = np.asarray(weights, dtype=float).ravel()
    if len(v) == 0:
        raise InvalidInput("empty support")
    if len(v) != len(p):
        raise InvalidInput("values and weights differ in length")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
        raise InvalidInput("weights must form a probability vector")
    return v, p


def worst_case_expectation(values, weights, level) -> WorstCase:
    """Maximize ``q @ values`` over the capped simplex around ``weights``.

    Mass goes to scenarios in decreasing order of value (lower scenario
    index first on ties), each receiving at most ``cap * p_i``.
    """
    v, p = _check(values, weights)
    cap = _as_level(level).cap
    order = np.argsort(-v, kind="stable")
    limits = np.minimum(cap * p[order], 1.0)
    before = np.concatenate([[0.0], np.cumsum(limits)[:-1]])
    take = np.clip(1.0 - before, 0.0, limits)
    q = np.zeros_like(p)
    q[order] = take
    # absorb round-off so the distribution sums to one exactly
    q /= q.sum()
    return WorstCase(float(q @ v), q)


def max_over_support(values, weights) -> float:
    """Limit of the worst case as alpha -> 1: the largest value with p_i > 0."""
    v, p = _check(values, weights)
    return float(v[p > 0].max())


def cvar_from_infimum(values, weights, level, t) -> float:
    """Rockafellar-Uryasev objective ``t + cap * E_p[(v - t)^+]``."""
    v, p = _check(values, weights)
    cap = _as_level(level).cap
    return float(t + cap * (p @ np.maximum(v - t, 0.0)))


def minimize_infimum(values, weights, level, tol=1e-12):
    """Golden-section search for the minimizing ``t`` on ``[min v, max v]``.

    Returns ``(t, value)``.  The objective is convex and piecewise linear
    in ``t`` so the bracket never loses the minimizer.
    """
    v, p = _check(values, weights)
    f = lambda t: cvar_from_infimum(v, p, level, t)  # noqa: E731
    a, b = float(v.min()), float(v.max())
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * (1.0 + abs(a) + abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    best = min((a, f(a)), (b, f(b)), ((a + b) / 2, f((a + b) / 2)), key=lambda tv: tv[1])
    return best
