"""Synthetic contextual shortest-path instances.

An instance is a grid graph plus a joint normal law for
``(covariates, arc costs)``:

1. draw a random symmetric positive-definite matrix,
2. rescale it into a covariance with prescribed standard deviations,
3. sample through a Cholesky factor, clamping costs just above zero.

Validation and test data may use shifted cost means ``(1 + delta) * mu``
with ``delta`` uniform on ``[0, m]`` per arc.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidInput, NumericalError
from .model import Dataset, DirectedGraph

COST_FLOOR = 1e-6
JITTER = 1e-10
SPD_VARIANTS = ("diagonal", "ones")


def make_spd_matrix(n, seed=None, variant="diagonal") -> np.ndarray:
    """Random symmetric positive-definite matrix of size ``n``.

    The eigenvectors of ``A^T A`` (``A`` uniform on [0, 1]) are kept and
    the spectrum replaced.  ``variant="diagonal"`` uses ``1 + s_i`` with
    ``s_i`` uniform, so every eigenvalue lies in [1, 2].  ``variant="ones"``
    adds the all-ones matrix to ``diag(s)`` instead, which keeps the matrix
    symmetric positive semidefinite but adds a strong common factor.
    """
    if int(n) < 1:
        raise InvalidInput("matrix size must be at least 1")
    if variant not in SPD_VARIANTS:
        raise InvalidInput(f"variant must be one of {SPD_VARIANTS}")
    n = int(n)
    rng = np.random.default_rng(seed)
    A = rng.uniform(size=(n, n))
    _, U = np.linalg.eigh(A.T @ A)
    s = rng.uniform(size=n)
    if variant == "diagonal":
        spectrum = np.diag(1.0 + s)
    else:
        spectrum = np.diag(s) + np.ones((n, n))
    M = U @ spectrum @ U.T
    return (M + M.T) / 2.0


@dataclass(frozen=True)
class CovarianceSpec:
    sigma_zeta: tuple
    sigma_xi: tuple
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "sigma_zeta", tuple(float(s) for s in self.sigma_zeta))
        object.__setattr__(self, "sigma_xi", tuple(float(s) for s in self.sigma_xi))
        if not all(s > 0 for s in self.sigma_zeta + self.sigma_xi):
            raise InvalidInput("standard deviations must be positive")

    @property
    def sigma(self) -> np.ndarray:
        return np.array(self.sigma_zeta + self.sigma_xi)


def correlation(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    d = np.diag(M)
    if (d <= 0).any():
        raise InvalidInput("matrix has a nonpositive diagonal entry")
    inv = 1.0 / np.sqrt(d)
    corr = M * inv[:, None] * inv[None, :]
    np.fill_diagonal(corr, 1.0)
    return corr


def covariance_with_std(M, spec) -> np.ndarray:
    """Covariance with the correlation structure of ``M`` and the given deviations."""
    sigma = spec.sigma if isinstance(spec, CovarianceSpec) else np.asarray(spec, dtype=float)
    M = np.asarray(M, dtype=float)
    if M.shape != (len(sigma), len(sigma)):
        raise InvalidInput(f"matrix is {M.shape}, expected {len(sigma)} square")
    if (sigma <= 0).any():
        raise InvalidInput("standard deviations must be positive")
    return correlation(M) * sigma[:, None] * sigma[None, :]


def _cholesky(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(cov + JITTER * np.eye(len(cov)))
    except np.linalg.LinAlgError as exc:
        raise NumericalError("covariance is not positive definite") from exc


def sample_normal(mu, cov, n, seed=None) -> np.ndarray:
    """``n`` multivariate normal draws via a lower-triangular factor."""
    mu = np.asarray(mu, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (len(mu), len(mu)):
        raise InvalidInput("mean and covariance dimensions differ")
    if int(n) < 1:
        raise InvalidInput("sample size must be positive")
    L = _cholesky(cov)
    z = np.random.default_rng(seed).standard_normal((int(n), len(mu)))
    return mu + z @ L.T


def sample_dataset(mu, cov, n, seed=None, n_context=None, role="train") -> Dataset:
    """Draw ``n`` observations; the first ``n_context`` coordinates are covariates."""
    if n_context is None or not (0 < n_context < len(mu)):
        raise InvalidInput("n_context must split the coordinates into covariates and costs")
    draws = sample_normal(mu, cov, n, seed)
    costs = np.maximum(draws[:, n_context:], COST_FLOOR)
    return Dataset(draws[:, :n_context], costs, role=role)


def make_graph(rows, cols) -> DirectedGraph:
    """Grid DAG from the top-left to the bottom-right corner.

    Node ``(r, c)`` has id ``r * cols + c``; its outgoing arcs are listed
    rightward first, then downward.
    """
    rows, cols = int(rows), int(cols)
    if rows < 2 or cols < 2:
        raise InvalidInput("grid needs at least 2 rows and 2 columns")
    arcs = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            if c + 1 < cols:
                arcs.append((u, u + 1))
            if r + 1 < rows:
                arcs.append((u, u + cols))
    return DirectedGraph(rows * cols, tuple(arcs), 0, rows * cols - 1)


@dataclass(frozen=True)
class ShiftSpec:
    max_perturbation: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if not (0.0 <= self.max_perturbation <= 1.0):
            raise InvalidInput("maximum perturbation must lie in [0, 1]")


def perturb_means(mu_xi, shift: ShiftSpec) -> np.ndarray:
    """Scale each mean by ``1 + delta`` with ``delta`` uniform on ``[0, m]``.

    ``delta`` is ``m`` times a fixed uniform draw for the seed, so shifts at
    different levels share one random direction.
    """
    mu_xi = np.asarray(mu_xi, dtype=float)
    u = np.random.default_rng(shift.seed).uniform(size=mu_xi.shape)
    return mu_xi * (1.0 + shift.max_perturbation * u)


@dataclass(frozen=True)
class InstanceLaw:
    """Everything needed to sample one experiment instance."""

    graph: DirectedGraph
    n_context: int
    mu_xi: np.ndarray
    cov: np.ndarray

    def mean(self, mu_xi=None) -> np.ndarray:
        return np.concatenate([np.zeros(self.n_context), self.mu_xi if mu_xi is None else mu_xi])

    def sample(self, n, seed, role="train", mu_xi=None) -> Dataset:
        return sample_dataset(self.mean(mu_xi), self.cov, n, seed, self.n_context, role)


def make_instance(graph, n_context, seed=None, spd_variant="diagonal", mean_range=(2.0, 10.0),
                  cost_cv=0.25, context_std=1.0) -> InstanceLaw:
    """Random cost means and covariance for a graph.

    Means are uniform on ``mean_range``; cost standard deviations are
    ``cost_cv`` times the means; covariates have mean 0.
    """
    ss = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    mean_seed, spd_seed = ss.spawn(2)
    mu_xi = np.random.default_rng(mean_seed).uniform(*mean_range, size=graph.n_arcs)
    spec = CovarianceSpec((context_std,) * n_context, tuple(cost_cv * mu_xi))
    M = make_spd_matrix(n_context + graph.n_arcs, spd_seed, spd_variant)
    return InstanceLaw(graph, int(n_context), mu_xi, covariance_with_std(M, spec))


def write_manifest(path, info: dict) -> None:
    Path(path).write_text(json.dumps(info, indent=2, sort_keys=True) + "\n", encoding="utf-8")
