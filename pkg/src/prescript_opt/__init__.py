"""Robust prescriptiveness optimization for contextual shortest paths.

Fit a conditional-distribution estimator on covariate/cost data, then
choose routes that maximize the worst-case prescriptiveness ratio over a
nested CVaR ambiguity set.  Baselines (CSO, DRCSO, DRCRO) and the
sample-average benchmark share the same flow LP machinery.
"""

from .calibration import FittedProblem, alpha_grid, calibrate_dr, calibrate_drpcr
from .cvar import AmbiguityLevel, worst_case_expectation
from .drpcr import accelerated_bisection, bisection, extract_policy, phi_omega, psi
from .errors import InvalidInput, NonConvexDetected, NumericalError, PrescriptOptError, SolverStalled
from .estimators import EstimatorSpec, fit, weights
from .flow import FlowOracle
from .metrics import CostTriple, pcr
from .model import (Dataset, Decision, DirectedGraph, DiscreteConditional, JointModel,
                    PolicyTable, evaluate_cost, feasibility_residual)
from .simplex import LinearProgram, solve_lp, solve_milp
from .solvers import HindsightTable, hindsight, solve_cso, solve_drcro, solve_drcso, solve_saa

__version__ = "0.1.0"

__all__ = [
    "AmbiguityLevel", "CostTriple", "Dataset", "Decision", "DirectedGraph", "DiscreteConditional",
    "EstimatorSpec", "FittedProblem", "FlowOracle", "HindsightTable", "InvalidInput",
    "JointModel", "LinearProgram", "NonConvexDetected", "NumericalError", "PolicyTable",
    "PrescriptOptError", "SolverStalled", "accelerated_bisection", "alpha_grid", "bisection",
    "calibrate_dr", "calibrate_drpcr", "evaluate_cost", "extract_policy", "feasibility_residual",
    "fit", "hindsight", "pcr", "phi_omega", "psi", "solve_cso", "solve_drcro", "solve_drcso",
    "solve_lp", "solve_milp", "solve_saa", "weights", "worst_case_expectation",
]
