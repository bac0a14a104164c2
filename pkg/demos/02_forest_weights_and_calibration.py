"""From covariates to calibrated decisions on one synthetic instance.

Run with ``python demos/02_forest_weights_and_calibration.py``.

A random forest turns a new covariate vector into weights over training
cost vectors.  Each method is then calibrated on a validation set by
picking the ambiguity level with the best validation PCR, and scored on a
test set drawn from shifted cost means.
"""

# %%
import numpy as np

from prescript_opt import EstimatorSpec, FittedProblem, calibrate_dr, calibrate_drpcr, pcr
from prescript_opt.datagen import (ShiftSpec, correlation, make_graph, make_instance,
                                   perturb_means)

graph = make_graph(3, 4)
n_context = 4

# %% How informative are the covariates?
# The "ones" construction adds a strong common factor, so covariates carry
# real information about costs; the "diagonal" one leaves them nearly
# uncorrelated with every arc.
for variant in ("diagonal", "ones"):
    law = make_instance(graph, n_context, seed=3, spd_variant=variant)
    cross = correlation(law.cov)[:n_context, n_context:]
    print(f"{variant:8s} largest |corr(covariate, cost)| = {np.abs(cross).max():.3f}")

law = make_instance(graph, n_context, seed=3, spd_variant="ones")
train = law.sample(60, seed=1)

# %% Forest weights for one new context
spec = EstimatorSpec(n_trees=30, max_depth=4, min_leaf=3)
problem = FittedProblem.from_data(graph, train, spec, seed=2, engine="highs")
w = problem.model.weight_matrix(train.contexts[:1])[0]
top = np.argsort(w)[::-1][:5]
print("five heaviest training points:", top, np.round(w[top], 3))

# %% Calibrate on a shifted validation set, score on a shifted test set
# Small validation sets make the PCR noisy.  DRPCR may settle on gamma* = 0,
# whose policy never does worse than the benchmark in the worst case; its
# test PCR is then close to 0 by construction.
level = 0.4
val = law.sample(40, seed=3, role="validation", mu_xi=perturb_means(law.mu_xi, ShiftSpec(level, 4)))
test = law.sample(80, seed=5, role="test", mu_xi=perturb_means(law.mu_xi, ShiftSpec(level, 6)))
grid = [0.0, 0.2, 0.5, 0.8, 0.95]
test_hind = problem.hindsight_costs(test)

for method in ("cso", "drcso", "drcro", "drpcr"):
    if method == "drpcr":
        res = calibrate_drpcr(None, val, graph, grid=grid, problem=problem)
    else:
        res = calibrate_dr(None, val, graph, grid=grid, method=method, problem=problem)
    decisions = problem.decisions(method, res.alpha_star, test.contexts, gamma=res.gamma_star)
    score = pcr(problem.score(decisions, test, test_hind))
    gamma = "" if res.gamma_star is None else f"  gamma*={res.gamma_star:.3f}"
    print(f"{method:6s} alpha*={res.alpha_star:.2f}{gamma}  validation PCR {res.best_score:+.3f}"
          f"  test PCR {score:+.3f}")
