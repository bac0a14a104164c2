"""Walk through every decision rule on a three-node network.

Run with ``python demos/01_three_node_walkthrough.py``.

The network has a direct arc o->d and a two-leg route o->m->d.  Two cost
scenarios are equally likely: in the first the two-leg route is cheap,
in the second the direct arc is.
"""

# %%
import numpy as np

from prescript_opt import (Decision, DirectedGraph, DiscreteConditional, HindsightTable,
                           JointModel, bisection, phi_omega, solve_cso, solve_drcro, solve_drcso,
                           worst_case_expectation)

graph = DirectedGraph(3, ((0, 2), (0, 1), (1, 2)), origin=0, destination=2)
scenarios = np.array([[5.0, 2.0, 2.0],
                      [3.0, 4.0, 4.0]])
uniform = DiscreteConditional.uniform(scenarios)
direct = Decision(np.array([1.0, 0.0, 0.0]))
two_leg = Decision(np.array([0.0, 1.0, 1.0]))

for name, d in (("direct", direct), ("two-leg", two_leg)):
    print(f"{name:8s} cost per scenario: {scenarios @ d.flow}")

# %% Worst-case expectation over the capped ambiguity set
# alpha = 0 is the plain mean; as alpha grows the adversary may shift
# weight onto the worst scenario, up to 1 / (1 - alpha) times its weight.
for alpha in (0.0, 0.2, 0.5, 0.9):
    wc = worst_case_expectation(scenarios @ two_leg.flow, uniform.weights, alpha)
    print(f"alpha={alpha:.1f}  two-leg worst case {wc.value:.3f}  weights {wc.distribution}")

# %% Conditional and robust decisions
print("CSO        ", solve_cso(graph, uniform).flow)
print("DRCSO 0.9  ", solve_drcso(graph, uniform, 0.9).flow)

table = HindsightTable.build(graph, scenarios)
print("hindsight values", table.values)
# The regret-robust LP mixes the routes: regrets are (lam, 5 (1 - lam)).
print("DRCRO 0.9 relaxed", np.round(solve_drcro(graph, uniform, 0.9, table).flow, 4))
print("DRCRO 0.9 binary ", solve_drcro(graph, uniform, 0.9, table, binary=True).flow)

# %% The prescriptiveness subproblem
# phi(gamma) compares a decision against the target
# (1 - gamma) * benchmark cost + gamma * hindsight cost, in the worst case.
for gamma in (0.0, 0.5, 1.0):
    r = phi_omega(graph, uniform, gamma, 0.5, direct, table)
    print(f"gamma={gamma:.1f}  phi={r.value:+.4f}  decision {np.round(r.decision.flow, 3)}")

# %% Bisection on gamma over a joint model with three contexts
joint = JointModel(np.arange(3.0)[:, None], [0.25, 0.25, 0.5],
                   (DiscreteConditional.point_mass(scenarios, 0),
                    DiscreteConditional.point_mass(scenarios, 1), uniform))
result = bisection(graph, joint, 0.0, direct, table, epsilon=1e-3)
print(f"gamma* = {result.gamma_star:.4f} after {len(result.trace)} iterations")
for step in result.trace[:4]:
    print(f"  mid {step.gamma_mid:.4f}  psi {step.psi_value:+.5f}  [{step.lo:.4f}, {step.hi:.4f}]")
