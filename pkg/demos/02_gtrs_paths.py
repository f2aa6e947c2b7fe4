"""The constrained lift problem: regular multiplier search vs the boundary case.

On measured data the multiplier is found by bisection after a Sturm count
confirms a root. A hand-built right-hand side with no component along the
pencil's null vector forces the boundary (hard) case instead.
"""

import numpy as np

from rangeloc import polyspectral as ps
from rangeloc.gtrs import GtrsInstance, build_T, kkt_residuals, solve_bias_eli
from rangeloc.model import build_design, lift_matrices, reference_scenario, simulate

sc = reference_scenario(1.0)
inst = GtrsInstance.from_design(build_design(sc, simulate(sc, 1), "bias_eli", 1.0))
sol = solve_bias_eli(inst)
T = build_T(inst, ps.simdiag(inst.AtA, inst.D))
print("measured data")
print(f"  path {sol.path}, lambda_l {sol.lambda_lower:.4f}, lambda* {sol.lambda_star:.6f}")
print(f"  T has degree {T.degree()}, bisection took {sol.diagnostics['bisection_iterations']} steps")
print(f"  optimality residuals {kkt_residuals(inst, sol)}")

rng = np.random.default_rng(0)
D, g = lift_matrices(2)
A = np.hstack([rng.normal(size=(6, 2)), np.ones((6, 1))])
diag = ps.simdiag(A.T @ A, D)
w = np.zeros(3)
j = int(np.flatnonzero(diag.delta == 0)[0])
w[j] = -np.sign((diag.R.T @ g)[j])
h = np.linalg.solve(diag.R.T, w) + diag.lambda_lower * g
hard = GtrsInstance.from_arrays(A, A @ np.linalg.solve(A.T @ A, h), D, g)
sol = solve_bias_eli(hard)
print("\nconstructed instance")
print(f"  path {sol.path}, lambda* = lambda_l = {sol.lambda_star:.4f}")
print(f"  constraint residual {hard.constraint(sol.y_star):.1e}")
