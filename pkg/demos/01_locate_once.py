"""Locate the target once with every first-step estimator and its refinement.

Ten sensors, one noisy range each (sigma^2 = 1). The linear lifts are fast
but noisy; one Gauss-Newton step pulls all of them close to the
least-squares answer.
"""

import numpy as np

from rangeloc import fisher, reference_scenario, simulate
from rangeloc.estimators import first_step
from rangeloc.refine import ls_estimate, second_step

sc = reference_scenario(sigma2=1.0)
meas = simulate(sc, seed=2024)
print(f"true position {sc.target}, CRLB {fisher(sc).crlb:.3f}\n")

for name in ("S-LS", "BiasEli", "BiasEliLin", "NoiseEst", "NoiseEstLin"):
    est = first_step(name, sc, meas)
    err1 = np.linalg.norm(est.x_hat - sc.target)
    line = f"{name:12s} error {err1:6.3f}"
    if name != "S-LS":
        err2 = np.linalg.norm(second_step(est, sc, meas).x_hat - sc.target)
        line += f"   after one GN step {err2:6.3f}"
    if est.sigma2_hat is not None:
        line += f"   sigma2_hat {est.sigma2_hat:7.3f}"
    print(line)

ls = ls_estimate(sc, meas)
print(f"\nconverged LS   error {np.linalg.norm(ls.x_hat - sc.target):6.3f} "
      f"({ls.diagnostics['iterations']} iterations)")
