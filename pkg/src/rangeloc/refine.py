"""Gauss-Newton refinement on the (weighted) range residuals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, IllConditionedError, SingularityError
from .estimators import Estimate, Method, estimate_variances, first_step, floored_variances
from .model import MeasurementSet, Scenario

COND_LIMIT = 1e12


@dataclass(frozen=True)
class GnState:
    x: np.ndarray
    residuals: np.ndarray
    jacobian: np.ndarray
    step_norm: float


def jacobian(x, sensors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit rows ``(x - a_i)' / ||x - a_i||`` and the ranges ``||x - a_i||``."""
    diff = np.asarray(x, dtype=float) - sensors
    r = np.linalg.norm(diff, axis=1)
    if np.any(r <= 1e-12 * (1.0 + np.abs(sensors).max())):
        raise SingularityError("iterate coincides with a sensor")
    return diff / r[:, None], r


def _step(x, scenario: Scenario, meas: MeasurementSet, weights=None) -> GnState:
    x = np.asarray(x, dtype=float)
    # unit rows and ranges only depend on the sensor, so expand per measurement
    J_s, r_s = jacobian(x, scenario.sensors)
    idx = meas.sensor_index
    J = J_s[idx]
    resid = meas.values - r_s[idx]
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        w = w / w.max()
        sw = np.sqrt(w)
        Jw, rw = J * sw[:, None], resid * sw
    else:
        Jw, rw = J, resid
    N = Jw.T @ Jw
    if np.linalg.cond(N) > COND_LIMIT:
        raise IllConditionedError("J'WJ is ill-conditioned")
    dx = np.linalg.solve(N, Jw.T @ rw)
    return GnState(x + dx, resid, J, float(np.linalg.norm(dx)))


def gn_step(x0, scenario: Scenario, meas: MeasurementSet, weights=None) -> np.ndarray:
    """One Gauss-Newton update ``x0 + (J'WJ)^-1 J'W (d - f(x0))``.

    ``weights`` are per-measurement (typically ``1/sigma_i^2``); W = I if absent.
    """
    return _step(x0, scenario, meas, weights).x


def sensor_weights(meas: MeasurementSet, variances) -> np.ndarray:
    """Per-measurement weights ``1/sigma^2`` expanded from per-sensor variances."""
    v = np.broadcast_to(np.asarray(variances, dtype=float), (meas.n_sensors,))
    return (1.0 / v)[meas.sensor_index]


def second_step(
    est: Estimate,
    scenario: Scenario,
    meas: MeasurementSet,
    sigma2=None,
) -> Estimate:
    """One Gauss-Newton iteration from a first-step estimate.

    The weighted variants also weight the Gauss-Newton step: by the known
    variances for WBiasEliLin and by the estimated ones for AWBiasEliLin.
    """
    method = Method(est.method)
    weights = None
    if method == Method.W_BIAS_ELI_LIN:
        weights = sensor_weights(meas, scenario.variances if sigma2 is None else sigma2)
    elif method == Method.AW_BIAS_ELI_LIN:
        weights = sensor_weights(meas, est.diagnostics["variances"])
    x = gn_step(est.x_hat, scenario, meas, weights)
    return Estimate(
        x,
        f"TwoStep({method.value})",
        sigma2_hat=est.sigma2_hat,
        diagnostics={"first_step": est.to_dict()},
    )


def two_step(
    first: str,
    scenario: Scenario,
    meas: MeasurementSet,
    sigma2=None,
) -> Estimate:
    """First-step estimate followed by exactly one Gauss-Newton iteration."""
    est = first_step(first, scenario, meas, sigma2)
    return second_step(est, scenario, meas, sigma2)


def gn_converge(
    x0,
    scenario: Scenario,
    meas: MeasurementSet,
    weights=None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> Estimate:
    """Iterate Gauss-Newton until the step norm drops below ``tol``.

    A local solver only. Raises DivergenceError when the step norm grows
    tenfold within five iterations.
    """
    x = np.array(x0, dtype=float)
    steps: list[float] = []
    converged = max_iter == 0
    for _ in range(max_iter):
        state = _step(x, scenario, meas, weights)
        x = state.x
        steps.append(state.step_norm)
        if state.step_norm < tol * (1.0 + np.linalg.norm(x)):
            converged = True
            break
        if len(steps) > 5 and steps[-1] > 10.0 * steps[-6]:
            raise DivergenceError(f"Gauss-Newton steps grew from {steps[-6]:g} to {steps[-1]:g}")
    return Estimate(
        x,
        Method.LS_GN,
        diagnostics={"iterations": len(steps), "converged": converged, "step_norms": steps},
    )


def ls_estimate(scenario: Scenario, meas: MeasurementSet, weighted: str | None = None) -> Estimate:
    """Reference LS / WLS / AWLS solution from a linear first step.

    ``weighted`` is None (LS), ``"known"`` (WLS with the scenario variances) or
    ``"estimated"`` (AWLS with sample variances).
    """
    if weighted is None:
        start = first_step(Method.NOISE_EST_LIN, scenario, meas).x_hat
        return gn_converge(start, scenario, meas)
    if weighted == "known":
        v = scenario.variances
        start = first_step(Method.W_BIAS_ELI_LIN, scenario, meas).x_hat
    else:
        v = floored_variances(estimate_variances(meas))
        start = first_step(Method.AW_BIAS_ELI_LIN, scenario, meas).x_hat
    return gn_converge(start, scenario, meas, weights=sensor_weights(meas, v))
