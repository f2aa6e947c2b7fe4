"""First-step position estimators built on the squared-range linear model.

All of them return an :class:`Estimate`. ``BiasEli`` and ``NoiseEst`` solve
the constrained problems globally; the ``*Lin`` variants drop the constraint
and are ordinary (or weighted) least squares.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import polyspectral as ps
from .errors import ConfigurationError, RankDeficiencyError
from .gtrs import GtrsInstance, _DiagonalForm, build_T, solve_bias_eli
from .model import DesignSystem, MeasurementSet, Scenario, build_design

VARIANCE_FLOOR = 1e-8


class Method(str, enum.Enum):
    LS_GN = "LS-GN"
    SLS = "S-LS"
    BIAS_ELI = "BiasEli"
    BIAS_ELI_LIN = "BiasEliLin"
    NOISE_EST = "NoiseEst"
    NOISE_EST_LIN = "NoiseEstLin"
    W_BIAS_ELI_LIN = "WBiasEliLin"
    AW_BIAS_ELI_LIN = "AWBiasEliLin"

    def __str__(self):
        return self.value


@dataclass
class Estimate:
    x_hat: np.ndarray
    method: str
    sigma2_hat: float | None = None
    lifted: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def clean(v):
            if isinstance(v, np.ndarray):
                return v.tolist()
            if isinstance(v, np.generic):
                return v.item()
            if isinstance(v, dict):
                return {k: clean(u) for k, u in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(u) for u in v]
            return v

        return clean(
            {
                "method": str(self.method),
                "x_hat": self.x_hat,
                "sigma2_hat": self.sigma2_hat,
                "lifted": self.lifted,
                "diagnostics": self.diagnostics,
            }
        )


@dataclass(frozen=True)
class VarianceEstimates:
    variances: np.ndarray
    repeats: int


def _split(y: np.ndarray, n: int):
    x = np.array(y[:n])
    return x, float(y[n] - x @ x)


def _lstsq(A: np.ndarray, rhs: np.ndarray, weights=None) -> tuple[np.ndarray, float]:
    if weights is not None:
        sw = np.sqrt(weights)
        A = A * sw[:, None]
        rhs = rhs * sw
    y, _, rank, sv = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < A.shape[1]:
        raise RankDeficiencyError("A has deficient column rank")
    return y, float(sv[0] / sv[-1])


def _gtrs(design: DesignSystem, rhs: str, method: Method) -> Estimate:
    inst = GtrsInstance.from_design(design, rhs)
    sol = solve_bias_eli(inst)
    n = design.n
    diag = dict(sol.diagnostics)
    diag.update(path=sol.path, lambda_star=sol.lambda_star, lambda_lower=sol.lambda_lower)
    return Estimate(np.array(sol.y_star[:n]), method, lifted=sol.y_star, diagnostics=diag)


def bias_eli(design: DesignSystem) -> Estimate:
    """Squared-range least squares with the known variance subtracted, solved globally."""
    return _gtrs(design, "b", Method.BIAS_ELI)


def sls(design: DesignSystem) -> Estimate:
    """Plain squared-range least squares (no variance correction), solved globally."""
    return _gtrs(design, "b_bar", Method.SLS)


def bias_eli_lin(design: DesignSystem) -> Estimate:
    y, cond = _lstsq(design.A, design.rhs("b"))
    return Estimate(y[: design.n], Method.BIAS_ELI_LIN, lifted=y, diagnostics={"cond": cond})


def noise_est_lin(design: DesignSystem) -> Estimate:
    """Unconstrained joint fit of position and ``||x||^2 + sigma^2``.

    The variance estimate is not clamped and can be negative.
    """
    y, cond = _lstsq(design.A, design.b_bar)
    x, s2 = _split(y, design.n)
    return Estimate(x, Method.NOISE_EST_LIN, sigma2_hat=s2, lifted=y, diagnostics={"cond": cond})


def noise_est(design: DesignSystem) -> Estimate:
    """Joint position/variance fit under ``sigma^2 >= 0``.

    Returns the unconstrained fit when it already has a nonnegative variance;
    otherwise the constraint is active and the nonnegative multiplier is found
    by bisection on ``c(lambda)`` over ``(0, upper bound]``.
    """
    y0, cond = _lstsq(design.A, design.b_bar)
    n = design.n
    x0, s0 = _split(y0, n)
    if s0 >= 0:
        return Estimate(
            x0, Method.NOISE_EST, sigma2_hat=s0, lifted=y0,
            diagnostics={"phase": 1, "cond": cond, "lambda_star": 0.0},
        )
    inst = GtrsInstance.from_design(design, "b_bar")
    diag = ps.simdiag(inst.AtA, inst.D)
    form = _DiagonalForm(inst, diag)
    T = build_T(inst, diag)
    hi = 1.0 + ps.cauchy_bound(T) if T.trim().degree() >= 1 else 1.0
    c_hi = form.c(hi)
    while c_hi >= 0:
        hi *= 2.0
        c_hi = form.c(hi)
    c_0 = form.c(0.0)
    lam, info = ps.bisect_root(form.c, 0.0, hi, full_output=True, f_lo=c_0, f_hi=c_hi)
    y = form.y(lam)
    x = np.array(y[:n])
    return Estimate(
        x, Method.NOISE_EST, sigma2_hat=0.0, lifted=y,
        diagnostics={
            "phase": 2, "cond": cond, "lambda_star": lam,
            "bisection_iterations": info.iterations,
            "constraint_residual": inst.constraint(y),
        },
    )


def w_bias_eli_lin(design: DesignSystem) -> Estimate:
    """Weighted least squares on the variance-corrected squared ranges."""
    if design.weights is None or design.b_sigma is None:
        raise ConfigurationError("w_bias_eli_lin needs a design built in weighted mode")
    if np.any(design.weights <= 0):
        raise ConfigurationError("weights must be positive")
    y, cond = _lstsq(design.A, design.b_sigma, design.weights)
    return Estimate(y[: design.n], Method.W_BIAS_ELI_LIN, lifted=y, diagnostics={"cond": cond})


def estimate_variances(meas: MeasurementSet) -> VarianceEstimates:
    """Per-sensor sample variances of the repeated ranges (all ones when T = 1)."""
    d = meas.grouped
    T = d.shape[1]
    if T < 2:
        return VarianceEstimates(np.ones(d.shape[0]), T)
    return VarianceEstimates(np.var(d, axis=1, ddof=1), T)


def floored_variances(var_est: VarianceEstimates) -> np.ndarray:
    v = np.asarray(var_est.variances, dtype=float)
    floor = VARIANCE_FLOOR * v.max() if v.max() > 0 else VARIANCE_FLOOR
    if np.any(v < floor):
        warnings.warn("estimated variances floored to avoid infinite weights", RuntimeWarning)
        v = np.maximum(v, floor)
    return v


def aw_bias_eli_lin(
    scenario: Scenario,
    meas: MeasurementSet,
    var_est: VarianceEstimates | None = None,
) -> Estimate:
    """Weighted Bias-Eli-Lin with per-sensor variances estimated from the repeats."""
    if var_est is None:
        var_est = estimate_variances(meas)
    v = floored_variances(var_est)
    design = build_design(scenario, meas, "weighted", v)
    est = w_bias_eli_lin(design)
    est.method = Method.AW_BIAS_ELI_LIN
    est.diagnostics["variances"] = v
    return est


def first_step(
    method: str,
    scenario: Scenario,
    meas: MeasurementSet,
    sigma2=None,
) -> Estimate:
    """Run a first-step estimator by name.

    ``sigma2`` overrides the variance knowledge taken from the scenario for
    the known-variance methods (scalar for BiasEli/BiasEliLin, scalar or
    per-sensor for WBiasEliLin).
    """
    method = Method(method)
    if method in (Method.NOISE_EST, Method.NOISE_EST_LIN, Method.SLS):
        design = build_design(scenario, meas, "noise_est")
        return {Method.NOISE_EST: noise_est, Method.NOISE_EST_LIN: noise_est_lin,
                Method.SLS: sls}[method](design)
    if method in (Method.BIAS_ELI, Method.BIAS_ELI_LIN):
        if sigma2 is None:
            if scenario.noise.kind != "homogeneous":
                raise ConfigurationError(f"{method} needs a single known variance")
            sigma2 = scenario.noise.sigma2
        design = build_design(scenario, meas, "bias_eli", sigma2)
        return bias_eli(design) if method == Method.BIAS_ELI else bias_eli_lin(design)
    if method == Method.W_BIAS_ELI_LIN:
        design = build_design(scenario, meas, "weighted",
                              scenario.variances if sigma2 is None else sigma2)
        return w_bias_eli_lin(design)
    if method == Method.AW_BIAS_ELI_LIN:
        return aw_bias_eli_lin(scenario, meas)
    raise ConfigurationError(f"{method} is not a first-step estimator")


def lin_batch(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Least-squares lifts for many right-hand sides; ``rhs`` has shape (runs, m)."""
    Q, Rm = np.linalg.qr(A)
    if np.min(np.abs(np.diag(Rm))) <= 1e-12 * np.max(np.abs(np.diag(Rm))):
        raise RankDeficiencyError("A has deficient column rank")
    return solve_triangular(Rm, Q.T @ np.asarray(rhs).T).T
