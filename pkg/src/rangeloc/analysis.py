"""Theoretical baselines and Monte-Carlo aggregation.

``fisher`` gives the Fisher information of the range model and the CRLB
``tr(F^-1)``; ``theoretical_mse`` gives the exact finite-sample MSE matrix
of the linear lifts and the bias of their variance estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, RankDeficiencyError
from .model import Scenario


@dataclass(frozen=True)
class FisherReport:
    F: np.ndarray
    crlb: float
    crlb_diag: np.ndarray

    def to_dict(self) -> dict:
        return {"F": self.F.tolist(), "crlb": self.crlb, "crlb_diag": self.crlb_diag.tolist()}


def fisher(scenario: Scenario, at=None) -> FisherReport:
    """Fisher information ``sum_i u_i u_i' / sigma_i^2`` over all m measurements.

    ``u_i`` is the unit vector from sensor i to ``at`` (the true target by
    default); each sensor counts ``repeats`` times.
    """
    x = scenario.target if at is None else np.asarray(at, dtype=float)
    var = scenario.variances
    if np.any(var <= 0):
        raise ConfigurationError("Fisher information needs positive noise variances")
    diff = x - scenario.sensors
    r = np.linalg.norm(diff, axis=1)
    if np.any(r == 0):
        raise ConfigurationError("evaluation point coincides with a sensor")
    u = diff / r[:, None]
    F = scenario.repeats * (u.T * (1.0 / var)) @ u
    try:
        L = np.linalg.cholesky(F)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("Fisher information is singular") from exc
    if np.linalg.cond(F) > 1e14:
        raise RankDeficiencyError("Fisher information is singular")
    Finv = np.linalg.inv(L).T @ np.linalg.inv(L)
    return FisherReport(F, float(np.trace(Finv)), np.diag(Finv).copy())


def information_rate(scenario: Scenario, at=None) -> np.ndarray:
    """Per-measurement information ``J'J / m`` at ``at`` (noise-free units).

    A finite-m stand-in for the limiting matrix of the asymptotic theory;
    it matches that limit only as the repeat count grows.
    """
    x = scenario.target if at is None else np.asarray(at, dtype=float)
    diff = x - scenario.sensors
    u = diff / np.linalg.norm(diff, axis=1)[:, None]
    return u.T @ u / scenario.n_sensors


@dataclass(frozen=True)
class TheoreticalMse:
    """``lambda_diag`` is the diagonal of the squared-range noise covariance."""

    lambda_diag: np.ndarray
    mse_matrix: np.ndarray
    sigma2_bias: float
    n: int

    @property
    def Lambda(self) -> np.ndarray:
        return np.diag(self.lambda_diag)

    @property
    def position_mse(self) -> float:
        return float(np.trace(self.mse_matrix[: self.n, : self.n]))

    def to_dict(self) -> dict:
        return {
            "mse_matrix": self.mse_matrix.tolist(),
            "position_mse": self.position_mse,
            "sigma2_bias": self.sigma2_bias,
        }


def theoretical_mse(scenario: Scenario, sigma2: float | None = None) -> TheoreticalMse:
    """Finite-sample MSE of the linear lifts and the bias of their variance estimate.

    With ``P = (A'A)^-1 A'`` and ``Lambda = diag(4 f_j^2 sigma^2 + 2 sigma^4)``
    the MSE matrix is ``P Lambda P'`` and the variance estimate is off by
    ``-sum_{i <= n} sum_j P_ij^2 Lambda_jj`` in expectation.
    """
    if sigma2 is None:
        if scenario.noise.kind != "homogeneous":
            raise ConfigurationError("theoretical_mse needs a homogeneous variance")
        sigma2 = scenario.noise.sigma2
    n = scenario.n
    idx = scenario.sensor_index
    a = scenario.sensors[idx]
    A = np.hstack([-2.0 * a, np.ones((a.shape[0], 1))])
    f2 = (scenario.true_ranges() ** 2)[idx]
    lam = 4.0 * f2 * sigma2 + 2.0 * sigma2**2
    AtA = A.T @ A
    try:
        np.linalg.cholesky(AtA)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("A'A is singular") from exc
    P = np.linalg.solve(AtA, A.T)
    mse = (P * lam) @ P.T
    mse = 0.5 * (mse + mse.T)
    bias = -float(np.sum(P[:n] ** 2 * lam))
    return TheoreticalMse(lam, mse, bias, n)


@dataclass(frozen=True)
class EmpiricalStats:
    bias: np.ndarray
    bias_se: np.ndarray
    mse: float
    mse_se: float
    n_runs: int
    sigma2_bias: float | None = None
    sigma2_bias_se: float | None = None

    def to_dict(self) -> dict:
        return {
            "bias": self.bias.tolist(),
            "bias_se": self.bias_se.tolist(),
            "mse": self.mse,
            "mse_se": self.mse_se,
            "n_runs": self.n_runs,
            "sigma2_bias": self.sigma2_bias,
            "sigma2_bias_se": self.sigma2_bias_se,
        }


def _mean_se(values: Sequence[float]) -> tuple[float, float]:
    N = len(values)
    mean = math.fsum(values) / N
    if N < 2:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in values) / (N - 1)
    return mean, math.sqrt(var / N)


def summarize(x_hats: np.ndarray, truth, sigma2_hats=None, sigma2=None) -> EmpiricalStats:
    """Statistics of stacked estimates ``x_hats`` (shape (N, n)) with compensated sums."""
    x_hats = np.atleast_2d(np.asarray(x_hats, dtype=float))
    N = x_hats.shape[0]
    if N == 0:
        raise ConfigurationError("no runs to aggregate")
    err = x_hats - np.asarray(truth, dtype=float)
    bias, bias_se = zip(*(_mean_se(err[:, k].tolist()) for k in range(err.shape[1])))
    mse, mse_se = _mean_se(np.einsum("ij,ij->i", err, err).tolist())
    s_bias = s_se = None
    if sigma2_hats is not None and sigma2 is not None:
        s_bias, s_se = _mean_se((np.asarray(sigma2_hats, dtype=float) - sigma2).tolist())
    return EmpiricalStats(np.array(bias), np.array(bias_se), mse, mse_se, N, s_bias, s_se)


def aggregate(runs: Iterable, truth: Scenario) -> EmpiricalStats:
    """Per-coordinate mean deviation and MSE of a list of Estimates."""
    runs = list(runs)
    if not runs:
        raise ConfigurationError("no runs to aggregate")
    x = np.array([r.x_hat for r in runs], dtype=float)
    if x.shape[1] != truth.n:
        raise ConfigurationError("estimate dimension does not match the scenario")
    s2 = None
    true_s2 = None
    if all(r.sigma2_hat is not None for r in runs) and truth.noise.kind == "homogeneous":
        s2 = [r.sigma2_hat for r in runs]
        true_s2 = truth.noise.sigma2
    return summarize(x, truth.target, s2, true_s2)


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])
