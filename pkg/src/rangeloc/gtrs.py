"""Global solver for ``min ||Ay - b||^2  s.t.  y'Dy + 2g'y = 0``.

The multiplier ``lambda`` of the optimality system

    (A'A + lambda D) y = A'b - lambda g,   y'Dy + 2g'y = 0,   A'A + lambda D >= 0

is found by bisection on the strictly decreasing ``c(lambda)`` when the
polynomial ``T`` has a root right of ``lambda_l``; otherwise the multiplier
sits on the boundary and ``y`` is recovered on the one-dimensional null
space of ``A'A + lambda_l D``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.polynomial import Polynomial

from . import polyspectral as ps
from .errors import DegeneracyError, InfeasibleError, SingularityError

log = logging.getLogger(__name__)

BOUNDARY_EPS = 1e-10


@dataclass(frozen=True)
class GtrsInstance:
    """Normal-equation form of the problem: only A'A, A'b and b'b are kept."""

    AtA: np.ndarray
    Atb: np.ndarray
    btb: float
    D: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        AtA = np.asarray(self.AtA, dtype=float)
        k = AtA.shape[0]
        if AtA.shape != (k, k) or np.shape(self.Atb) != (k,) or np.shape(self.g) != (k,):
            raise ValueError("inconsistent GTRS dimensions")
        object.__setattr__(self, "AtA", 0.5 * (AtA + AtA.T))

    @classmethod
    def from_arrays(cls, A, b, D, g, weights=None) -> "GtrsInstance":
        A = np.asarray(A, dtype=float)
        b = np.asarray(b, dtype=float)
        if weights is not None:
            Aw = A * np.asarray(weights)[:, None]
            return cls(Aw.T @ A, Aw.T @ b, float(b @ (np.asarray(weights) * b)), D, g)
        return cls(A.T @ A, A.T @ b, float(b @ b), D, g)

    @classmethod
    def from_design(cls, design, rhs: str = "b", weighted: bool = False) -> "GtrsInstance":
        w = design.weights if weighted else None
        return cls.from_arrays(design.A, design.rhs(rhs), design.D, design.g, w)

    @property
    def size(self) -> int:
        return self.AtA.shape[0]

    def objective(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(y @ self.AtA @ y - 2.0 * y @ self.Atb + self.btb)

    def constraint(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(y @ self.D @ y + 2.0 * self.g @ y)

    def y_of_lambda(self, lam: float) -> np.ndarray:
        H = self.AtA + lam * self.D
        try:
            L = np.linalg.cholesky(H)
        except np.linalg.LinAlgError as exc:
            raise SingularityError(f"A'A + {lam} D is not positive definite") from exc
        z = np.linalg.solve(L, self.Atb - lam * self.g)
        return np.linalg.solve(L.T, z)


def c_of_lambda(inst: GtrsInstance, lam: float) -> float:
    """Constraint value ``y'Dy + 2g'y`` at ``y(lambda)``."""
    return inst.constraint(inst.y_of_lambda(lam))


class _DiagonalForm:
    """``y(lambda) = R (w(lambda) / (gamma + lambda delta))`` with w = R'(A'b - lambda g)."""

    def __init__(self, inst: GtrsInstance, diag: ps.Diagonalization):
        self.R = diag.R
        self.gamma = diag.gamma
        self.delta = diag.delta
        self.w0 = diag.R.T @ inst.Atb
        self.h = diag.R.T @ inst.g

    def y(self, lam: float) -> np.ndarray:
        return self.R @ ((self.w0 - lam * self.h) / (self.gamma + lam * self.delta))

    def c(self, lam: float) -> float:
        z = (self.w0 - lam * self.h) / (self.gamma + lam * self.delta)
        return float(self.delta @ (z * z) + 2.0 * self.h @ z)


def build_T(inst: GtrsInstance, diag: ps.Diagonalization) -> Polynomial:
    """Polynomial ``c(lambda) * prod_j (gamma_j + lambda delta_j)^2`` of degree <= 2n+2."""
    R = diag.R
    h = R.T @ inst.g
    w0 = R.T @ inst.Atb
    k = inst.size
    w = [Polynomial([w0[i], -h[i]]) for i in range(k)]
    f = [Polynomial([diag.gamma[i], diag.delta[i]]) for i in range(k)]
    T = Polynomial([0.0])
    for i in range(k):
        others = Polynomial([1.0])
        for j in range(k):
            if j != i:
                others = others * f[j] ** 2
        T = T + (w[i] * (2.0 * h[i]) * f[i] + w[i] ** 2 * diag.delta[i]) * others
    return T


def solve_hard_case(inst: GtrsInstance, lambda_l: float, v) -> np.ndarray:
    """Boundary-multiplier solution.

    Writes ``y = y_p + t v`` with ``y_p`` the minimum-norm solution of the
    singular system and picks the smaller root ``t`` of the constraint, which
    minimizes ``v'y`` over ``y'Dy + 2g'y <= 0``.
    """
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    H = inst.AtA + lambda_l * inst.D
    rhs = inst.Atb - lambda_l * inst.g
    evals = np.linalg.eigvalsh(H)
    scale = max(np.abs(evals).max(), 1e-300)
    if np.sum(np.abs(evals) <= 1e-9 * scale) > 1:
        raise DegeneracyError("null space of A'A + lambda_l D has dimension > 1")
    y_p = np.linalg.lstsq(H, rhs, rcond=1e-12)[0]
    resid = np.linalg.norm(H @ y_p - rhs)
    if resid > 1e-8 * (np.linalg.norm(rhs) + scale * np.linalg.norm(y_p) + 1.0):
        raise InfeasibleError(f"boundary system is inconsistent (residual {resid:g})")

    qa = float(v @ inst.D @ v)
    qb = 2.0 * float(v @ inst.D @ y_p + inst.g @ v)
    qc = inst.constraint(y_p)
    if qa > 0:
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0:
            if disc < -1e-10 * (qb * qb + abs(4.0 * qa * qc)):
                raise InfeasibleError("constraint has no real solution on the null line")
            disc = 0.0
        root = math.sqrt(disc)
        # smaller root of qa t^2 + qb t + qc, cancellation-free
        if qb >= 0:
            t = (-qb - root) / (2.0 * qa)
        else:
            t = (2.0 * qc) / (-qb + root) if (-qb + root) != 0 else 0.0
    elif qb != 0:
        t = -qc / qb
    else:
        raise InfeasibleError("constraint is constant along the null direction")
    return y_p + t * v


@dataclass
class GtrsSolution:
    y_star: np.ndarray
    lambda_star: float
    path: Literal["regular", "hard_case"]
    lambda_lower: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.diagnostics["objective"]


def _sturm_scaled(T: Polynomial, scale: float) -> ps.SturmSequence:
    # Sturm chain of T(scale * mu): keeps coefficients within a sane range.
    coef = T.coef * scale ** np.arange(T.coef.size)
    return ps.sturm_sequence(Polynomial(coef))


def solve_bias_eli(inst: GtrsInstance) -> GtrsSolution:
    """Global minimizer of the equality-constrained problem."""
    diag = ps.simdiag(inst.AtA, inst.D)
    lam_l = diag.lambda_lower
    form = _DiagonalForm(inst, diag)
    T = build_T(inst, diag)
    scale = 1.0 + abs(lam_l)
    lo = lam_l + BOUNDARY_EPS * scale
    warnings_: list[str] = []

    if T.trim().degree() >= 1:
        hi = 1.0 + ps.cauchy_bound(T)
        hi = max(hi, lo + scale)
        count = ps.sturm_count(_sturm_scaled(T, scale), lo / scale, hi / scale)
    else:
        hi = lo + scale
        count = 0

    c_lo = form.c(lo)
    regular = count >= 1
    if count >= 2:
        warnings_.append(f"sturm count {count} > 1")
    if regular and not c_lo > 0:
        warnings_.append("sturm reported a root but c has no sign change; using boundary solution")
        regular = False
    elif not regular and c_lo > 0:
        warnings_.append("sturm reported no root but c changes sign; bisecting")
        regular = True
    for w in warnings_:
        log.warning(w)

    diagnostics: dict = {"sturm_count": count, "warnings": warnings_, "T_degree": T.degree()}
    if regular:
        c_hi = form.c(hi)
        while c_hi >= 0:
            hi = hi + 2.0 * (hi - lam_l)
            c_hi = form.c(hi)
        lam, info = ps.bisect_root(form.c, lo, hi, full_output=True, f_lo=c_lo, f_hi=c_hi)
        y = form.y(lam)
        path = "regular"
        diagnostics["bisection_iterations"] = info.iterations
        diagnostics["c_residual"] = info.residual
    else:
        lam = lam_l
        v = diag.R[:, diag.null_index]
        v = v * np.sign(v[np.argmax(np.abs(v))])
        y = solve_hard_case(inst, lam_l, v)
        path = "hard_case"
        diagnostics["bisection_iterations"] = 0

    diagnostics["objective"] = inst.objective(y)
    diagnostics["constraint_residual"] = inst.constraint(y)
    return GtrsSolution(y, float(lam), path, float(lam_l), diagnostics)


def kkt_residuals(inst: GtrsInstance, sol: GtrsSolution) -> dict:
    """Relative residuals of the three global-optimality conditions."""
    y, lam = sol.y_star, sol.lambda_star
    H = inst.AtA + lam * inst.D
    rhs = inst.Atb - lam * inst.g
    normH = np.linalg.norm(inst.AtA, 2)
    stationarity = np.linalg.norm(H @ y - rhs) / (
        np.linalg.norm(rhs) + np.linalg.norm(H, 2) * np.linalg.norm(y) + 1e-300
    )
    return {
        "stationarity": float(stationarity),
        "constraint": abs(inst.constraint(y)) / (1.0 + float(y @ y)),
        "psd": float(min(np.linalg.eigvalsh(H)[0] / normH, 0.0)),
    }
