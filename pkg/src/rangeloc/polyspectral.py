"""Sturm chains, root bounds, bisection and the (A'A, D) pencil.

Polynomials are :class:`numpy.polynomial.Polynomial` objects (ascending
coefficients); the routines here never rely on numpy's own root finder.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg import solve_triangular

from .errors import BracketingError, ConfigurationError, RankDeficiencyError

FLUSH = 1e-13
DELTA_CLAMP = 1e-12


def as_polynomial(p) -> Polynomial:
    """Coerce coefficients (ascending) or a Polynomial, trailing zeros trimmed."""
    if not isinstance(p, Polynomial):
        p = Polynomial(np.asarray(p, dtype=float))
    return p.trim()


def _is_zero(p: Polynomial) -> bool:
    return p.degree() == 0 and p.coef[0] == 0


def _normalized(p: Polynomial) -> Polynomial:
    # power-of-two scaling is exact, so roots stay roots
    scale = np.max(np.abs(p.coef))
    return p if scale == 0 else Polynomial(np.ldexp(p.coef, -np.frexp(scale)[1]))


def _flush(coef: np.ndarray, ref: float) -> np.ndarray:
    coef = np.where(np.abs(coef) < FLUSH * ref, 0.0, coef)
    return np.trim_zeros(coef, "b") if np.any(coef) else np.zeros(1)


@dataclass(frozen=True)
class SturmSequence:
    chain: tuple[Polynomial, ...]

    def variations(self, x: float) -> int:
        """Sign changes of the chain at ``x`` (``x`` may be +-inf)."""
        if math.isinf(x):
            vals = [
                math.copysign(1.0, p.coef[-1]) * (1 if x > 0 or p.degree() % 2 == 0 else -1)
                for p in self.chain
            ]
        else:
            vals = [p(x) for p in self.chain]
        signs = [v > 0 for v in vals if v != 0]
        return sum(s != t for s, t in zip(signs, signs[1:]))


def sturm_sequence(p) -> SturmSequence:
    """Sturm chain of ``p``, divided through by gcd(p, p') for repeated roots.

    Every element is rescaled by a power of two (max coefficient in [1/2, 1))
    and remainder coefficients below 1e-13 are flushed to zero.
    """
    p = as_polynomial(p)
    if _is_zero(p):
        raise ConfigurationError("Sturm chain of the zero polynomial")
    chain = [_normalized(p)]
    if p.degree() == 0:
        return SturmSequence(tuple(chain))
    chain.append(_normalized(p.deriv()))
    while chain[-1].degree() > 0:
        _, rem = divmod(chain[-2], chain[-1])
        coef = _flush(rem.coef, 1.0)
        if not np.any(coef):
            break
        chain.append(_normalized(Polynomial(-coef)))
    gcd = chain[-1]
    if gcd.degree() > 0:
        reduced = []
        for q in chain:
            quo, _ = divmod(q, gcd)
            reduced.append(_normalized(Polynomial(_flush(quo.coef, np.max(np.abs(quo.coef))))))
        chain = reduced
    return SturmSequence(tuple(chain))


def sturm_count(p, lo: float, hi: float) -> int:
    """Number of distinct real roots of ``p`` in ``(lo, hi]``."""
    if not lo < hi:
        raise ConfigurationError(f"invalid interval ({lo}, {hi}]")
    seq = p if isinstance(p, SturmSequence) else sturm_sequence(p)
    return seq.variations(lo) - seq.variations(hi)


def cauchy_bound(p) -> float:
    """``1 + max_i |c_i| / |c_deg|``; all real roots lie in [-bound, bound]."""
    p = as_polynomial(p)
    if p.degree() < 1:
        raise ConfigurationError("Cauchy bound needs degree >= 1")
    c = p.coef
    return 1.0 + float(np.max(np.abs(c[:-1])) / abs(c[-1]))


@dataclass(frozen=True)
class BisectionInfo:
    root: float
    residual: float
    iterations: int
    converged: bool
    width: float


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-12,
    maxiter: int = 200,
    full_output: bool = False,
    f_lo: float | None = None,
    f_hi: float | None = None,
):
    """Bisection on a bracket with a sign change.

    Stops once the bracket width is below ``tol * max(1, |lo|, |hi|)`` of the
    current bracket; after ``maxiter`` halvings the midpoint is returned with
    a warning.
    """
    f_lo = f(lo) if f_lo is None else f_lo
    f_hi = f(hi) if f_hi is None else f_hi
    if f_lo == 0:
        info = BisectionInfo(lo, 0.0, 0, True, hi - lo)
        return (lo, info) if full_output else lo
    if f_hi == 0:
        info = BisectionInfo(hi, 0.0, 0, True, hi - lo)
        return (hi, info) if full_output else hi
    if np.sign(f_lo) == np.sign(f_hi) or not (np.isfinite(f_lo) and np.isfinite(f_hi)):
        raise BracketingError(f"no sign change on [{lo}, {hi}]: f={f_lo}, {f_hi}")
    lo_positive = f_lo > 0
    it = 0
    converged = False
    while it < maxiter:
        if hi - lo <= tol * max(1.0, abs(lo), abs(hi)):
            converged = True
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            converged = True
            break
        fm = f(mid)
        it += 1
        if fm == 0:
            lo = hi = mid
            converged = True
            break
        if (fm > 0) == lo_positive:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if not converged:
        warnings.warn(f"bisection hit {maxiter} iterations, width {hi - lo:g}", RuntimeWarning)
    if full_output:
        return root, BisectionInfo(root, abs(f(root)), it, converged, hi - lo)
    return root


def _cholesky(AtA: np.ndarray) -> np.ndarray:
    AtA = np.asarray(AtA, dtype=float)
    try:
        return np.linalg.cholesky(AtA)
    except np.linalg.LinAlgError as exc:
        raise RankDeficiencyError("A'A is not positive definite") from exc


def _whitened(AtA: np.ndarray, D: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    L = _cholesky(AtA)
    Li_D = solve_triangular(L, np.asarray(D, dtype=float), lower=True)
    M = solve_triangular(L, Li_D.T, lower=True)
    return L, 0.5 * (M + M.T)


def lambda_lower(AtA, D) -> float:
    """Smallest multiplier keeping ``A'A + lambda D`` positive semidefinite.

    Equals ``-1/theta`` with theta the top eigenvalue of ``L^-1 D L^-T``;
    ``-inf`` when that eigenvalue is not positive.
    """
    _, M = _whitened(AtA, D)
    theta = np.linalg.eigvalsh(M)[-1]
    if theta <= 0:
        return -math.inf
    return -1.0 / theta


@dataclass(frozen=True)
class Diagonalization:
    """``R' (A'A) R = diag(gamma)`` and ``R' D R = diag(delta)``."""

    R: np.ndarray
    gamma: np.ndarray
    delta: np.ndarray

    @property
    def lambda_lower(self) -> float:
        top = float(np.max((self.delta / self.gamma)))
        return -1.0 / top if top > 0 else -math.inf

    @property
    def null_index(self) -> int:
        """Column of R spanning the null space of the pencil at lambda_lower."""
        return int(np.argmax(self.delta / self.gamma))

    def residuals(self, AtA, D) -> tuple[float, float]:
        """Relative Frobenius off-diagonal residuals of both congruences."""
        out = []
        for M, d in ((AtA, self.gamma), (D, self.delta)):
            C = self.R.T @ np.asarray(M) @ self.R
            scale = max(np.linalg.norm(self.R, 2) ** 2 * np.linalg.norm(M, 2), 1e-300)
            out.append(float(np.linalg.norm(C - np.diag(d)) / scale))
        return out[0], out[1]


def simdiag(AtA, D) -> Diagonalization:
    """Simultaneous diagonalization with ``R = L^-T Q`` so that gamma = 1.

    Columns are ordered by decreasing delta.
    """
    L, M = _whitened(AtA, D)
    theta, Q = np.linalg.eigh(M)
    theta, Q = theta[::-1], Q[:, ::-1]
    theta = np.where(np.abs(theta) < DELTA_CLAMP, 0.0, theta)
    if np.any(theta < 0):
        raise ConfigurationError("D must be positive semidefinite")
    R = solve_triangular(L.T, Q, lower=False)
    return Diagonalization(R, np.ones(theta.size), theta)


def polynomial_from_roots(roots: Sequence[float], lead: float = 1.0) -> Polynomial:
    return Polynomial.fromroots(roots) * lead
