"""Instance generators shared by the unit and acceptance tests."""

import numpy as np

from rangeloc import polyspectral as ps
from rangeloc.gtrs import GtrsInstance
from rangeloc.model import lift_matrices


def hard_case_instance(rng, n=2, m=6, extra=True):
    """Instance whose constraint function stays negative on the whole interval.

    In the simultaneously diagonal coordinates the right-hand side is
    chosen so that the component along the null vector of the pencil at
    lambda_l vanishes; c(lambda) then has no pole at lambda_l and is
    negative there, so no root lies to its right.
    """
    D, g = lift_matrices(n)
    A = np.hstack([rng.normal(size=(m, n)), np.ones((m, 1))])
    AtA = A.T @ A
    diag = ps.simdiag(AtA, D)
    lam_l = diag.lambda_lower
    Rg = diag.R.T @ g
    w = np.zeros(n + 1)
    j = int(np.flatnonzero(diag.delta == 0)[0])
    w[j] = -np.sign(Rg[j]) * rng.uniform(0.5, 2.0)
    h = np.linalg.solve(diag.R.T, w) + lam_l * g
    b = A @ np.linalg.solve(AtA, h)
    if extra:
        Q, _ = np.linalg.qr(A, mode="complete")
        b = b + Q[:, n + 1:] @ rng.normal(size=m - n - 1)
    return GtrsInstance.from_arrays(A, b, D, g), A, b


def random_2d_instance(rng, sigma2=1.0):
    """Four sensors in [0, 2]^2, target inside the box, one noisy range each."""
    sensors = rng.uniform(0, 2, size=(4, 2))
    target = rng.uniform(0, 2, size=2)
    d = np.linalg.norm(sensors - target, axis=1) + np.sqrt(sigma2) * rng.normal(size=4)
    A = np.hstack([-2 * sensors, np.ones((4, 1))])
    b = d**2 - np.sum(sensors**2, axis=1) - sigma2
    D, g = lift_matrices(2)
    return GtrsInstance.from_arrays(A, b, D, g), sensors, A, b


def grid_oracle(A, b, lo, hi, step=1e-3, chunk=400):
    """Exhaustive search of ||A [x; ||x||^2] - b||^2 over a 2-D grid, then polish."""
    from scipy.optimize import minimize

    xs = np.arange(lo[0], hi[0] + step / 2, step)
    ys = np.arange(lo[1], hi[1] + step / 2, step)
    best, arg = np.inf, None
    for start in range(0, xs.size, chunk):
        X, Y = np.meshgrid(xs[start:start + chunk], ys, indexing="ij")
        S = X * X + Y * Y
        r = A[:, 0, None, None] * X + A[:, 1, None, None] * Y + A[:, 2, None, None] * S - b[:, None, None]
        f = np.einsum("kij,kij->ij", r, r)
        k = np.unravel_index(np.argmin(f), f.shape)
        if f[k] < best:
            best, arg = f[k], np.array([X[k], Y[k]])

    def obj(x):
        r = A @ np.r_[x, x @ x] - b
        return r @ r

    res = minimize(obj, arg, method="BFGS", options={"gtol": 1e-12})
    return min(best, res.fun)


def random_polynomial(rng, degree):
    """Separated real roots in [-3, 3] times irreducible quadratics; returns (p, real roots)."""
    from numpy.polynomial import Polynomial

    n_real = degree - 2 * int(rng.integers(0, degree // 2 + 1))
    roots = np.sort(rng.uniform(-3, 3, n_real))
    while n_real > 1 and np.min(np.diff(roots)) < 0.05:
        roots = np.sort(rng.uniform(-3, 3, n_real))
    p = Polynomial.fromroots(roots) if n_real else Polynomial([1.0])
    for _ in range((degree - n_real) // 2):
        c, s = rng.uniform(-3, 3), rng.uniform(0.2, 2.0)
        p = p * Polynomial([c * c + s * s, -2 * c, 1.0])
    return p * rng.uniform(0.5, 2.0) * rng.choice([-1, 1]), roots
