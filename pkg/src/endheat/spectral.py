"""Poincare constants of balls in a star mesh as inverse Neumann spectral gaps."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import ConstantInputError, EigenError
from .mesh_solver import StarMesh

EIGEN_TOL = 1e-10
MAX_ITER = 500
# ||L f + lambda f||_m for ||f||_m = 1
RESIDUAL_TOL = 1e-8
BLOCK = 4


@dataclass
class SpectralResult:
    """Smallest nonzero eigenvalue of ``-L`` on a ball with reflecting rim.

    ``eigenvector`` is a full-mesh array (zero outside the ball) and
    ``nodes`` lists the ball's node indices.
    """

    radius: float
    lambda1: float
    poincare: float
    eigenvector: np.ndarray
    nodes: np.ndarray
    iterations: int
    residual: float


def ball_mask(mesh: StarMesh, r: float, center: int = 0) -> np.ndarray:
    """Nodes within star distance ``r`` of node ``center`` (the center sits at radius 0)."""
    rad = mesh.radius
    if center == 0:
        dist = rad.copy()
    else:
        rc = rad[center]
        same = mesh.end_of == mesh.end_of[center]
        dist = np.where(same, np.abs(rad - rc), rad + rc)
        dist[0] = rc
    return dist <= r * (1.0 + 1e-12)


def _gap(K: sparse.spmatrix, m: np.ndarray, ground: int, tol: float = EIGEN_TOL, max_iter: int = MAX_ITER, seed: int = 0):
    """Block inverse iteration for the least nonzero ``lambda`` of ``K f = lambda M f``.

    ``K`` is singular on constants; solving with row/column ``ground`` removed
    gives a solution of ``K x = b`` whenever ``b`` sums to zero, which is
    then projected off constants in the mass inner product.  A small block
    with Rayleigh-Ritz handles the near-degenerate odd/even modes of
    symmetric stars.
    """
    n = len(m)
    if n < 2:
        raise EigenError("ball contains fewer than two nodes")
    keep = np.setdiff1d(np.arange(n), [ground])
    K = sparse.csc_matrix(K)
    lu = splinalg.splu(K[keep][:, keep])
    total = m.sum()
    p = min(BLOCK, n - 1)

    def project(X):
        return X - np.outer(np.ones(n), m @ X) / total

    rng = np.random.default_rng(seed)
    X = project(rng.standard_normal((n, p)))
    lam_old = np.inf
    for it in range(1, max_iter + 1):
        B = m[:, None] * X
        Y = np.zeros((n, p))
        Y[keep] = lu.solve(B[keep])
        Y = project(Y)
        # M-orthonormalize, then Rayleigh-Ritz on the block
        sq = np.sqrt(m)[:, None]
        Q0, _ = np.linalg.qr(sq * Y)
        Y = project(Q0 / sq)
        H = Y.T @ (K @ Y)
        theta, Q = np.linalg.eigh(0.5 * (H + H.T))
        X = Y @ Q
        lam = float(theta[0])
        f = X[:, 0]
        if abs(lam - lam_old) <= tol * lam:
            res = K @ f - lam * m * f
            resid = float(np.sqrt(np.dot(res * res, 1.0 / m)))
            if resid <= RESIDUAL_TOL:
                return lam, f / np.sqrt(np.dot(m, f * f)), it, resid
        lam_old = lam
    raise EigenError(f"inverse iteration did not converge in {max_iter} iterations")


def _solve_ball(mesh: StarMesh, mask: np.ndarray, ground_full: int, r: float) -> SpectralResult:
    K, m, idx = mesh.restrict(mask)
    ground = int(np.searchsorted(idx, ground_full))
    lam, f, it, resid = _gap(K, m, ground)
    full = np.zeros(mesh.n_nodes)
    full[idx] = f
    return SpectralResult(float(r), lam, 1.0 / lam, full, idx, it, resid)


def poincare_constant(mesh: StarMesh, r: float) -> SpectralResult:
    """``Lambda(B(o, r))`` with the ball's outer cells cut at its last node."""
    if r > mesh.r_max * (1.0 + 1e-12):
        raise ValueError("r exceeds the mesh radius")
    return _solve_ball(mesh, ball_mask(mesh, r), 0, r)


def rayleigh_quotient(mesh: StarMesh, f, r: float, center: int = 0) -> float:
    """Variance of ``f`` over ``B(center, r)`` divided by its Dirichlet energy there."""
    f = np.asarray(f, dtype=float)
    mask = ball_mask(mesh, r, center)
    K, m, idx = mesh.restrict(mask)
    g = f[idx]
    g = g - np.dot(m, g) / m.sum()
    energy = float(g @ (K @ g))
    if energy <= 0.0:
        raise ConstantInputError("f is constant on the ball")
    return float(np.dot(m, g * g)) / energy


def signed_end_function(mesh: StarMesh, signs=None) -> np.ndarray:
    """``+-1`` on whole ends and ``0`` at the center.

    The only non-constant edges are those leaving the center, which is the
    one-cell linear smoothing of the discontinuous ``+-1`` function.
    """
    k = len(mesh.ends)
    if signs is None:
        signs = [1.0 if i % 2 == 0 else -1.0 for i in range(k)]
    if len(signs) != k:
        raise ValueError("one sign per end")
    f = np.zeros(mesh.n_nodes)
    for sl, s in zip(mesh.ends, signs):
        f[sl] = s
    return f


def whitney_shift_check(mesh: StarMesh, x: int, r: float) -> float:
    """``Lambda(B(x, r)) / Lambda(B(o, r))`` for ``r > 2|x|``."""
    rx = 0.0 if x == 0 else float(mesh.radius[x])
    if not r > 2.0 * rx:
        raise ValueError("need r > 2|x|")
    if x == 0:
        return 1.0
    shifted = _solve_ball(mesh, ball_mask(mesh, r, x), x, r)
    base = poincare_constant(mesh, r)
    return shifted.poincare / base.poincare
