"""Cotangent Laplace-Beltrami operator and its first nonzero eigenvalue."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg, sparse
from scipy.sparse.linalg import splu

logger = logging.getLogger(__name__)

#: Ritz values within this relative distance of lambda1 count as one cluster.
CLUSTER_RTOL = 0.05


class SpectralConvergenceError(RuntimeError):
    """Iteration budget exhausted; ``result`` holds the last iterate."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True, eq=False)
class SpectralResult:
    lambda1: float
    eigenvector: np.ndarray
    residual: float
    iterations: int
    cluster_width: float
    cluster_size: int
    ritz_values: np.ndarray

    def to_dict(self):
        return {
            "lambda1": self.lambda1,
            "residual": self.residual,
            "iterations": self.iterations,
            "cluster_width": self.cluster_width,
        }


def cotangent_weights(mesh):
    """Per-face cotangents of the angle opposite each edge ``(k+1, k+2)``."""
    v, f = mesh.vertices, mesh.faces
    cot = np.empty(f.shape)
    for k in range(3):
        p = v[f[:, k]]
        a = v[f[:, (k + 1) % 3]] - p
        b = v[f[:, (k + 2) % 3]] - p
        cot[:, k] = np.sum(a * b, axis=1) / np.linalg.norm(np.cross(a, b), axis=1)
    return cot


def stiffness_matrix(mesh):
    """Symmetric positive semidefinite cotangent stiffness matrix (CSR).

    Off-diagonal ``L_ij = -(cot alpha_ij + cot beta_ij) / 2``; the diagonal
    is minus the off-diagonal row sum, so constants are in the kernel.
    """
    f = mesh.faces
    cot = cotangent_weights(mesh)
    i = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    j = np.concatenate([f[:, 2], f[:, 0], f[:, 1]])
    w = -0.5 * np.concatenate([cot[:, 0], cot[:, 1], cot[:, 2]])
    n = mesh.n_vertices
    off = sparse.coo_matrix((np.r_[w, w], (np.r_[i, j], np.r_[j, i])), shape=(n, n)).tocsr()
    off.sum_duplicates()
    L = off - sparse.diags(np.asarray(off.sum(axis=1)).ravel())
    return L.tocsr()


def mass_matrix(mesh):
    """Diagonal lumped mass matrix of barycentric vertex areas."""
    return sparse.diags(mesh.vertex_areas).tocsr()


def _mass_diag(mass):
    return np.asarray(mass.diagonal() if sparse.issparse(mass) else np.diag(mass), dtype=float)


def first_eigenvalue(stiffness, mass, tol=1e-10, max_iter=500, block=8, seed=0):
    """Smallest nonzero eigenvalue of ``stiffness u = lambda mass u``.

    Block inverse iteration with Rayleigh-Ritz. The constant mode is
    deflated explicitly: iterates are mass-orthogonalised against constants
    and every solve uses the bordered system

        [[stiffness, mass 1], [(mass 1)^T, 0]] [x, mu] = [mass y, 0],

    which is nonsingular and returns the mass-orthogonal solution, so no
    shift is needed. Convergence requires a relative eigenvalue change
    below ``tol`` and a residual ``|L u - lambda M u|_{M^-1} < tol * lambda``
    for a mass-normalised ``u``.

    Returns
    -------
    SpectralResult
        ``lambda1`` equals the generalized Rayleigh quotient of
        ``eigenvector``.

    Raises
    ------
    SpectralConvergenceError
        When ``max_iter`` is exhausted; the exception carries the last iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    L = sparse.csr_matrix(stiffness)
    m = _mass_diag(mass)
    n = len(m)
    block = max(1, min(block, n - 2))
    total = m.sum()

    bordered = sparse.bmat(
        [[L, sparse.csr_matrix(m[:, None])], [sparse.csr_matrix(m[None, :]), None]],
        format="csc",
    )
    lu = splu(bordered)

    def deflate(X):
        return X - np.outer(np.ones(n), (m @ X) / total)

    def solve(Y):
        rhs = np.vstack([m[:, None] * Y, np.zeros((1, Y.shape[1]))])
        return lu.solve(rhs)[:n]

    rng = np.random.default_rng(seed)
    X = deflate(rng.standard_normal((n, block)))
    prev = np.inf
    lam = np.inf
    res = np.inf
    it = 0
    theta = np.full(block, np.nan)
    u = X[:, 0]
    for it in range(1, max_iter + 1):
        X = deflate(solve(X))
        # mass-orthonormal basis, then Rayleigh-Ritz
        Q, _ = np.linalg.qr(np.sqrt(m)[:, None] * X)
        X = Q / np.sqrt(m)[:, None]
        G = X.T @ (L @ X)
        G = 0.5 * (G + G.T)
        theta, W = linalg.eigh(G)
        X = X @ W
        u = X[:, 0]
        Lu = L @ u
        lam = float(u @ Lu) / float(u @ (m * u))
        r = Lu - lam * m * u
        res = float(np.sqrt(r @ (r / m)) / np.sqrt(u @ (m * u)))
        if abs(lam - prev) < tol * abs(lam) and res < tol * abs(lam):
            break
        prev = lam
    else:
        result = _result(lam, u, m, res, it, theta)
        raise SpectralConvergenceError(
            f"no convergence in {max_iter} iterations (lambda1={lam:.6g}, residual={res:.3g})",
            result,
        )
    result = _result(lam, u, m, res, it, theta)
    if result.cluster_size > 1:
        logger.info(
            "lambda1=%.9g is a cluster of %d Ritz values (width %.3g)",
            result.lambda1, result.cluster_size, result.cluster_width,
        )
    return result


def _result(lam, u, m, res, it, theta):
    u = u / np.sqrt(u @ (m * u))
    if u[np.argmax(np.abs(u))] < 0:
        u = -u
    cluster = theta[np.abs(theta - lam) <= CLUSTER_RTOL * abs(lam)]
    width = float(cluster.max() - cluster.min()) if len(cluster) else 0.0
    return SpectralResult(
        lambda1=float(lam),
        eigenvector=u,
        residual=float(res),
        iterations=int(it),
        cluster_width=width,
        cluster_size=int(len(cluster)),
        ritz_values=np.array(theta),
    )


def rayleigh_quotient(stiffness, mass, u):
    m = _mass_diag(mass)
    return float(u @ (stiffness @ u)) / float(u @ (m * u))


def laplace_spectrum(mesh, tol=1e-10, max_iter=500, seed=0):
    """Assemble both matrices and solve for the first nonzero eigenvalue."""
    return first_eigenvalue(stiffness_matrix(mesh), mass_matrix(mesh), tol, max_iter, seed=seed)
