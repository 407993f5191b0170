"""Per-vertex extrinsic curvature and the Gauss-equation intrinsic quantities.

Sign convention: curvatures are positive on spheres with outward normals
(``H = 1/R``), i.e. the shape operator is ``-d nu`` measured against the
inward bending of the surface.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .mesh import MeshError, vertex_frames

logger = logging.getLogger(__name__)

#: Maximal fraction of vertices whose quadric fit may fail before giving up.
MAX_FLAGGED_FRACTION = 0.01
MIN_NEIGHBORS = 5


class CurvatureError(MeshError):
    """Too many vertices could not be fitted."""

    def __init__(self, message, vertices=()):
        super().__init__(message)
        self.vertices = tuple(int(v) for v in vertices)


def two_ring(mesh):
    """Sorted 2-ring neighbour indices (excluding the vertex itself) per vertex."""
    adj = mesh.adjacency
    reach = (adj + adj @ adj).tocsr()
    reach.setdiag(0)
    reach.eliminate_zeros()
    reach.sort_indices()
    return [reach.indices[reach.indptr[i] : reach.indptr[i + 1]] for i in range(mesh.n_vertices)]


def estimate_shape_operator(mesh, frames=None, return_flags=False):
    """Least-squares osculating-quadric shape operator at every vertex.

    Over the 2-ring of each vertex, heights along the vertex normal are fit
    by ``z = (a x^2 + 2 b x y + c y^2) / 2 + d x + e y`` in the tangent frame.
    The linear terms absorb normal tilt and are discarded; the shape
    operator is ``-[[a, b], [b, c]]``. Rows carry Gaussian weights
    ``exp(-rho^2 / mean(rho^2))`` in the tangent distance ``rho`` so that
    far neighbours on stretched grids do not feed quartic terms into the
    quadratic coefficients.

    Vertices with fewer than five neighbours or a rank-deficient design
    matrix are flagged and filled with the 1-ring average of successfully
    fitted neighbours (averaged as ambient tensors, then projected).

    Returns
    -------
    ndarray, shape (N, 2, 2)
        Symmetric operators in the tangent bases of ``frames``. With
        ``return_flags`` the array of flagged vertex indices is returned too.

    Raises
    ------
    CurvatureError
        If more than 1% of vertices are flagged, or a flagged vertex has
        no fitted neighbour to borrow from.
    """
    if frames is None:
        frames = vertex_frames(mesh)
    v = mesh.vertices
    normals, tangents = frames.normals, frames.tangents
    S = np.zeros((mesh.n_vertices, 2, 2))
    ok = np.ones(mesh.n_vertices, dtype=bool)
    for i, nbr in enumerate(two_ring(mesh)):
        if len(nbr) < MIN_NEIGHBORS:
            ok[i] = False
            continue
        d = v[nbr] - v[i]
        x = d @ tangents[i, 0]
        y = d @ tangents[i, 1]
        z = d @ normals[i]
        rho2 = x * x + y * y
        w = np.exp(-rho2 / rho2.mean())
        A = np.column_stack([0.5 * x * x, x * y, 0.5 * y * y, x, y]) * w[:, None]
        coef, _, rank, sv = np.linalg.lstsq(A, z * w, rcond=None)
        if rank < 5 or sv[-1] <= 1e-10 * sv[0]:
            ok[i] = False
            continue
        a, b, c = coef[:3]
        S[i] = [[-a, -b], [-b, -c]]

    flagged = np.flatnonzero(~ok)
    if len(flagged) > MAX_FLAGGED_FRACTION * mesh.n_vertices:
        raise CurvatureError(
            f"quadric fit failed at {len(flagged)} of {mesh.n_vertices} vertices "
            f"(first: {flagged[0]})",
            flagged,
        )
    if len(flagged):
        logger.warning("quadric fit failed at %d vertices, using 1-ring averages", len(flagged))
        adj = mesh.adjacency
        ambient = np.einsum("nai,nab,nbj->nij", tangents, S, tangents)
        for i in flagged:
            nbr = [j for j in adj.indices[adj.indptr[i] : adj.indptr[i + 1]] if ok[j]]
            if not nbr:
                raise CurvatureError(f"vertex {i} and all its neighbours failed to fit", [i])
            T = ambient[nbr].mean(axis=0)
            S[i] = tangents[i] @ T @ tangents[i].T
    S = 0.5 * (S + np.swapaxes(S, 1, 2))
    return (S, flagged) if return_flags else S


def symmetric_polynomial(values, r):
    """Elementary symmetric polynomial ``sigma_r(values)``; ``sigma_0 = 1``."""
    values = list(values)
    n = len(values)
    if not 0 <= r <= n:
        raise ValueError(f"order r={r} outside 0..{n}")
    e = [1.0] + [0.0] * n
    for x in values:
        for k in range(n, 0, -1):
            e[k] += x * e[k - 1]
    return e[r]


def higher_mean_curvatures(kappa):
    """Normalised mean curvatures ``H_r = sigma_r / C(n, r)`` for ``r = 0..n``.

    ``kappa`` has shape (n,) or (N, n); the result has a trailing axis of
    length n + 1.
    """
    k = np.asarray(kappa, dtype=float)
    n = k.shape[-1]
    e = np.zeros(k.shape[:-1] + (n + 1,))
    e[..., 0] = 1.0
    for j in range(n):
        x = k[..., j]
        for r in range(j + 1, 0, -1):
            e[..., r] = e[..., r] + x * e[..., r - 1]
    return e / np.array([math.comb(n, r) for r in range(n + 1)], dtype=float)


def ricci_from_gauss(S, H, n=2):
    """Ricci operator ``n H S - S^2`` of a hypersurface of Euclidean space."""
    S = np.asarray(S, dtype=float)
    H = np.asarray(H, dtype=float)
    return n * H[..., None, None] * S - S @ S


def umbilicity_tensor(S, H):
    """Trace-free part ``S - H Id``."""
    S = np.asarray(S, dtype=float)
    H = np.asarray(H, dtype=float)
    return S - H[..., None, None] * np.eye(S.shape[-1])


def tensor_norm(T):
    """Frobenius norm over the last two axes."""
    return np.sqrt(np.einsum("...ij,...ij->...", T, T))


def operator_norm(T):
    """Largest absolute eigenvalue of symmetric operators."""
    return np.abs(np.linalg.eigvalsh(T)).max(axis=-1)


def corner_angles(mesh):
    v, f = mesh.vertices, mesh.faces
    ang = np.empty(f.shape)
    for k in range(3):
        p = v[f[:, k]]
        a = v[f[:, (k + 1) % 3]] - p
        b = v[f[:, (k + 2) % 3]] - p
        ang[:, k] = np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.sum(a * b, axis=1))
    return ang


def angle_defect(mesh):
    """Per-vertex angle defect ``2 pi - sum of incident corner angles``."""
    total = np.zeros(mesh.n_vertices)
    ang = corner_angles(mesh)
    for k in range(3):
        np.add.at(total, mesh.faces[:, k], ang[:, k])
    return 2.0 * math.pi - total


def angle_defect_gauss(mesh):
    """Gaussian curvature density: angle defect divided by the lumped vertex area."""
    return angle_defect(mesh) / mesh.vertex_areas


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """Full curvature stack at every vertex of an n = 2 mesh.

    Tensor fields are (N, 2, 2) arrays in the per-vertex tangent bases.
    ``kappa`` is sorted descending; ``Hr[:, r]`` holds ``H_r``.
    """

    shape_operator: np.ndarray
    kappa: np.ndarray
    Hr: np.ndarray
    scal: np.ndarray
    ricci: np.ndarray
    tau: np.ndarray
    k_defect: np.ndarray
    flagged: np.ndarray
    n: int = 2

    @property
    def H(self):
        return self.Hr[:, 1]

    @property
    def H2(self):
        return self.Hr[:, 2]

    @property
    def tau_norm(self):
        return tensor_norm(self.tau)

    def __len__(self):
        return len(self.kappa)

    def records(self):
        """Per-vertex JSON records."""
        tn = self.tau_norm
        return [
            {
                "kappa": [float(self.kappa[i, 0]), float(self.kappa[i, 1])],
                "H": float(self.H[i]),
                "H2": float(self.H2[i]),
                "scal": float(self.scal[i]),
                "tau_norm": float(tn[i]),
                "K_defect": float(self.k_defect[i]),
            }
            for i in range(len(self))
        ]


def curvature_field(mesh, frames=None):
    """Estimate the full curvature stack on a closed surface mesh."""
    if frames is None:
        frames = mesh.frames
    n = 2
    S, flagged = estimate_shape_operator(mesh, frames, return_flags=True)
    kappa = np.linalg.eigvalsh(S)[:, ::-1]
    Hr = higher_mean_curvatures(kappa)
    # H is the normalised trace so that tau below is trace-free to roundoff
    Hr[:, 1] = np.trace(S, axis1=1, axis2=2) / n
    scal = n * (n - 1) * Hr[:, 2]
    return CurvatureField(
        shape_operator=S,
        kappa=kappa,
        Hr=Hr,
        scal=scal,
        ricci=ricci_from_gauss(S, Hr[:, 1], n),
        tau=umbilicity_tensor(S, Hr[:, 1]),
        k_defect=angle_defect_gauss(mesh),
        flagged=flagged,
        n=n,
    )
