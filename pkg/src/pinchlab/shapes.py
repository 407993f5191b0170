"""Analytic test surfaces and their closed-form curvatures."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from .mesh import Mesh

DEFAULT_MAX_VERTICES = 1_000_000


class ShapeError(ValueError):
    """Invalid shape parameters, descriptor or resolution."""


def max_vertices():
    env = os.environ.get("PINCHLAB_MAX_VERTICES")
    return int(env) if env else DEFAULT_MAX_VERTICES


@dataclass(frozen=True)
class Sphere:
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise ShapeError(f"sphere radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class Ellipsoid:
    a: float = 1.0
    b: float = 1.0
    c: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.c > 0):
            raise ShapeError(f"ellipsoid semi-axes must be positive, got {(self.a, self.b, self.c)}")


@dataclass(frozen=True)
class Torus:
    major: float = 2.0
    minor: float = 0.5

    def __post_init__(self):
        if not (self.major > self.minor > 0):
            raise ShapeError(
                f"torus needs major > minor > 0, got major={self.major}, minor={self.minor}"
            )


@dataclass(frozen=True)
class PerturbedSphere:
    """Sphere with radial perturbation ``R (1 + delta * Y_lm / max|Y_lm|)``."""

    delta: float = 0.0
    l: int = 3  # noqa: E741
    m: int = 2
    radius: float = 1.0

    def __post_init__(self):
        if not 0 <= self.delta < 1:
            raise ShapeError(f"perturbation amplitude must lie in [0, 1), got {self.delta}")
        if not self.radius > 0:
            raise ShapeError(f"sphere radius must be positive, got {self.radius}")
        if self.l < 0 or abs(self.m) > self.l:
            raise ShapeError(f"invalid harmonic mode (l={self.l}, m={self.m})")


SHAPE_KINDS = {
    "sphere": Sphere,
    "ellipsoid": Ellipsoid,
    "torus": Torus,
    "perturbed_sphere": PerturbedSphere,
}
_KIND_OF = {cls: kind for kind, cls in SHAPE_KINDS.items()}


def to_descriptor(shape, resolution):
    """JSON-ready ``{kind, params, resolution}`` record."""
    return {"kind": _KIND_OF[type(shape)], "params": asdict(shape), "resolution": int(resolution)}


def from_descriptor(desc):
    """Inverse of :func:`to_descriptor`; returns ``(shape, resolution)``."""
    try:
        cls = SHAPE_KINDS[desc["kind"]]
    except KeyError as exc:
        raise ShapeError(f"unknown or missing shape kind in {desc!r}") from exc
    try:
        shape = cls(**desc.get("params", {}))
    except TypeError as exc:
        raise ShapeError(f"bad parameters for {desc['kind']}: {exc}") from exc
    return shape, int(desc.get("resolution", 4))


# ---------------------------------------------------------------- generators


def _icosahedron():
    t = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ],
        dtype=np.int64,
    )
    return v / np.linalg.norm(v, axis=1)[:, None], f


def _subdivide(v, f):
    """4-to-1 split with shared midpoints, projected back to the unit sphere."""
    e = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
    uniq, inv = np.unique(e, axis=0, return_inverse=True)
    inv = inv.reshape(3, -1).T + len(v)
    mid = 0.5 * (v[uniq[:, 0]] + v[uniq[:, 1]])
    mid /= np.linalg.norm(mid, axis=1)[:, None]
    a, b, c = f.T
    ab, bc, ca = inv.T
    nf = np.concatenate(
        [np.c_[a, ab, ca], np.c_[b, bc, ab], np.c_[c, ca, bc], np.c_[ab, bc, ca]]
    )
    return np.vstack([v, mid]), nf


@lru_cache(maxsize=16)
def _unit_icosphere(level):
    v, f = _icosahedron()
    for _ in range(level):
        v, f = _subdivide(v, f)
    v.setflags(write=False)
    f.setflags(write=False)
    return v, f


def icosphere_counts(level):
    return 10 * 4**level + 2, 20 * 4**level


def _check_cap(nv):
    cap = max_vertices()
    if nv > cap:
        raise ShapeError(f"resolution too large: {nv} vertices exceeds the cap of {cap}")


def real_harmonic(l, m, points):  # noqa: E741
    """Unnormalised real spherical harmonic evaluated at directions ``points``."""
    p = np.asarray(points, dtype=float)
    p = p / np.linalg.norm(p, axis=-1, keepdims=True)
    cos_t = np.clip(p[..., 2], -1.0, 1.0)
    phi = np.arctan2(p[..., 1], p[..., 0])
    leg = special.lpmv(abs(m), l, cos_t)
    return leg * (np.cos(m * phi) if m >= 0 else np.sin(-m * phi))


@lru_cache(maxsize=64)
def harmonic_max(l, m):  # noqa: E741
    """Maximum of ``|real_harmonic(l, m)|`` over the unit sphere."""

    def f(angles):
        t, ph = angles
        return real_harmonic(l, m, [math.sin(t) * math.cos(ph), math.sin(t) * math.sin(ph), math.cos(t)])

    t = np.linspace(0.0, math.pi, 361)
    ph = np.linspace(-math.pi, math.pi, 721)
    T, P = np.meshgrid(t, ph, indexing="ij")
    pts = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    vals = np.abs(real_harmonic(l, m, pts))
    i = np.unravel_index(np.argmax(vals), vals.shape)
    best = float(vals[i])
    sign = 1.0 if f((T[i], P[i])) >= 0 else -1.0
    res = optimize.minimize(lambda a: -sign * f(a), x0=[T[i], P[i]], method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-15})
    return max(best, float(abs(f(res.x))))


def generate(shape, resolution):
    """Mesh the analytic shape.

    Spheres, ellipsoids and perturbed spheres use an icosphere of
    subdivision level ``resolution``; tori use a ``resolution x
    resolution`` grid in the two angles.
    """
    resolution = int(resolution)
    if isinstance(shape, Torus):
        if resolution < 3:
            raise ShapeError(f"torus resolution must be at least 3, got {resolution}")
        _check_cap(resolution**2)
        return _torus(shape, resolution)
    if resolution < 1:
        raise ShapeError(f"resolution must be at least 1, got {resolution}")
    _check_cap(icosphere_counts(resolution)[0])
    v, f = _unit_icosphere(resolution)
    if isinstance(shape, Sphere):
        v = shape.radius * v
    elif isinstance(shape, Ellipsoid):
        v = v * np.array([shape.a, shape.b, shape.c])
    elif isinstance(shape, PerturbedSphere):
        if shape.delta == 0:
            v = shape.radius * v
        else:
            y = real_harmonic(shape.l, shape.m, v)
            ymax = max(harmonic_max(shape.l, shape.m), float(np.abs(y).max()))
            v = (shape.radius * (1.0 + shape.delta * y / ymax))[:, None] * v
    else:
        raise ShapeError(f"unsupported shape {shape!r}")
    return Mesh(v, f, name=_KIND_OF[type(shape)], validate=False)


def _torus(shape, n):
    ang = 2.0 * math.pi * np.arange(n) / n
    phi, theta = np.meshgrid(ang, ang, indexing="ij")
    ring = shape.major + shape.minor * np.cos(theta)
    v = np.stack(
        [ring * np.cos(phi), ring * np.sin(phi), shape.minor * np.sin(theta)], axis=-1
    ).reshape(-1, 3)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    i, j = i.ravel(), j.ravel()
    a = i * n + j
    b = ((i + 1) % n) * n + j
    c = ((i + 1) % n) * n + (j + 1) % n
    d = i * n + (j + 1) % n
    f = np.concatenate([np.c_[a, b, c], np.c_[a, c, d]])
    return Mesh(v, f, name="torus", validate=False)


def cube_mesh(n=4, size=1.0):
    """Axis-aligned cube of side ``size`` centred at the origin.

    Each face carries an ``n x n`` grid of squares; every square is split
    into four triangles around its centre, so all corners are symmetric.
    """
    index = {}
    verts = []

    def vid(key):
        if key not in index:
            index[key] = len(verts)
            verts.append(key)
        return index[key]

    faces = []
    N = 2 * n
    for axis in range(3):
        u_ax, w_ax = [a for a in range(3) if a != axis]
        for side in (-1, 1):
            def key(u, w):
                k = [0, 0, 0]
                k[axis] = side * N
                k[u_ax] = u
                k[w_ax] = w
                return tuple(k)

            # reverse the winding where e_u x e_w points inward
            flip = side * np.cross(np.eye(3)[u_ax], np.eye(3)[w_ax])[axis] < 0
            for iu in range(n):
                for iw in range(n):
                    u0, w0 = -N + 4 * iu, -N + 4 * iw
                    ring = [key(u0, w0), key(u0 + 4, w0), key(u0 + 4, w0 + 4), key(u0, w0 + 4)]
                    ring = [vid(k) for k in ring]
                    ctr = vid(key(u0 + 2, w0 + 2))
                    for q in range(4):
                        tri = [ctr, ring[q], ring[(q + 1) % 4]]
                        faces.append(tri[::-1] if flip else tri)
    v = np.array(verts, dtype=float) * (size / (2 * N))
    return Mesh(v, np.array(faces), name="cube")


# ---------------------------------------------------------------- exact curvature


class ExactCurvature(NamedTuple):
    k1: float
    k2: float
    H: float
    H2: float
    scal: float
    tau_norm: float


def _pack(k1, k2):
    H = 0.5 * (k1 + k2)
    return ExactCurvature(k1, k2, H, k1 * k2, 2.0 * k1 * k2, abs(k1 - k2) / math.sqrt(2.0))


def exact_curvature(shape, point, tol=1e-9):
    """Closed-form principal curvatures and derived quantities at ``point``.

    Curvatures are positive for convex shapes with the outward normal.
    For the torus ``k1`` is the curvature along the parallel,
    ``cos(theta) / (R + r cos(theta))``, and ``k2 = 1 / r``; otherwise
    ``k1 >= k2``.
    """
    x, y, z = (float(c) for c in point)
    if isinstance(shape, Sphere):
        if abs(math.sqrt(x * x + y * y + z * z) - shape.radius) > tol * max(1.0, shape.radius):
            raise ShapeError(f"point {point} is not on {shape}")
        k = 1.0 / shape.radius
        return _pack(k, k)
    if isinstance(shape, Ellipsoid):
        a2, b2, c2 = shape.a**2, shape.b**2, shape.c**2
        if abs(x * x / a2 + y * y / b2 + z * z / c2 - 1.0) > tol:
            raise ShapeError(f"point {point} is not on {shape}")
        g = x * x / a2**2 + y * y / b2**2 + z * z / c2**2
        K = 1.0 / (a2 * b2 * c2 * g * g)
        H = (a2 + b2 + c2 - x * x - y * y - z * z) / (2.0 * a2 * b2 * c2 * g**1.5)
        d = math.sqrt(max(H * H - K, 0.0))
        return _pack(H + d, H - d)
    if isinstance(shape, Torus):
        rho = math.hypot(x, y)
        if abs((rho - shape.major) ** 2 + z * z - shape.minor**2) > tol * max(1.0, shape.minor**2):
            raise ShapeError(f"point {point} is not on {shape}")
        cos_t = (rho - shape.major) / shape.minor
        return _pack(cos_t / (shape.major + shape.minor * cos_t), 1.0 / shape.minor)
    raise ShapeError(f"no closed-form curvature for {type(shape).__name__}")
