"""Closed oriented triangle surfaces: validation, vertex frames, and OFF/OBJ I/O."""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)

#: Faces with area below this fraction of the squared bounding-box diagonal are rejected.
DEGENERATE_AREA_RTOL = 1e-12


class MeshError(ValueError):
    """Base class for mesh construction and ingestion failures."""


class MeshParseError(MeshError):
    """The file could not be parsed in the declared format."""


class MeshValidationError(MeshError):
    """The face complex is not a closed, oriented, connected 2-manifold.

    ``simplex`` holds the offending vertex indices (a face, an edge or a
    single vertex) when the failure can be localised.
    """

    def __init__(self, message, simplex=None):
        super().__init__(message)
        self.simplex = None if simplex is None else tuple(int(i) for i in simplex)


class FrameError(MeshError):
    """Averaged face normals cancel at a vertex."""

    def __init__(self, message, vertex):
        super().__init__(message)
        self.vertex = int(vertex)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Indexed triangle surface embedded in 3-space.

    Faces are counterclockwise when seen from outside. Construction
    validates the full set of invariants (closed, consistently oriented,
    outward, edge- and vertex-manifold, connected, no degenerate faces)
    unless ``validate=False`` is passed, which is reserved for internal
    derived meshes whose topology is already known to be valid.

    Arrays are stored read-only; derived quantities are cached.
    """

    vertices: np.ndarray
    faces: np.ndarray
    name: str | None = None
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        f = np.asarray(self.faces)
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshValidationError(f"vertices must have shape (N, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshValidationError(f"faces must have shape (F, 3), got {f.shape}")
        if f.size and not np.issubdtype(f.dtype, np.integer):
            if not np.all(np.equal(np.mod(f, 1), 0)):
                raise MeshValidationError("face indices must be integers")
        object.__setattr__(self, "vertices", _readonly(v))
        object.__setattr__(self, "faces", _readonly(f.astype(np.int64)))
        if self.validate:
            _validate(self)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    @cached_property
    def edges(self):
        """Unique undirected edges, shape (E, 2), each row sorted."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def euler_characteristic(self):
        return self.n_vertices - len(self.edges) + self.n_faces

    @cached_property
    def face_cross(self):
        """Unnormalised face normals (cross products, length = 2 * area)."""
        v = self.vertices
        f = self.faces
        return np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])

    @cached_property
    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_cross, axis=1)

    @cached_property
    def face_normals(self):
        return self.face_cross / (2.0 * self.face_areas[:, None])

    @cached_property
    def vertex_areas(self):
        """Barycentric lumped areas: a third of every incident face area."""
        a = np.zeros(self.n_vertices)
        third = self.face_areas / 3.0
        for k in range(3):
            np.add.at(a, self.faces[:, k], third)
        return a

    @property
    def total_area(self):
        return float(self.face_areas.sum())

    @cached_property
    def adjacency(self):
        """Symmetric vertex adjacency as a CSR matrix with sorted indices."""
        e = self.edges
        n = self.n_vertices
        data = np.ones(2 * len(e))
        adj = sparse.coo_matrix(
            (data, (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(n, n)
        ).tocsr()
        adj.sort_indices()
        return adj

    @cached_property
    def frames(self):
        return vertex_frames(self)

    def scaled(self, factor):
        return Mesh(self.vertices * factor, self.faces, self.name, validate=False)

    def transformed(self, rotation=None, translation=None):
        """Return a rigidly moved copy (``x -> R x + t``)."""
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return Mesh(v, self.faces, self.name, validate=False)


def _validate(mesh):
    v, f = mesh.vertices, mesh.faces
    nv = len(v)
    if len(f) == 0:
        raise MeshValidationError("mesh has no faces")
    if not np.all(np.isfinite(v)):
        bad = int(np.flatnonzero(~np.all(np.isfinite(v), axis=1))[0])
        raise MeshValidationError(f"vertex {bad} has non-finite coordinates", (bad,))
    out = np.flatnonzero((f < 0).any(axis=1) | (f >= nv).any(axis=1))
    if len(out):
        raise MeshValidationError(
            f"face {out[0]} has an index out of range [0, {nv})", f[out[0]]
        )
    rep = np.flatnonzero((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2]))
    if len(rep):
        raise MeshValidationError(f"face {rep[0]} repeats a vertex", f[rep[0]])
    diag2 = float(np.sum((v.max(axis=0) - v.min(axis=0)) ** 2))
    small = np.flatnonzero(mesh.face_areas < DEGENERATE_AREA_RTOL * diag2)
    if len(small):
        raise MeshValidationError(f"face {small[0]} is degenerate (near-zero area)", f[small[0]])

    unused = np.setdiff1d(np.arange(nv), f.ravel())
    if len(unused):
        raise MeshValidationError(f"vertex {unused[0]} is not used by any face", (unused[0],))

    # every directed edge once, and its reverse exactly once
    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    und, counts = np.unique(np.sort(directed, axis=1), axis=0, return_counts=True)
    if np.any(counts > 2):
        e = und[np.argmax(counts > 2)]
        raise MeshValidationError(
            f"non-manifold edge ({e[0]}, {e[1]}) is shared by {counts.max()} faces", e
        )
    if np.any(counts < 2):
        e = und[np.argmax(counts < 2)]
        raise MeshValidationError(f"boundary edge ({e[0]}, {e[1]}): mesh is not closed", e)
    dir_u, dir_counts = np.unique(directed, axis=0, return_counts=True)
    if np.any(dir_counts > 1):
        e = dir_u[np.argmax(dir_counts > 1)]
        raise MeshValidationError(
            f"edge ({e[0]}, {e[1]}) is traversed twice in the same direction: "
            "inconsistent orientation",
            e,
        )

    _check_vertex_links(f, nv)

    n_comp, labels = connected_components(mesh.adjacency, directed=False)
    if n_comp != 1:
        other = int(np.flatnonzero(labels != labels[0])[0])
        raise MeshValidationError(
            f"mesh has {n_comp} connected components (vertex {other} is not "
            "connected to vertex 0)",
            (other,),
        )

    # consistent orientation holds; require it to be the outward one
    v0 = v[f[:, 0]] - v.mean(axis=0)
    signed_volume = np.einsum("ij,ij->", v0, mesh.face_cross) / 6.0
    if signed_volume <= 0:
        raise MeshValidationError(
            "faces are oriented inward (negative enclosed volume); expected "
            "counterclockwise when seen from outside"
        )


def _check_vertex_links(f, nv):
    # each vertex's link must be one cycle (rejects pinched vertices)
    nxt = {}
    for a, b, c in f.tolist():
        for v, p, q in ((a, b, c), (b, c, a), (c, a, b)):
            nxt.setdefault(v, {})[p] = q
    for v in range(nv):
        ring = nxt[v]
        start = next(iter(ring))
        cur, steps = start, 0
        while True:
            cur = ring[cur]
            steps += 1
            if cur == start:
                break
        if steps != len(ring):
            raise MeshValidationError(f"vertex {v} is non-manifold (pinched fan)", (v,))


@dataclass(frozen=True)
class VertexFrame:
    normal: np.ndarray
    tangents: np.ndarray
    area: float


@dataclass(frozen=True, eq=False)
class VertexFrames:
    """Per-vertex outward normals, tangent bases and lumped areas.

    ``tangents[i]`` is a (2, 3) array whose rows together with
    ``normals[i]`` form a right-handed orthonormal frame.
    """

    normals: np.ndarray
    tangents: np.ndarray
    areas: np.ndarray

    def __len__(self):
        return len(self.normals)

    def __getitem__(self, i):
        return VertexFrame(self.normals[i], self.tangents[i], float(self.areas[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def tangent_basis(normals):
    """Complete unit normals to orthonormal frames using a fixed axis rule."""
    normals = np.asarray(normals, dtype=float)
    # rounding makes exact symmetric ties (common on icospheres) resolve to the
    # lowest axis regardless of roundoff, so frames survive translations
    axis = np.argmin(np.round(np.abs(normals), 9), axis=1)
    e = np.zeros_like(normals)
    e[np.arange(len(normals)), axis] = 1.0
    t1 = e - np.sum(e * normals, axis=1)[:, None] * normals
    t1 /= np.linalg.norm(t1, axis=1)[:, None]
    t2 = np.cross(normals, t1)
    return np.stack([t1, t2], axis=1)


def vertex_frames(mesh):
    """Outward unit normal, tangent basis and barycentric area at every vertex.

    The normal is the normalised area-weighted average of incident face
    normals (i.e. the normalised sum of face cross products).

    Raises
    ------
    FrameError
        If the incident face normals cancel at some vertex.
    """
    acc = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], mesh.face_cross)
    length = np.linalg.norm(acc, axis=1)
    scale = np.sqrt(mesh.vertex_areas)
    bad = np.flatnonzero(length <= 1e-12 * np.maximum(scale, 1e-300) ** 2)
    if len(bad):
        raise FrameError(f"averaged normal vanishes at vertex {bad[0]}", bad[0])
    normals = acc / length[:, None]
    return VertexFrames(
        _readonly(normals), _readonly(tangent_basis(normals)), mesh.vertex_areas
    )


def area_centroid(mesh):
    a = mesh.vertex_areas
    return (a[:, None] * mesh.vertices).sum(axis=0) / a.sum()


def centroid_recenter(mesh):
    """Translate the mesh so that its area-weighted vertex centroid is the origin."""
    return Mesh(mesh.vertices - area_centroid(mesh), mesh.faces, mesh.name, validate=False)


# ---------------------------------------------------------------- file I/O


def _data_lines(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def read_off(path):
    text = Path(path).read_text(encoding="utf-8")
    tokens = []
    lines = list(_data_lines(text))
    if not lines or not lines[0].startswith("OFF"):
        raise MeshParseError(f"{path}: missing OFF header")
    head = lines[0][3:].split()
    for line in [" ".join(head)] + lines[1:]:
        tokens.extend(line.split())
    try:
        nv, nf = int(tokens[0]), int(tokens[1])
        pos = 3
        verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)
        pos += 3 * nv
        faces = []
        for i in range(nf):
            k = int(tokens[pos])
            if k != 3:
                raise MeshParseError(f"{path}: face {i} has {k} vertices, only triangles supported")
            face = [int(t) for t in tokens[pos + 1 : pos + 4]]
            if len(face) != 3:
                raise MeshParseError(f"{path}: truncated face list")
            faces.append(face)
            pos += 1 + k
    except MeshParseError:
        raise
    except (IndexError, ValueError) as exc:
        raise MeshParseError(f"{path}: malformed OFF data ({exc})") from exc
    return verts, np.array(faces, dtype=np.int64).reshape(-1, 3)


def read_obj(path):
    verts, faces = [], []
    ignored = {}
    text = Path(path).read_text(encoding="utf-8")
    try:
        for lineno, line in enumerate(_data_lines(text), 1):
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                verts.append([float(x) for x in parts[1:4]])
                if len(parts) < 4:
                    raise ValueError("vertex needs three coordinates")
            elif tag == "f":
                idx = []
                for p in parts[1:]:
                    i = int(p.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) != 3:
                    raise MeshParseError(
                        f"{path}: face on data line {lineno} has {len(idx)} vertices, "
                        "only triangles supported"
                    )
                faces.append(idx)
            else:
                ignored[tag] = ignored.get(tag, 0) + 1
    except MeshParseError:
        raise
    except (IndexError, ValueError) as exc:
        raise MeshParseError(f"{path}: malformed OBJ data ({exc})") from exc
    if ignored:
        logger.warning(
            "%s: ignored OBJ records %s",
            path,
            ", ".join(f"{k} x{v}" for k, v in sorted(ignored.items())),
        )
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _guess_format(path):
    ext = os.path.splitext(str(path))[1].lower().lstrip(".")
    if ext not in ("off", "obj"):
        raise MeshParseError(f"{path}: cannot infer mesh format from extension {ext!r}")
    return ext


def load_mesh(path, format=None):
    """Read and validate an OFF or OBJ triangle mesh.

    Parameters
    ----------
    path : str or Path
        File to read.
    format : {"OFF", "OBJ"}, optional
        Declared format; inferred from the extension when omitted.

    Returns
    -------
    Mesh
        Validated mesh, vertices in file order.
    """
    fmt = (format or _guess_format(path)).lower()
    if fmt == "off":
        v, f = read_off(path)
    elif fmt == "obj":
        v, f = read_obj(path)
    else:
        raise MeshParseError(f"unsupported mesh format {format!r}")
    return Mesh(v, f, name=Path(path).stem)


def _fmt(x):
    return format(float(x), ".17g")


def save_mesh(mesh, path, format=None):
    """Write OFF or OBJ with 17 significant digits (exact double round trip)."""
    fmt = (format or _guess_format(path)).lower()
    lines = []
    if fmt == "off":
        lines.append("OFF")
        lines.append(f"{mesh.n_vertices} {mesh.n_faces} 0")
        lines.extend(" ".join(_fmt(x) for x in p) for p in mesh.vertices)
        lines.extend("3 " + " ".join(str(i) for i in t) for t in mesh.faces.tolist())
    elif fmt == "obj":
        lines.extend("v " + " ".join(_fmt(x) for x in p) for p in mesh.vertices)
        lines.extend("f " + " ".join(str(i + 1) for i in t) for t in mesh.faces.tolist())
    else:
        raise MeshParseError(f"unsupported mesh format {format!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
