"""Sphere comparison, rigidity diagnostics and the analysis pipeline.

``analyze`` runs the full pipeline on a mesh and returns a ``PinchReport``:
sphere fit, quasi-isometry distortion of the radial projection onto that
sphere, almost-Einstein and almost-umbilic deviations with ``k = k_{p,r}``,
the almost-CMC report, and every integral functional.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import __version__
from .config import AnalysisConfig, RegimeWarning
from .curvature import curvature_field, operator_norm, tensor_norm
from .functionals import NormSpec, deficit_report, integrate, k_constant, lp_norm
from .mesh import MeshError, centroid_recenter
from .spectral import SpectralConvergenceError, mass_matrix, first_eigenvalue, stiffness_matrix


class NotStarShapedError(ValueError):
    def __init__(self, message, vertices):
        super().__init__(message)
        self.vertices = tuple(int(v) for v in vertices)


class AnalysisError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass(frozen=True)
class SphereFit:
    center: np.ndarray
    radius: float
    rms_radial_error: float

    def to_dict(self):
        return {
            "center": [float(c) for c in self.center],
            "radius": self.radius,
            "rms": self.rms_radial_error,
        }


def fit_sphere(mesh):
    """Least-squares sphere through the vertices.

    Algebraic fit ``|x|^2 = 2 c.x + (R^2 - |c|^2)`` followed by one
    Gauss-Newton step on the geometric residual ``|x - c| - R``.
    """
    v = mesh.vertices
    A = np.column_stack([2.0 * v, np.ones(len(v))])
    b = np.sum(v * v, axis=1)
    sol, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    assert rank == 4, "degenerate sphere fit (coplanar vertices)"
    c = sol[:3]
    R = math.sqrt(sol[3] + c @ c)

    d = v - c
    dist = np.linalg.norm(d, axis=1)
    res = dist - R
    J = np.column_stack([-d / dist[:, None], -np.ones(len(v))])
    step = np.linalg.lstsq(J, -res, rcond=None)[0]
    c = c + step[:3]
    R = R + step[3]
    res = np.linalg.norm(v - c, axis=1) - R
    return SphereFit(c, float(R), float(np.sqrt(np.mean(res**2))))


def star_shaped_violations(mesh, center):
    """Vertices where ``<X - c, nu> <= 0``."""
    return np.flatnonzero(np.einsum("ij,ij->i", mesh.vertices - center, mesh.frames.normals) <= 0)


def distortion(mesh, fit):
    """Quasi-isometry distortion of the radial projection onto ``fit``.

    For each face the linear map sending its edges to the edges of the
    projected triangle is formed; with singular values ``s`` the face
    contributes ``max |s^2 - 1|``. Returns the maximum over faces; it is
    zero (to roundoff) when every vertex lies on the fitted sphere.

    Raises
    ------
    NotStarShapedError
        If the mesh is not star-shaped with respect to ``fit.center``.
    """
    bad = star_shaped_violations(mesh, fit.center)
    if len(bad):
        shown = ", ".join(str(i) for i in bad[:10])
        raise NotStarShapedError(
            f"not star-shaped from the fitted center: {len(bad)} vertices with "
            f"<X - c, nu> <= 0 (e.g. {shown})",
            bad,
        )
    v = mesh.vertices
    d = v - fit.center
    proj = fit.center + fit.radius * d / np.linalg.norm(d, axis=1)[:, None]
    f = mesh.faces
    e1 = v[f[:, 1]] - v[f[:, 0]]
    e2 = v[f[:, 2]] - v[f[:, 0]]
    g1 = proj[f[:, 1]] - proj[f[:, 0]]
    g2 = proj[f[:, 2]] - proj[f[:, 0]]
    u1 = e1 / np.linalg.norm(e1, axis=1)[:, None]
    u2 = np.cross(mesh.face_normals, u1)
    E = np.stack(
        [
            np.stack([np.sum(e1 * u1, 1), np.sum(e2 * u1, 1)], axis=1),
            np.stack([np.sum(e1 * u2, 1), np.sum(e2 * u2, 1)], axis=1),
        ],
        axis=1,
    )
    G = np.stack([g1, g2], axis=2)
    A = G @ np.linalg.inv(E)
    s2 = np.linalg.eigvalsh(np.swapaxes(A, 1, 2) @ A)
    return float(np.abs(s2 - 1.0).max())


def _norm_spec(q, normalized):
    return NormSpec(q, normalized)


def _check_q(q, n):
    if q <= n / 2:
        warnings.warn(f"q = {q:g} <= n/2 = {n / 2:g}", RegimeWarning, stacklevel=3)


def einstein_deviation(mesh, curv, k=None, q=2.0, normalized=True, p=2.0, r=2):
    """``|Ric - (n-1) k g|_q`` with the per-vertex operator norm.

    ``k`` defaults to ``k_{p,r}``.
    """
    if k is None:
        k = k_constant(mesh, curv, p, r)
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    _check_q(q, curv.n)
    n = curv.n
    dev = curv.ricci - (n - 1) * k * np.eye(n)
    return lp_norm(mesh, operator_norm(dev), _norm_spec(q, normalized))


class UmbilicDeviations(NamedTuple):
    b_dev_2q: float
    tau_2q: float
    h2_dev_q: float
    b_dev_inf: float


def umbilic_deviations(mesh, curv, k=None, q=2.0, normalized=True, p=2.0, r=2):
    """``(|B - sqrt(k) g|_{2q}, |tau|_{2q}, |H^2 - k|_q, |B - sqrt(k) g|_inf)``.

    ``B - sqrt(k) g`` is measured with the operator norm and ``tau`` with
    the Frobenius norm, the one for which ``|tau|^2 = n(n-1) H^2 - Scal``.
    """
    if k is None:
        k = k_constant(mesh, curv, p, r)
    if not k > 0:
        raise ValueError(f"k must be positive, got {k}")
    n = curv.n
    b_dev = operator_norm(curv.shape_operator - math.sqrt(k) * np.eye(n))
    spec_2q = _norm_spec(2 * q, normalized)
    return UmbilicDeviations(
        lp_norm(mesh, b_dev, spec_2q),
        lp_norm(mesh, tensor_norm(curv.tau), spec_2q),
        lp_norm(mesh, curv.H**2 - k, _norm_spec(q, normalized)),
        float(b_dev.max()),
    )


@dataclass(frozen=True)
class CMCReport:
    h_bar: float
    s_bar: float
    cmc_eps: float
    scal_eps: float
    lemma_gap: float

    @property
    def lemma_ratio(self):
        eps = max(self.cmc_eps, self.scal_eps)
        return self.lemma_gap / eps if eps > 0 else math.nan

    def to_dict(self):
        return {
            "h_bar": self.h_bar,
            "s_bar": self.s_bar,
            "cmc_eps": self.cmc_eps,
            "scal_eps": self.scal_eps,
            "lemma_gap": self.lemma_gap,
            "lemma_ratio": self.lemma_ratio,
        }


def cmc_report(mesh, curv):
    """Almost-constant mean and scalar curvature diagnostics.

    ``lemma_gap = |s_bar - n(n-1) h_bar^2|`` vanishes on round spheres and is
    controlled by ``max(cmc_eps, scal_eps)`` on nearly round ones.
    """
    vol = mesh.total_area
    n = curv.n
    h_bar = integrate(mesh, curv.H) / vol
    s_bar = integrate(mesh, curv.scal) / vol
    return CMCReport(
        h_bar=h_bar,
        s_bar=s_bar,
        cmc_eps=float(np.abs(curv.H - h_bar).max()),
        scal_eps=float(np.abs(curv.scal - s_bar).max()),
        lemma_gap=abs(s_bar - n * (n - 1) * h_bar**2),
    )


@dataclass(frozen=True, eq=False)
class PinchReport:
    sphere: SphereFit
    radii: dict
    theta_hat: float | None
    einstein_dev: float
    umbilic_dev_inf: float
    b_dev_2q: float
    tau_norm_2q: float
    h2_minus_k_q: float
    k: float
    cmc: CMCReport
    deficits: object
    spectral: object
    provenance: dict
    notes: list = field(default_factory=list)
    mesh_info: dict = field(default_factory=dict)
    # pipeline intermediates, not serialised
    mesh: object = field(default=None, repr=False)
    curvature: object = field(default=None, repr=False)

    @property
    def h_bar(self):
        return self.cmc.h_bar

    @property
    def s_bar(self):
        return self.cmc.s_bar

    @property
    def cmc_eps(self):
        return self.cmc.cmc_eps

    @property
    def scal_eps(self):
        return self.cmc.scal_eps

    @property
    def lemma_gap(self):
        return self.cmc.lemma_gap

    def to_dict(self):
        cfg = self.provenance.get("config", {})
        return {
            "sphere": self.sphere.to_dict(),
            "radii": dict(self.radii),
            "theta_hat": self.theta_hat,
            "deviations": {
                "k": self.k,
                "q": cfg.get("q"),
                "normalized": cfg.get("normalized"),
                "einstein": self.einstein_dev,
                "umbilic_b_2q": self.b_dev_2q,
                "umbilic_b_inf": self.umbilic_dev_inf,
                "tau_2q": self.tau_norm_2q,
                "h2_minus_k_q": self.h2_minus_k_q,
            },
            "cmc": self.cmc.to_dict(),
            "functionals": self.deficits.to_dict(),
            "spectral": self.spectral.to_dict(),
            "mesh": dict(self.mesh_info),
            "notes": list(self.notes),
            "provenance": self.provenance,
        }

    def to_json(self):
        return dumps_report(self.to_dict())


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return None
        return float(format(x, ".9g"))
    return obj


def dumps_report(data):
    """Deterministic JSON: sorted keys, 9 significant digits, NaN as null."""
    return json.dumps(_clean(data), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (MeshError, ValueError, ArithmeticError, np.linalg.LinAlgError,
            SpectralConvergenceError) as exc:
        raise AnalysisError(name, exc) from exc


def analyze(mesh, config=None, provenance=None):
    """Run the full diagnostic pipeline on a validated mesh."""
    config = config or AnalysisConfig()
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        config.check_regime()
    notes.extend(str(w.message) for w in caught)
    n, p, q, r = config.n, config.p, config.q, config.r

    mesh = _stage("recenter", centroid_recenter, mesh)
    frames = _stage("frames", lambda m: m.frames, mesh)
    curv = _stage("curvature", curvature_field, mesh, frames)
    if len(curv.flagged):
        notes.append(f"quadric fit filled from neighbours at {len(curv.flagged)} vertices")
    spec = _stage(
        "spectral",
        lambda: first_eigenvalue(
            stiffness_matrix(mesh), mass_matrix(mesh), config.tol, config.max_iter, seed=config.seed
        ),
    )
    deficits = _stage("functionals", deficit_report, mesh, curv, spec, p)
    k = deficits.orders[r].k_pr
    if not (math.isfinite(k) and k > 0):
        raise AnalysisError("functionals", ValueError(f"k_{{p,r}} = {k} is not positive"))
    fit = _stage("sphere_fit", fit_sphere, mesh)
    try:
        theta = distortion(mesh, fit)
    except NotStarShapedError as exc:
        theta = None
        notes.append(f"theta_hat undefined: {exc}")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        ein = _stage("deviations", einstein_deviation, mesh, curv, k, q, config.normalized)
        umb = _stage("deviations", umbilic_deviations, mesh, curv, k, q, config.normalized)
    cmc = _stage("cmc", cmc_report, mesh, curv)

    prov = {"version": __version__, "config": config.to_dict()}
    prov.update(provenance or {})
    return PinchReport(
        sphere=fit,
        radii={
            "fit": fit.radius,
            "from_lambda1": math.sqrt(n / spec.lambda1),
            "from_k": 1.0 / math.sqrt(k),
        },
        theta_hat=theta,
        einstein_dev=ein,
        umbilic_dev_inf=umb.b_dev_inf,
        b_dev_2q=umb.b_dev_2q,
        tau_norm_2q=umb.tau_2q,
        h2_minus_k_q=umb.h2_dev_q,
        k=k,
        cmc=cmc,
        deficits=deficits,
        spectral=spec,
        provenance=prov,
        notes=notes,
        mesh_info={
            "vertices": mesh.n_vertices,
            "faces": mesh.n_faces,
            "euler_characteristic": mesh.euler_characteristic,
            "area": mesh.total_area,
        },
        mesh=mesh,
        curvature=curv,
    )
