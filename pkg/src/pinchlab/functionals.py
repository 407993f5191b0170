"""Integral functionals: norms, Hsiung-Minkowski residuals, k_{p,r},
Reilly's inequality and its Hoelder-refined pinching deficit.

The scalar helpers (``k_from_integrals``, ``reilly_terms``,
``pinching_terms``) take already-integrated quantities, so they apply to
any dimension n; the mesh functions feed them discrete integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INF = math.inf


class FunctionalError(ValueError):
    """A functional is undefined for the given input (e.g. zero denominator)."""


@dataclass(frozen=True)
class NormSpec:
    """L^p norm convention; ``normalized`` integrates against ``dv / Vol``.

    Exponents in (0, 1) give the quasi-norm ``(int |f|^p)^(1/p)``.
    """

    exponent: float = 2.0
    normalized: bool = False

    def __post_init__(self):
        if not self.exponent > 0:
            raise ValueError(f"norm exponent must be positive, got {self.exponent}")


def integrate(mesh, field):
    """Discrete integral ``sum_v f(v) A(v)`` with barycentric vertex areas."""
    return float(np.dot(np.asarray(field, dtype=float), mesh.vertex_areas))


def lp_norm(mesh, field, spec=NormSpec()):
    f = np.abs(np.asarray(field, dtype=float))
    if math.isinf(spec.exponent):
        return float(f.max())
    p = spec.exponent
    total = integrate(mesh, f**p)
    if spec.normalized:
        total /= mesh.total_area
    return float(total ** (1.0 / p))


def support_function(mesh):
    """``<X, nu>`` at every vertex; the mesh is expected to be recentred."""
    return np.einsum("ij,ij->i", mesh.vertices, mesh.frames.normals)


def hsiung_minkowski_residual(mesh, curv, r):
    """``int (H_{r-1} - H_r <X, nu>) dv / Vol``; zero on closed hypersurfaces."""
    if not 1 <= r <= curv.n:
        raise ValueError(f"order r={r} outside 1..{curv.n}")
    integrand = curv.Hr[:, r - 1] - curv.Hr[:, r] * support_function(mesh)
    return integrate(mesh, integrand) / mesh.total_area


def k_from_integrals(norm_hr_2p, volume, int_hr_prev, p):
    """``|H_r|_{2p}^2 Vol^{2 - 1/p} / (int H_{r-1})^2`` (unnormalised norm)."""
    if int_hr_prev == 0:
        raise FunctionalError("integral of H_{r-1} vanishes; k_{p,r} undefined")
    return norm_hr_2p**2 * volume ** (2.0 - 1.0 / p) / int_hr_prev**2


def reilly_terms(lambda1, int_hr_prev, int_hr_sq, volume, n):
    """Scale-consistent Reilly inequality ``lhs <= rhs``.

    ``lhs = lambda1 (int H_{r-1})^2`` and ``rhs = n Vol int H_r^2``; equality
    holds exactly on round spheres.
    """
    lhs = lambda1 * int_hr_prev**2
    rhs = n * volume * int_hr_sq
    return lhs, rhs, lhs - rhs


def pinching_terms(lambda1, int_hr_prev, norm_hr_2p, volume, n, p):
    """Hoelder-refined deficit ``lambda1 (int H_{r-1})^2 - n Vol^{2-1/p} |H_r|_{2p}^2``.

    Returns ``(deficit, deficit / (n Vol^{2-1/p} |H_r|_{2p}^2))``.
    """
    bound = n * volume ** (2.0 - 1.0 / p) * norm_hr_2p**2
    deficit = lambda1 * int_hr_prev**2 - bound
    return deficit, (deficit / bound if bound else -INF)


def k_constant(mesh, curv, p=2.0, r=1):
    if p < 2:
        raise ValueError(f"k_{{p,r}} requires p >= 2, got {p}")
    return k_from_integrals(
        lp_norm(mesh, curv.Hr[:, r], NormSpec(2 * p)),
        mesh.total_area,
        integrate(mesh, curv.Hr[:, r - 1]),
        p,
    )


def reilly_check(mesh, curv, spectral, r=1):
    """``(lhs, rhs, deficit)`` of the scale-consistent Reilly inequality."""
    return reilly_terms(
        spectral.lambda1,
        integrate(mesh, curv.Hr[:, r - 1]),
        integrate(mesh, curv.Hr[:, r] ** 2),
        mesh.total_area,
        curv.n,
    )


def pinching_deficit(mesh, curv, spectral, p=2.0, r=1):
    """``(deficit, dimensionless deficit)``; nonpositive, zero on round spheres."""
    return pinching_terms(
        spectral.lambda1,
        integrate(mesh, curv.Hr[:, r - 1]),
        lp_norm(mesh, curv.Hr[:, r], NormSpec(2 * p)),
        mesh.total_area,
        curv.n,
        p,
    )


@dataclass(frozen=True)
class ChainReport:
    checked: int
    excluded: int
    violations: int
    worst_margin: float

    def to_dict(self):
        return {
            "checked": self.checked,
            "excluded": self.excluded,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
        }


def chain_inequality_check(curv, tol=1e-9):
    """Check ``H_r^{1/r} <= ... <= H_2^{1/2} <= H`` where all ``H_r > 0``.

    Vertices where some ``H_r`` (r >= 1) is nonpositive are excluded. The
    worst margin is ``max_v (H_r^{1/r} / H_{r-1}^{1/(r-1)} - 1)`` over checked
    vertices and consecutive orders, so it is <= 0 when the chain holds.
    """
    Hr = curv.Hr[:, 1:]
    mask = np.all(Hr > 0, axis=1)
    roots = Hr[mask] ** (1.0 / np.arange(1, Hr.shape[1] + 1))
    if roots.shape[1] < 2 or not mask.any():
        return ChainReport(int(mask.sum()), int((~mask).sum()), 0, -INF if mask.any() else 0.0)
    margin = roots[:, 1:] / roots[:, :-1] - 1.0
    return ChainReport(
        checked=int(mask.sum()),
        excluded=int((~mask).sum()),
        violations=int(np.any(margin > tol, axis=1).sum()),
        worst_margin=float(margin.max()),
    )


@dataclass(frozen=True)
class OrderDeficits:
    r: int
    k_pr: float
    reilly_lhs: float
    reilly_rhs: float
    reilly_deficit: float
    pinching_deficit: float
    pinching_deficit_rel: float

    def to_dict(self):
        return {
            "k_pr": self.k_pr,
            "reilly_lhs": self.reilly_lhs,
            "reilly_rhs": self.reilly_rhs,
            "reilly_deficit": self.reilly_deficit,
            "pinching_deficit": self.pinching_deficit,
            "pinching_deficit_rel": self.pinching_deficit_rel,
        }


@dataclass(frozen=True)
class DeficitReport:
    """All integral diagnostics; ``orders[r]`` holds the r-dependent ones."""

    p: float
    volume: float
    hm_residual: dict
    orders: dict
    chain: ChainReport
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "p": self.p,
            "volume": self.volume,
            "hm_residual": {str(r): v for r, v in sorted(self.hm_residual.items())},
            "orders": {str(r): o.to_dict() for r, o in sorted(self.orders.items())},
            "chain": self.chain.to_dict(),
            "notes": list(self.notes),
        }


def deficit_report(mesh, curv, spectral, p=2.0):
    """Evaluate every functional for ``r = 1..n``."""
    orders = {}
    notes = []
    for r in range(1, curv.n + 1):
        try:
            k = k_constant(mesh, curv, p, r)
        except FunctionalError as exc:
            k = math.nan
            notes.append(f"r={r}: {exc}")
        lhs, rhs, rd = reilly_check(mesh, curv, spectral, r)
        pd, pd_rel = pinching_deficit(mesh, curv, spectral, p, r)
        orders[r] = OrderDeficits(r, k, lhs, rhs, rd, pd, pd_rel)
    return DeficitReport(
        p=float(p),
        volume=mesh.total_area,
        hm_residual={r: hsiung_minkowski_residual(mesh, curv, r) for r in range(1, curv.n + 1)},
        orders=orders,
        chain=chain_inequality_check(curv),
        notes=notes,
    )
