"""Convex bodies given by C^{2,+} support functions on a quadrature grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fields import Const, Exp, Field, Jet, Log, Scale, Sum, curvature_from_jet, field_from_json
from .sphere import SphereGrid, build_grid, integrate, standard_error, tangent_frame


class SupportRejected(ValueError):
    """The field is not a C^{2,+} support function on the grid.

    Carries the certificate: the worst node, the support value there and
    the smallest eigenvalue of the curvature matrix.
    """

    def __init__(self, message, node=None, eigenvalue=None, value=None):
        super().__init__(message)
        self.node = node
        self.eigenvalue = eigenvalue
        self.value = value


@dataclass(frozen=True, eq=False)
class BodyRep:
    h: Field
    grid: SphereGrid
    min_Q_eigen: float
    worst_node: int
    jet: Jet = field(repr=False)
    Q: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def values(self) -> np.ndarray:
        return self.jet.val

    @property
    def det_Q(self) -> np.ndarray:
        return np.linalg.det(self.Q)


def validate_support(h: Field, grid: SphereGrid) -> BodyRep:
    """Certify ``h`` as a C^{2,+} support function at every grid node.

    Raises :class:`SupportRejected` if ``h <= 0`` or the curvature matrix
    has a nonpositive eigenvalue somewhere on the grid.
    """
    if h.dim != grid.dim:
        raise ValueError(f"field dim {h.dim} does not match grid dim {grid.dim}")
    jet = h.jet(grid.nodes)
    q = curvature_from_jet(jet, grid.frames)
    eig = np.linalg.eigvalsh(q)[:, 0]
    worst = int(np.argmin(eig))
    low = int(np.argmin(jet.val))
    if jet.val[low] <= 0.0:
        raise SupportRejected(
            f"support function nonpositive at node {low}: h = {jet.val[low]:.6g}",
            node=low, eigenvalue=float(eig[low]), value=float(jet.val[low]),
        )
    if eig[worst] <= 0.0:
        raise SupportRejected(
            f"curvature matrix not positive definite at node {worst}: "
            f"min eigenvalue {eig[worst]:.6g}",
            node=worst, eigenvalue=float(eig[worst]), value=float(jet.val[worst]),
        )
    return BodyRep(h, grid, float(eig[worst]), worst, jet, q)


def volume(body: BodyRep) -> float:
    """(1/n) * integral of h det Q(h)."""
    return integrate(body.grid, body.values * body.det_Q) / body.dim


def volume_error(body: BodyRep) -> float:
    """Standard error of :func:`volume` (zero on deterministic grids)."""
    return standard_error(body.grid, body.values * body.det_Q) / body.dim


def _pointwise(body: BodyRep, u):
    u = np.asarray(u, dtype=float)
    jet = body.h.jet(u[None, :])
    q = curvature_from_jet(jet, tangent_frame(u)[None])[0]
    return float(jet.val[0]), float(np.linalg.det(q))


def surface_measure_density(body: BodyRep, u) -> float:
    """det Q(h; u), the density of the surface area measure."""
    return _pointwise(body, u)[1]


def cone_measure_density(body: BodyRep, u) -> float:
    """(1/n) h(u) det Q(h; u)."""
    val, dq = _pointwise(body, u)
    return val * dq / body.dim


def cone_densities(body: BodyRep) -> np.ndarray:
    return body.values * body.det_Q / body.dim


def surface_area(body: BodyRep) -> float:
    return integrate(body.grid, body.det_Q)


def log_blend(K: BodyRep, L: BodyRep, lam: float) -> BodyRep:
    """Body with support h_K^lam h_L^(1-lam), if that is C^{2,+} on the grid.

    Outside the certified regime the geometric mean is not a support
    function and :class:`SupportRejected` is raised; no convexification
    is attempted.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    if K.grid is not L.grid:
        raise ValueError("bodies must live on the same grid")
    if lam == 1.0:
        return K
    if lam == 0.0:
        return L
    h = Exp(Sum([Scale(lam, Log(K.h)), Scale(1.0 - lam, Log(L.h))]))
    return validate_support(h, K.grid)


def minkowski_blend(K: BodyRep, L: BodyRep, lam: float) -> BodyRep:
    """lam K + (1 - lam) L, whose support is the convex combination of supports."""
    return validate_support(Sum([Scale(lam, K.h), Scale(1.0 - lam, L.h)]), K.grid)


def ball(radius: float, grid: SphereGrid) -> BodyRep:
    return validate_support(Const(radius, grid.dim), grid)


def is_symmetric(body: BodyRep, tol: float = 1e-10) -> bool:
    v = body.values
    return bool(np.max(np.abs(v - v[body.grid.antipode])) <= tol)


def body_to_json(body: BodyRep) -> dict:
    return {
        "field": body.h.to_json(),
        "grid": body.grid.descriptor(),
        "min_Q_eigen": body.min_Q_eigen,
    }


def body_from_json(doc: dict) -> BodyRep:
    g = doc["grid"]
    grid = build_grid(g["dim"], g["resolution"], g["kind"], g.get("seed", 0))
    return validate_support(field_from_json(doc["field"], grid.dim), grid)
