"""Quadrature grids and tangent frames on the unit sphere S^{n-1}.

Every grid is closed under the antipodal map with equal weights on
antipodal pairs, so odd integrands cancel up to rounding.  All sums go
through :func:`pairwise_sum`, whose reduction order depends only on the
length of the input.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

GRID_KINDS = ("uniform_circle", "gauss_product", "monte_carlo")

_UNIT_TOL = 1e-14


def sphere_area(dim: int) -> float:
    """Surface measure |S^{dim-1}| = 2 pi^{dim/2} / Gamma(dim/2)."""
    return 2.0 * math.pi ** (dim / 2) / math.gamma(dim / 2)


def ball_volume(dim: int) -> float:
    return sphere_area(dim) / dim


def pairwise_sum(values) -> float:
    """Sum a 1-d array by a fixed binary tree.

    The tree shape depends only on ``len(values)``, so the result is
    bitwise reproducible regardless of how the values were produced.
    """
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        return 0.0
    while x.size > 1:
        if x.size % 2:
            x = np.append(x, 0.0)
        x = x[0::2] + x[1::2]
    return float(x[0])


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Quadrature nodes and weights on S^{dim-1}.

    ``nodes`` has shape (m, dim) and ``weights`` shape (m,).  The node
    array is ordered so that ``nodes[antipode[i]] == -nodes[i]``.
    """

    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    kind: str
    resolution: int
    seed: int | None = None
    antipode: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)
        if self.antipode is not None:
            self.antipode.setflags(write=False)

    def __len__(self) -> int:
        return self.nodes.shape[0]

    @cached_property
    def frames(self) -> np.ndarray:
        """Tangent frames at every node, shape (m, dim, dim-1); columns are the frame vectors."""
        f = tangent_frames(self.nodes)
        f.setflags(write=False)
        return f

    @property
    def total_weight(self) -> float:
        return pairwise_sum(self.weights)

    def descriptor(self) -> dict:
        d = {"dim": self.dim, "kind": self.kind, "resolution": self.resolution}
        if self.seed is not None:
            d["seed"] = self.seed
        return d


def build_grid(dim: int, resolution: int, kind: str | None = None, seed: int = 0) -> SphereGrid:
    """Build an antipodally symmetric quadrature grid on S^{dim-1}.

    Parameters
    ----------
    dim : int
        Ambient dimension n (the sphere is S^{n-1}).
    resolution : int
        Even number >= 4.  For ``uniform_circle`` it is the node count;
        for ``gauss_product`` the number of Gauss-Legendre nodes in the
        polar variable (the azimuth gets ``2 * resolution`` nodes); for
        ``monte_carlo`` the total node count.
    kind : str, optional
        One of ``uniform_circle`` (dim 2), ``gauss_product`` (dim 3) or
        ``monte_carlo`` (any dim).  Defaults to the deterministic kind
        for dim 2 and 3 and to ``monte_carlo`` otherwise.
    seed : int
        Seed for ``monte_carlo`` nodes.

    Returns
    -------
    SphereGrid
    """
    if kind is None:
        kind = {2: "uniform_circle", 3: "gauss_product"}.get(dim, "monte_carlo")
    if kind not in GRID_KINDS:
        raise ValueError(f"unknown grid kind {kind!r}")
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if resolution < 4 or resolution % 2:
        raise ValueError(f"resolution must be even and >= 4, got {resolution}")
    if kind == "uniform_circle" and dim != 2:
        raise ValueError("uniform_circle grids exist only for dim = 2")
    if kind == "gauss_product" and dim != 3:
        raise ValueError("gauss_product grids exist only for dim = 3")

    if kind == "uniform_circle":
        theta = 2.0 * math.pi * np.arange(resolution) / resolution
        nodes = np.column_stack([np.cos(theta), np.sin(theta)])
        weights = np.full(resolution, 2.0 * math.pi / resolution)
        half = resolution // 2
        antipode = (np.arange(resolution) + half) % resolution
        nodes = _symmetrize(nodes, antipode)
        return SphereGrid(dim, nodes, weights, kind, resolution, None, antipode)

    if kind == "gauss_product":
        z, wz = np.polynomial.legendre.leggauss(resolution)
        naz = 2 * resolution
        phi = math.pi * np.arange(naz) / resolution
        zz, pp = np.meshgrid(z, phi, indexing="ij")
        rho = np.sqrt(1.0 - zz**2)
        nodes = np.column_stack([(rho * np.cos(pp)).ravel(), (rho * np.sin(pp)).ravel(), zz.ravel()])
        # leggauss weights are symmetric only to rounding; symmetrize so antipodal weights match exactly
        wz = 0.5 * (wz + wz[::-1])
        weights = np.outer(wz, np.full(naz, 2.0 * math.pi / naz)).ravel()
        iz, ip = np.meshgrid(np.arange(resolution), np.arange(naz), indexing="ij")
        antipode = ((resolution - 1 - iz) * naz + (ip + resolution) % naz).ravel()
        # enforce exact antipodal coordinates
        nodes = _symmetrize(nodes, antipode)
        return SphereGrid(dim, nodes, weights, kind, resolution, None, antipode)

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    half = resolution // 2
    g = rng.standard_normal((half, dim))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    nodes = np.concatenate([g, -g])
    weights = np.full(resolution, sphere_area(dim) / resolution)
    antipode = np.concatenate([np.arange(half) + half, np.arange(half)])
    return SphereGrid(dim, nodes, weights, kind, resolution, seed, antipode)


def _symmetrize(nodes, antipode):
    out = nodes.copy()
    first = np.arange(len(nodes)) < antipode
    out[antipode[first]] = -out[first]
    return out


def integrate(grid: SphereGrid, values) -> float:
    """Quadrature of nodal ``values`` over the sphere."""
    v = np.asarray(values, dtype=float)
    if v.shape != (len(grid),):
        raise ValueError(f"expected {len(grid)} nodal values, got shape {v.shape}")
    return pairwise_sum(grid.weights * v)


def standard_error(grid: SphereGrid, values) -> float:
    """Monte Carlo standard error of :func:`integrate`; zero for deterministic grids.

    Antipodal pairs are treated as one antithetic sample.
    """
    if grid.kind != "monte_carlo":
        return 0.0
    v = np.asarray(values, dtype=float)
    half = len(grid) // 2
    pairs = 0.5 * (v[:half] + v[half:]) * sphere_area(grid.dim)
    return float(np.std(pairs, ddof=1) / math.sqrt(half))


def _check_unit(u: np.ndarray):
    norms = np.linalg.norm(u, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-12):
        raise ValueError("tangent frame requested at a non-unit vector")


def tangent_frame(u) -> np.ndarray:
    """Orthonormal basis of the tangent space at ``u``.

    Returns an (n, n-1) array whose columns are the images of
    e_1, ..., e_{n-1} under the Householder reflection sending e_n to
    ``u``.  At ``u = -e_n`` the frame (-e_1, e_2, ..., e_{n-1}) is used.
    """
    u = np.asarray(u, dtype=float)
    return tangent_frames(u[None, :])[0]


def tangent_frames(nodes: np.ndarray) -> np.ndarray:
    """Vectorized :func:`tangent_frame` over an (m, n) array of unit vectors."""
    nodes = np.asarray(nodes, dtype=float)
    _check_unit(nodes)
    m, n = nodes.shape
    w = -nodes.copy()
    w[:, -1] += 1.0
    ww = np.einsum("ij,ij->i", w, w)
    eye = np.eye(n)[:, : n - 1]
    frames = np.broadcast_to(eye, (m, n, n - 1)).copy()
    ok = ww > 0.0
    # H e_i = e_i - 2 w w_i / |w|^2
    coef = np.zeros_like(ww)
    coef[ok] = 2.0 / ww[ok]
    frames -= coef[:, None, None] * w[:, :, None] * w[:, None, : n - 1]
    south = np.all(np.abs(nodes[:, :-1]) == 0.0, axis=1) & (nodes[:, -1] == -1.0)
    if np.any(south):
        frames[south] = eye
        frames[south, 0, 0] = -1.0
    return frames
