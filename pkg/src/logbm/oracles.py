"""Brute-force oracles, independent of the quadrature/cofactor route.

* :func:`mc_volume` -- rejection sampling against the supporting
  half-spaces at the grid nodes (an outer polytope, so it over-estimates).
* :func:`fd_derivative` -- central finite-difference stencils.
* :func:`fd_curvature_matrix` -- curvature matrix from second differences
  of the 1-homogeneous extension, evaluated in extended precision from
  the field's JSON description.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .fields import Field
from .polynomials import solid_harmonic
from .sphere import SphereGrid, sphere_area, tangent_frame

MIN_SAMPLES = 10_000
STREAMS = 16
_CHUNK = 20_000
_COARSE_STRIDE = 16

# f''' stencil at offsets -3..3, O(step^4)
_THIRD_STENCIL = np.array([1 / 8, -1.0, 13 / 8, 0.0, -13 / 8, 1.0, -1 / 8])


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    samples: int
    seed: int


def mc_volume(h: Field, grid: SphereGrid, samples: int = 1_000_000, seed: int = 0) -> McEstimate:
    """Volume of {x : <x, u_i> <= h(u_i) for every node u_i} by rejection sampling.

    The sampling box is [-h(-e_i), h(e_i)] per axis, which contains the
    body.  Points are drawn from ``STREAMS`` independent PCG64 streams
    spawned from ``seed``; tallies are merged in stream order, so the
    estimate does not depend on how the streams are scheduled.
    """
    if samples < MIN_SAMPLES:
        raise ValueError(f"mc_volume needs at least {MIN_SAMPLES} samples")
    n = grid.dim
    nodes = grid.nodes
    hv = h(nodes)
    eye = np.eye(n)
    hi = np.maximum(h(eye), (nodes * hv[:, None]).max(axis=0))
    lo = -np.maximum(h(-eye), (-nodes * hv[:, None]).max(axis=0))
    box = float(np.prod(hi - lo))
    inner = float(hv.min())  # the ball of this radius lies inside the body
    coarse, coarse_h = nodes[::_COARSE_STRIDE], hv[::_COARSE_STRIDE]

    counts = np.array_split(np.arange(samples), STREAMS)
    seqs = np.random.SeedSequence(seed).spawn(STREAMS)
    hits = 0
    for idx, ss in zip(counts, seqs):
        rng = np.random.Generator(np.random.PCG64(ss))
        remaining = idx.size
        while remaining:
            k = min(_CHUNK, remaining)
            x = lo + (hi - lo) * rng.random((k, n))
            r = np.linalg.norm(x, axis=1)
            inside = r <= inner
            # a coarse subset of half-spaces rejects most outside points cheaply
            rest = np.flatnonzero(~inside)
            if rest.size:
                keep = np.all(x[rest] @ coarse.T <= coarse_h, axis=1)
                rest = rest[keep]
            if rest.size:
                inside[rest] = np.all(x[rest] @ nodes.T <= hv, axis=1)
            hits += int(inside.sum())
            remaining -= k
    p = hits / samples
    value = box * p
    std = box * math.sqrt(p * (1.0 - p) / samples)
    return McEstimate(value, std, samples, seed)


def mc_ellipsoid_surface_area(axes, samples: int = 200_000, seed: int = 0) -> McEstimate:
    """Surface area of diag(axes) B by pushing uniform sphere samples forward.

    For x = A v with v on the unit sphere the area element is
    det(A) |A^{-1} v| dv.
    """
    a = np.asarray(axes, dtype=float)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    v = rng.standard_normal((samples, a.size))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    vals = np.prod(a) * np.linalg.norm(v / a, axis=1) * sphere_area(a.size)
    return McEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)), samples, seed)


def fd_derivative(f_sampler, s: float, order: int, step: float) -> float:
    """Central difference of order 1, 2 (3-point) or 3 (7-point) at ``s``."""
    if step <= 0:
        raise ValueError("step must be positive")
    if order == 1:
        return (f_sampler(s + step) - f_sampler(s - step)) / (2.0 * step)
    if order == 2:
        return (f_sampler(s + step) - 2.0 * f_sampler(s) + f_sampler(s - step)) / step**2
    if order == 3:
        vals = [f_sampler(s + k * step) for k in range(-3, 4)]
        return float(np.dot(_THIRD_STENCIL, vals)) / step**3
    raise ValueError(f"unsupported derivative order {order}")


# -- extended-precision field evaluation ---------------------------------------


def _mp_eval(doc: dict, x):
    """Value of the field's 0-homogeneous extension at the point ``x`` (mpf list)."""
    op = doc["op"]
    r = mpmath.sqrt(sum(xi * xi for xi in x))
    u = [xi / r for xi in x]
    if op == "const":
        return mpmath.mpf(doc["value"])
    if op == "linear":
        return sum(mpmath.mpf(v) * ui for v, ui in zip(doc["v"], u))
    if op == "monomial":
        return mpmath.mpf(doc.get("coef", 1.0)) * mpmath.fprod(ui**a for ui, a in zip(u, doc["exponents"]))
    if op in ("harmonic", "poly"):
        if op == "harmonic":
            terms = solid_harmonic(int(doc["l"]), int(doc.get("m", 0))).terms.items()
        else:
            terms = [(tuple(e), c) for e, c in doc["terms"]]
        return sum(mpmath.mpf(c) * mpmath.fprod(ui**a for ui, a in zip(u, e)) for e, c in terms)
    if op == "ellipsoid":
        a = [mpmath.mpf(v) for v in doc["axes"]]
        rot = doc.get("rotation")
        y = u if rot is None else [sum(mpmath.mpf(rot[i][j]) * u[i] for i in range(len(u))) for j in range(len(u))]
        return mpmath.sqrt(sum((ai * yi) ** 2 for ai, yi in zip(a, y)))
    if op == "sum":
        return sum(_mp_eval(t, x) for t in doc["terms"])
    if op == "prod":
        return mpmath.fprod(_mp_eval(t, x) for t in doc["factors"])
    if op == "scale":
        return mpmath.mpf(doc["c"]) * _mp_eval(doc["arg"], x)
    if op == "exp":
        return mpmath.exp(_mp_eval(doc["arg"], x))
    if op == "log":
        return mpmath.log(_mp_eval(doc["arg"], x))
    if op == "pow":
        return _mp_eval(doc["arg"], x) ** mpmath.mpf(doc["p"])
    raise ValueError(f"unknown field op {op!r}")


def fd_curvature_matrix(h: Field, u, step: float = 1e-5, dps: int = 40) -> np.ndarray:
    """Curvature matrix from central second differences of G(x) = |x| h(x/|x|).

    G is evaluated with ``dps`` significant digits, so the differences are
    limited by truncation (O(step^2)) rather than rounding.
    """
    u = np.asarray(u, dtype=float)
    doc = h.to_json()
    frame = tangent_frame(u)
    k = frame.shape[1]
    with mpmath.workdps(dps):
        base = [mpmath.mpf(float(c)) for c in u]
        vecs = [[mpmath.mpf(float(c)) for c in frame[:, i]] for i in range(k)]
        st = mpmath.mpf(step)

        def G(coeffs):
            x = [b + sum(c * v[d] for c, v in zip(coeffs, vecs)) for d, b in enumerate(base)]
            return mpmath.sqrt(sum(xi * xi for xi in x)) * _mp_eval(doc, x)

        q = np.zeros((k, k))
        for i in range(k):
            for j in range(i, k):
                def shifted(a, b):
                    c = [mpmath.mpf(0)] * k
                    c[i] += a * st
                    c[j] += b * st
                    return G(c)

                val = (shifted(1, 1) - shifted(1, -1) - shifted(-1, 1) + shifted(-1, -1)) / (4 * st * st)
                q[i, j] = q[j, i] = float(val)
    return q
