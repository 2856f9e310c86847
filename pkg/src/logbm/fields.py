"""Smooth fields on S^{n-1} with exact first and second derivatives.

A field is an immutable expression tree.  Evaluating it at unit vectors
returns a :class:`Jet`: the value, gradient and Hessian of the
0-homogeneous extension ``g0(x) = g(x / |x|)``.  Combinators propagate
jets by the chain and product rules, so curvature matrices of composite
fields (``exp(s * psi)``, ``psi * h``, geometric means, ...) are exact.

The curvature matrix uses the 1-homogeneous extension
``G(x) = |x| g0(x)``, whose Hessian at a unit vector ``u`` is::

    (I - u u^T) g + u dg0^T + dg0 u^T + D2g0

Restricted to an orthonormal tangent frame ``E`` this is
``g I + E^T D2g0 E``, i.e. the covariant Hessian plus ``g`` times the
identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .polynomials import Polynomial, solid_harmonic
from .sphere import SphereGrid, tangent_frame


class FieldDomainError(ValueError):
    """log or power applied to a field that is not strictly positive."""


@dataclass(frozen=True)
class Jet:
    val: np.ndarray  # (m,)
    grad: np.ndarray  # (m, n), tangential
    hess: np.ndarray  # (m, n, n)

    def __add__(self, other):
        return Jet(self.val + other.val, self.grad + other.grad, self.hess + other.hess)

    def scale(self, c):
        return Jet(c * self.val, c * self.grad, c * self.hess)


def _outer(a, b):
    return a[:, :, None] * b[:, None, :]


def jet_mul(a: Jet, b: Jet) -> Jet:
    val = a.val * b.val
    grad = a.val[:, None] * b.grad + b.val[:, None] * a.grad
    hess = (
        a.val[:, None, None] * b.hess
        + b.val[:, None, None] * a.hess
        + _outer(a.grad, b.grad)
        + _outer(b.grad, a.grad)
    )
    return Jet(val, grad, hess)


def jet_compose(a: Jet, f0, f1, f2) -> Jet:
    """Jet of ``phi(a)`` given phi, phi', phi'' evaluated at ``a.val``."""
    return Jet(
        f0,
        f1[:, None] * a.grad,
        f1[:, None, None] * a.hess + f2[:, None, None] * _outer(a.grad, a.grad),
    )


def jet_exp(a: Jet) -> Jet:
    e = np.exp(a.val)
    return jet_compose(a, e, e, e)


def jet_log(a: Jet) -> Jet:
    if np.any(a.val <= 0.0):
        raise FieldDomainError(f"log of a nonpositive field (min value {a.val.min():.3g})")
    inv = 1.0 / a.val
    return jet_compose(a, np.log(a.val), inv, -inv * inv)


def jet_pow(a: Jet, p: float) -> Jet:
    if np.any(a.val <= 0.0):
        raise FieldDomainError(f"power of a nonpositive field (min value {a.val.min():.3g})")
    v = a.val
    return jet_compose(a, v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))


def homogeneous_jet(u: np.ndarray, k: int, p, dp, d2p) -> Jet:
    """Jet of ``P(x) |x|^{-k}`` at unit rows ``u`` for ``P`` homogeneous of degree ``k``."""
    val = p
    pu = p[:, None] * u
    grad = dp - k * pu
    eye = np.eye(u.shape[1])
    hess = (
        d2p
        - k * (_outer(dp, u) + _outer(u, dp))
        + p[:, None, None] * (k * (k + 2) * _outer(u, u) - k * eye)
    )
    return Jet(val, grad, hess)


class Field:
    """Base class of the combinator algebra."""

    dim: int

    def jet(self, u: np.ndarray) -> Jet:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            return float(self.jet(u[None, :]).val[0])
        return self.jet(u).val

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Const(other, self.dim)
        return Sum([self, other])

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return Scale(-1.0, self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Scale(float(other), self)
        return Prod([self, other])

    __rmul__ = __mul__

    def exp(self):
        return Exp(self)

    def log(self):
        return Log(self)

    def __pow__(self, p):
        return Pow(self, float(p))

    def __repr__(self):
        return f"{type(self).__name__}({json.dumps(self.to_json())})"


class Const(Field):
    def __init__(self, value: float, dim: int):
        self.value = float(value)
        self.dim = dim

    def jet(self, u):
        m, n = u.shape
        return Jet(np.full(m, self.value), np.zeros((m, n)), np.zeros((m, n, n)))

    def to_json(self):
        return {"op": "const", "value": self.value}


class Linear(Field):
    """The restriction of x -> <x, v>."""

    def __init__(self, v):
        self.v = np.asarray(v, dtype=float)
        self.dim = self.v.size

    def jet(self, u):
        m, n = u.shape
        p = u @ self.v
        return homogeneous_jet(u, 1, p, np.broadcast_to(self.v, (m, n)), np.zeros((m, n, n)))

    def to_json(self):
        return {"op": "linear", "v": self.v.tolist()}


class PolyField(Field):
    """Restriction of a homogeneous polynomial."""

    def __init__(self, poly: Polynomial, spec: dict | None = None):
        self.poly = poly
        self.dim = poly.dim
        self.k = poly.degree
        self._spec = spec

    def jet(self, u):
        return homogeneous_jet(u, self.k, *self.poly.jet(u))

    def to_json(self):
        if self._spec is not None:
            return dict(self._spec)
        return {
            "op": "poly",
            "dim": self.dim,
            "terms": [[list(e), c] for e, c in self.poly.terms.items()],
        }


def Monomial(exps, coef: float = 1.0) -> PolyField:
    exps = [int(a) for a in exps]
    spec = {"op": "monomial", "exponents": exps}
    if coef != 1.0:
        spec["coef"] = coef
    return PolyField(Polynomial.monomial(exps, coef), spec)


def Harmonic(l: int, m: int = 0) -> PolyField:
    """Orthonormal real spherical harmonic Y_{l,m} on S^2."""
    return PolyField(solid_harmonic(l, m), {"op": "harmonic", "l": l, "m": m})


class Ellipsoid(Field):
    """Support function sqrt(u^T M u) of the ellipsoid M^{1/2} B.

    With ``axes`` only, M = diag(axes**2); ``rotation`` R gives
    M = R diag(axes**2) R^T.
    """

    def __init__(self, axes, rotation=None):
        self.axes = np.asarray(axes, dtype=float)
        if np.any(self.axes <= 0):
            raise ValueError("ellipsoid semi-axes must be positive")
        self.dim = self.axes.size
        self.rotation = None if rotation is None else np.asarray(rotation, dtype=float)
        m = np.diag(self.axes**2)
        if self.rotation is not None:
            m = self.rotation @ m @ self.rotation.T
        self.matrix = 0.5 * (m + m.T)

    def jet(self, u):
        mu = u @ self.matrix
        p = np.sqrt(np.einsum("ij,ij->i", u, mu))
        dp = mu / p[:, None]
        d2p = self.matrix[None] / p[:, None, None] - _outer(mu, mu) / p[:, None, None] ** 3
        return homogeneous_jet(u, 1, p, dp, d2p)

    def to_json(self):
        d = {"op": "ellipsoid", "axes": self.axes.tolist()}
        if self.rotation is not None:
            d["rotation"] = self.rotation.tolist()
        return d


class Sum(Field):
    def __init__(self, terms):
        self.terms = list(terms)
        self.dim = _common_dim(self.terms)

    def jet(self, u):
        out = self.terms[0].jet(u)
        for t in self.terms[1:]:
            out = out + t.jet(u)
        return out

    def to_json(self):
        return {"op": "sum", "terms": [t.to_json() for t in self.terms]}


class Prod(Field):
    def __init__(self, factors):
        self.factors = list(factors)
        self.dim = _common_dim(self.factors)

    def jet(self, u):
        out = self.factors[0].jet(u)
        for f in self.factors[1:]:
            out = jet_mul(out, f.jet(u))
        return out

    def to_json(self):
        return {"op": "prod", "factors": [f.to_json() for f in self.factors]}


class Scale(Field):
    def __init__(self, c: float, arg: Field):
        self.c = float(c)
        self.arg = arg
        self.dim = arg.dim

    def jet(self, u):
        return self.arg.jet(u).scale(self.c)

    def to_json(self):
        return {"op": "scale", "c": self.c, "arg": self.arg.to_json()}


class Exp(Field):
    def __init__(self, arg: Field):
        self.arg = arg
        self.dim = arg.dim

    def jet(self, u):
        return jet_exp(self.arg.jet(u))

    def to_json(self):
        return {"op": "exp", "arg": self.arg.to_json()}


class Log(Field):
    def __init__(self, arg: Field):
        self.arg = arg
        self.dim = arg.dim

    def jet(self, u):
        return jet_log(self.arg.jet(u))

    def to_json(self):
        return {"op": "log", "arg": self.arg.to_json()}


class Pow(Field):
    def __init__(self, arg: Field, p: float):
        self.arg = arg
        self.p = float(p)
        self.dim = arg.dim

    def jet(self, u):
        return jet_pow(self.arg.jet(u), self.p)

    def to_json(self):
        return {"op": "pow", "p": self.p, "arg": self.arg.to_json()}


def _common_dim(fields):
    if not fields:
        raise ValueError("empty combinator")
    dims = {f.dim for f in fields}
    if len(dims) != 1:
        raise ValueError(f"fields of mixed dimension {sorted(dims)}")
    return dims.pop()


def field_from_json(doc, dim: int | None = None) -> Field:
    """Parse the JSON field description (a dict or a JSON string).

    ``dim`` is needed only when the tree contains nothing but constants.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    op = doc.get("op")
    if op == "const":
        if dim is None:
            raise ValueError("a bare constant field needs an explicit dim")
        return Const(doc["value"], dim)
    if op == "linear":
        return Linear(doc["v"])
    if op == "monomial":
        return Monomial(doc["exponents"], doc.get("coef", 1.0))
    if op == "harmonic":
        if dim not in (None, 3):
            raise ValueError("harmonic fields exist only on S^2")
        return Harmonic(int(doc["l"]), int(doc.get("m", 0)))
    if op == "poly":
        poly = Polynomial({tuple(e): c for e, c in doc["terms"]}, int(doc["dim"]))
        return PolyField(poly)
    if op == "ellipsoid":
        return Ellipsoid(doc["axes"], doc.get("rotation"))
    if op in ("sum", "prod"):
        key = "terms" if op == "sum" else "factors"
        children = doc[key]
        if dim is None:
            dim = _infer_dim(children)
        parts = [field_from_json(c, dim) for c in children]
        return Sum(parts) if op == "sum" else Prod(parts)
    if op in ("scale", "exp", "log", "pow"):
        arg = field_from_json(doc["arg"], dim)
        if op == "scale":
            return Scale(doc["c"], arg)
        if op == "exp":
            return Exp(arg)
        if op == "log":
            return Log(arg)
        return Pow(arg, doc["p"])
    raise ValueError(f"unknown field op {op!r}")


def _infer_dim(docs):
    for d in docs:
        op = d.get("op")
        if op == "linear":
            return len(d["v"])
        if op == "monomial":
            return len(d["exponents"])
        if op == "harmonic":
            return 3
        if op == "poly":
            return int(d["dim"])
        if op == "ellipsoid":
            return len(d["axes"])
        for key in ("terms", "factors"):
            if key in d:
                got = _infer_dim(d[key])
                if got is not None:
                    return got
        if "arg" in d:
            got = _infer_dim([d["arg"]])
            if got is not None:
                return got
    return None


# -- pointwise and nodal geometry ------------------------------------------------


@dataclass(frozen=True)
class CurvatureMatrix:
    entries: np.ndarray  # (n-1, n-1)
    frame: np.ndarray  # (n, n-1), columns are frame vectors


def curvature_from_jet(jet: Jet, frames: np.ndarray) -> np.ndarray:
    """Q = g I + E^T D2g0 E at every node; shape (m, n-1, n-1)."""
    q = np.einsum("mai,mab,mbj->mij", frames, jet.hess, frames)
    q = 0.5 * (q + np.swapaxes(q, 1, 2))
    k = frames.shape[2]
    idx = np.arange(k)
    q[:, idx, idx] += jet.val[:, None]
    return q


def covariant_hessian_from_jet(jet: Jet, frames: np.ndarray) -> np.ndarray:
    """g_ij = E^T D2g0 E, the covariant Hessian in the frame."""
    q = np.einsum("mai,mab,mbj->mij", frames, jet.hess, frames)
    return 0.5 * (q + np.swapaxes(q, 1, 2))


def ambient_hessian(jet: Jet, u: np.ndarray) -> np.ndarray:
    """Hessian of the 1-homogeneous extension G at unit rows ``u``."""
    eye = np.eye(u.shape[1])
    return (
        jet.val[:, None, None] * (eye - _outer(u, u))
        + _outer(u, jet.grad)
        + _outer(jet.grad, u)
        + jet.hess
    )


def ambient_gradient(jet: Jet, u: np.ndarray) -> np.ndarray:
    return jet.val[:, None] * u + jet.grad


def _as_unit(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > 1e-12:
        raise ValueError("expected a unit vector")
    return u


def evaluate(g: Field, u) -> float:
    """g(u) at a single unit vector."""
    return float(g.jet(_as_unit(u)[None, :]).val[0])


def grad_s(g: Field, u) -> np.ndarray:
    """Spherical gradient of ``g`` at ``u`` as a tangent vector in R^n."""
    u = _as_unit(u)
    return g.jet(u[None, :]).grad[0]


def curvature_matrix(g: Field, u) -> CurvatureMatrix:
    u = _as_unit(u)
    frame = tangent_frame(u)
    q = curvature_from_jet(g.jet(u[None, :]), frame[None])[0]
    return CurvatureMatrix(q, frame)


def c2_norm(g: Field, grid: SphereGrid) -> float:
    """Grid surrogate of the C^2 norm: max|g| + max|grad g| + max sum_ij |g_ij|."""
    jet = g.jet(grid.nodes)
    gij = covariant_hessian_from_jet(jet, grid.frames)
    return float(
        np.max(np.abs(jet.val))
        + np.max(np.linalg.norm(jet.grad, axis=1))
        + np.max(np.sum(np.abs(gij), axis=(1, 2)))
    )


@dataclass(frozen=True)
class ExpPath:
    """h_s = exp(s psi) together with its s-derivatives psi^k h_s."""

    psi: Field
    s: float
    h: Field
    dh: Field
    d2h: Field
    d3h: Field


def exp_path(psi: Field, s: float) -> ExpPath:
    h = Exp(Scale(s, psi))
    return ExpPath(
        psi,
        s,
        h,
        Prod([psi, h]),
        Prod([psi, psi, h]),
        Prod([psi, psi, psi, h]),
    )


def is_even(g: Field, grid: SphereGrid, tol: float = 1e-10) -> bool:
    v = g(grid.nodes)
    return bool(np.max(np.abs(v - v[grid.antipode])) <= tol)


