"""Homogeneous polynomials in R^n and real solid harmonics on S^2."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


class Polynomial:
    """Sparse polynomial ``sum coef * x^exps`` in ``dim`` variables."""

    def __init__(self, terms: dict[tuple[int, ...], float], dim: int):
        self.dim = dim
        self.terms = {e: float(c) for e, c in terms.items() if c != 0.0}
        for e in self.terms:
            if len(e) != dim or min(e) < 0:
                raise ValueError(f"bad exponent tuple {e} for dim {dim}")

    @classmethod
    def monomial(cls, exps, coef=1.0):
        exps = tuple(int(a) for a in exps)
        return cls({exps: coef}, len(exps))

    def __add__(self, other):
        out = dict(self.terms)
        for e, c in other.terms.items():
            out[e] = out.get(e, 0.0) + c
        return Polynomial(out, self.dim)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial({e: c * other for e, c in self.terms.items()}, self.dim)
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0.0) + c1 * c2
        return Polynomial(out, self.dim)

    __rmul__ = __mul__

    def degrees(self) -> set[int]:
        return {sum(e) for e in self.terms}

    @property
    def degree(self) -> int:
        """Degree of a homogeneous polynomial (0 for the zero polynomial)."""
        degs = self.degrees()
        if len(degs) > 1:
            raise ValueError("polynomial is not homogeneous")
        return degs.pop() if degs else 0

    def laplacian(self) -> "Polynomial":
        out: dict = {}
        for e, c in self.terms.items():
            for i, a in enumerate(e):
                if a >= 2:
                    f = list(e)
                    f[i] -= 2
                    f = tuple(f)
                    out[f] = out.get(f, 0.0) + c * a * (a - 1)
        return Polynomial(out, self.dim)

    def jet(self, x: np.ndarray):
        """Value, gradient and Hessian at the rows of ``x`` (shape (m, dim))."""
        m, n = x.shape
        val = np.zeros(m)
        grad = np.zeros((m, n))
        hess = np.zeros((m, n, n))
        if not self.terms:
            return val, grad, hess
        exps = np.array(list(self.terms.keys()), dtype=int)
        coefs = np.array(list(self.terms.values()))
        top = int(exps.max())
        # powers[k] = x**k, shape (top+1, m, n)
        powers = np.ones((top + 1, m, n))
        for k in range(1, top + 1):
            powers[k] = powers[k - 1] * x
        for e, c in zip(exps, coefs):
            f = powers[e, :, np.arange(n)].T  # (m, n): x_i ** e_i
            df = np.where(e > 0, e * powers[np.maximum(e - 1, 0), :, np.arange(n)].T, 0.0)
            d2f = np.where(e > 1, e * (e - 1) * powers[np.maximum(e - 2, 0), :, np.arange(n)].T, 0.0)
            val += c * np.prod(f, axis=1)
            for i in range(n):
                others = np.prod(np.delete(f, i, axis=1), axis=1)
                grad[:, i] += c * df[:, i] * others
                hess[:, i, i] += c * d2f[:, i] * others
                for j in range(i + 1, n):
                    rest = np.prod(np.delete(f, [i, j], axis=1), axis=1)
                    h = c * df[:, i] * df[:, j] * rest
                    hess[:, i, j] += h
                    hess[:, j, i] += h
        return val, grad, hess


def sphere_monomial_integral(exps) -> float:
    """Exact integral of ``prod u_i**a_i`` over S^{n-1}."""
    exps = [int(a) for a in exps]
    if any(a % 2 for a in exps):
        return 0.0
    num = 2.0 * math.prod(math.gamma((a + 1) / 2) for a in exps)
    return num / math.gamma((sum(exps) + len(exps)) / 2)


def sphere_integral(poly: Polynomial) -> float:
    return sum(c * sphere_monomial_integral(e) for e, c in poly.terms.items())


MAX_DEGREE = 8


@lru_cache(maxsize=None)
def solid_harmonic(l: int, m: int) -> Polynomial:
    """Real solid harmonic r^l Y_{l,m} as a polynomial in (x, y, z).

    Normalized so that its restriction to S^2 has unit L^2 norm.  ``m > 0``
    carries the cos(m phi) dependence, ``m < 0`` the sin(|m| phi) one.
    """
    if not 0 <= l <= MAX_DEGREE or abs(m) > l:
        raise ValueError(f"harmonic index (l={l}, m={m}) out of range (l <= {MAX_DEGREE})")
    am = abs(m)
    r2 = Polynomial({(2, 0, 0): 1.0, (0, 2, 0): 1.0, (0, 0, 2): 1.0}, 3)
    pi_lm = Polynomial({}, 3)
    for k in range((l - am) // 2 + 1):
        c = (
            (-1) ** k
            * math.comb(l, k)
            * math.comb(2 * l - 2 * k, l)
            * math.factorial(l - 2 * k)
            / math.factorial(l - 2 * k - am)
        )
        term = Polynomial.monomial((0, 0, l - 2 * k - am), c)
        for _ in range(k):
            term = term * r2
        pi_lm = pi_lm + term
    # Re / Im of (x + i y)^|m|
    ang: dict = {}
    for p in range(am + 1):
        q = am - p
        phase = math.cos(q * math.pi / 2) if m >= 0 else math.sin(q * math.pi / 2)
        phase = round(phase)
        if phase:
            ang[(p, q, 0)] = math.comb(am, p) * phase
    poly = pi_lm * Polynomial(ang, 3)
    norm2 = sphere_integral(poly * poly)
    return poly * (1.0 / math.sqrt(norm2))
