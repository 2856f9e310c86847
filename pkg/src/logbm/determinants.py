"""Determinants and first/second derivatives of det with respect to entries.

Entries are treated as independent variables (no symmetrization), so
``cofactor(A)[j, k] = d det / d a_jk`` and
``cofactor2(A)[j, k, r, s] = d^2 det / d a_jk d a_rs``.

The permutation-sum routines (``*_oracle``) evaluate the generalized
Kronecker-delta formulas term by term and are the ground truth in tests.
Production routines take the inverse route for well-conditioned input
and fall back to exact minor expansions near singularity.  All
production routines accept a batch of matrices with shape (..., N, N).
"""

from __future__ import annotations

import math
from itertools import permutations

import numpy as np

ORACLE_MAX_ORDER = 5
SINGULAR_RTOL = 1e-8


def _parity(seq) -> int:
    """Sign of a permutation given as a sequence of distinct integers."""
    seq = list(seq)
    inversions = sum(a > b for i, a in enumerate(seq) for b in seq[i + 1 :])
    return -1 if inversions % 2 else 1


def kronecker_delta(upper, lower) -> int:
    """Generalized Kronecker symbol delta(upper; lower).

    1 (resp. -1) when the entries of ``upper`` are distinct and ``lower``
    is an even (resp. odd) permutation of ``upper``; 0 otherwise.
    """
    if len(set(upper)) != len(upper) or sorted(upper) != sorted(lower):
        return 0
    return _parity(upper) * _parity(lower)


def _check_square(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return a


def det_oracle(a) -> float:
    """det(A) = (1/N!) sum delta(j; k) a_{j1 k1} ... a_{jN kN}.

    Only index tuples with a nonzero symbol contribute; those are pairs of
    permutations of {0, ..., N-1}.
    """
    a = _check_square(a)
    n = a.shape[0]
    if n > ORACLE_MAX_ORDER:
        raise ValueError(f"permutation-sum determinant limited to N <= {ORACLE_MAX_ORDER}")
    perms = list(permutations(range(n)))
    signs = [_parity(p) for p in perms]
    total = 0.0
    for j, sj in zip(perms, signs):
        for k, sk in zip(perms, signs):
            total += sj * sk * math.prod(a[j[i], k[i]] for i in range(n))
    return total / math.factorial(n)


def cofactor_oracle(a) -> np.ndarray:
    """c_jk = 1/(N-1)! sum delta(j, j_1..; k, k_1..) a_{j_1 k_1} ... (permutation sum)."""
    a = _check_square(a)
    n = a.shape[0]
    if n > ORACLE_MAX_ORDER:
        raise ValueError(f"permutation-sum cofactor limited to N <= {ORACLE_MAX_ORDER}")
    out = np.zeros((n, n))
    for j in range(n):
        rows = [i for i in range(n) if i != j]
        for k in range(n):
            cols = [i for i in range(n) if i != k]
            acc = 0.0
            for jp in permutations(rows):
                sj = kronecker_delta((j, *jp), tuple(range(n)))
                for kp in permutations(cols):
                    sk = kronecker_delta((k, *kp), tuple(range(n)))
                    acc += sj * sk * math.prod(a[jp[i], kp[i]] for i in range(n - 1))
            out[j, k] = acc / math.factorial(n - 1)
    return out


def cofactor2_oracle(a) -> np.ndarray:
    """c_{jk,rs} = 1/(N-2)! sum delta(r, j, ..; s, k, ..) a .. a (permutation sum)."""
    a = _check_square(a)
    n = a.shape[0]
    if n < 2:
        raise ValueError("second cofactors need N >= 2")
    if n > ORACLE_MAX_ORDER:
        raise ValueError(f"permutation-sum cofactor limited to N <= {ORACLE_MAX_ORDER}")
    out = np.zeros((n, n, n, n))
    ref = tuple(range(n))
    for j in range(n):
        for r in range(n):
            if r == j:
                continue
            rows = [i for i in range(n) if i not in (j, r)]
            for k in range(n):
                for s in range(n):
                    if s == k:
                        continue
                    cols = [i for i in range(n) if i not in (k, s)]
                    acc = 0.0
                    for jp in permutations(rows):
                        sj = kronecker_delta((r, j, *jp), ref)
                        for kp in permutations(cols):
                            sk = kronecker_delta((s, k, *kp), ref)
                            acc += sj * sk * math.prod(a[jp[i], kp[i]] for i in range(n - 2))
                    out[j, k, r, s] = acc / math.factorial(n - 2)
    return out


def det(a) -> np.ndarray:
    return np.linalg.det(np.asarray(a, dtype=float))


def _singular_mask(a, d):
    norm = np.linalg.norm(a, ord=2, axis=(-2, -1)) if a.shape[-1] else np.zeros(a.shape[:-2])
    n = a.shape[-1]
    return np.abs(d) <= SINGULAR_RTOL * np.maximum(norm, 1e-300) ** n


def _minor_det(a, rows, cols):
    sub = np.delete(np.delete(a, rows, axis=0), cols, axis=1)
    return np.linalg.det(sub) if sub.size else 1.0


def _cofactor_minors(a):
    n = a.shape[0]
    out = np.zeros((n, n))
    for j in range(n):
        for k in range(n):
            out[j, k] = (-1) ** (j + k) * _minor_det(a, [j], [k])
    return out


def _cofactor2_minors(a):
    n = a.shape[0]
    out = np.zeros((n, n, n, n))
    for j in range(n):
        for r in range(n):
            if r == j:
                continue
            for k in range(n):
                for s in range(n):
                    if s == k:
                        continue
                    sign = np.sign(r - j) * np.sign(s - k) * (-1) ** (j + k + r + s)
                    out[j, k, r, s] = sign * _minor_det(a, [j, r], [k, s])
    return out


def cofactor(a) -> np.ndarray:
    """Cofactor matrix d det / d a_jk; equals det(A) A^{-T} for invertible A.

    Accepts shape (N, N) or a batch (..., N, N).
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    if n == 1:
        return np.ones_like(a)
    d = np.linalg.det(a)
    sing = _singular_mask(a, d)
    out = np.empty_like(a)
    ok = ~sing
    if np.any(ok):
        inv = np.linalg.inv(a[ok])
        out[ok] = d[ok][..., None, None] * np.swapaxes(inv, -1, -2)
    if np.any(sing):
        flat_a = a[sing].reshape(-1, n, n)
        out[sing] = np.stack([_cofactor_minors(m) for m in flat_a]).reshape(out[sing].shape)
    return out


def cofactor2(a) -> np.ndarray:
    """Second derivatives of det, shape (..., N, N, N, N) indexed [j, k, r, s].

    Invertible case: c_{jk,rs} = det(A) (B_kj B_sr - B_sj B_kr) with B = A^{-1}.
    """
    a = np.asarray(a, dtype=float)
    n = a.shape[-1]
    if n < 2:
        raise ValueError("second cofactors need N >= 2")
    d = np.linalg.det(a)
    sing = _singular_mask(a, d)
    out = np.empty(a.shape[:-2] + (n, n, n, n))
    ok = ~sing
    if np.any(ok):
        b = np.linalg.inv(a[ok])
        dd = d[ok][..., None, None, None, None]
        # B_kj B_sr -> [j,k,r,s]
        t1 = np.einsum("...kj,...sr->...jkrs", b, b)
        t2 = np.einsum("...sj,...kr->...jkrs", b, b)
        out[ok] = dd * (t1 - t2)
    if np.any(sing):
        flat_a = a[sing].reshape(-1, n, n)
        out[sing] = np.stack([_cofactor2_minors(m) for m in flat_a]).reshape(out[sing].shape)
    return out


def contract2(c2, x, y) -> np.ndarray:
    """sum_{jkrs} c_{jk,rs} x_jk y_rs over a batch."""
    return np.einsum("...jkrs,...jk,...rs->...", c2, x, y)
