"""Acceptance criteria, one test each.

Every test appends a ``PASS``/``FAIL criterion k`` line to the shared log
before asserting; the lines are printed in the terminal summary.
"""
import math
import time
from itertools import permutations

import numpy as np
import pytest
import sympy
from sympy.combinatorics import Permutation
from helpers import random_even_harmonic, rel_err

from logbm import body as bodies
from logbm.determinants import cofactor, cofactor2
from logbm.experiments import SHIPPED_IBP1, SHIPPED_IBP2, cofactor_identity_errors
from logbm.fields import Const, Ellipsoid, Exp, Harmonic, Linear, Monomial, Scale, Sum, c2_norm
from logbm.oracles import fd_derivative, mc_volume
from logbm.sphere import build_grid, integrate, sphere_area
from logbm.variation import (
    PreconditionError, concavity_scan, ibp1_residual, ibp2_residual, log_bm_check, log_f_derivatives,
    log_minkowski_chain, path_point, poincare_gap, rho_threshold, third_ratio, volume_path,
)

# summed rounding of a quadrature of O(1) terms; below this "non-increasing" is not resolvable
IBP_FLOOR = 1e-13


def record(log, k, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    log.append(line)
    print(line)
    return ok


def test_criterion_01_volume(grid32, acceptance_log):
    t0 = time.perf_counter()
    ball = bodies.volume(bodies.validate_support(Const(1.0, 3), grid32))
    ell_h = Ellipsoid([1.0, 1.2, 0.8])
    ell = bodies.volume(bodies.validate_support(ell_h, grid32))
    mc_ball = mc_volume(Const(1.0, 3), grid32, 1_000_000, seed=0)
    mc_ell = mc_volume(ell_h, grid32, 1_000_000, seed=0)
    elapsed = time.perf_counter() - t0
    e_ball = abs(ball - 4 * math.pi / 3)
    e_ell = abs(ell - 4 * math.pi * 0.96 / 3)
    z_ball = abs(mc_ball.value - ball) / mc_ball.std_error
    z_ell = abs(mc_ell.value - ell) / mc_ell.std_error
    ok = e_ball <= 1e-10 and e_ell <= 1e-6 and z_ball <= 3 and z_ell <= 3 and elapsed <= 10
    record(acceptance_log, 1, ok, f"ball err {e_ball:.1e}, ellipsoid err {e_ell:.1e}, "
           f"MC z {z_ball:.2f}/{z_ell:.2f}, {elapsed:.1f}s")
    assert ok


def test_criterion_02_derivatives(grid32, acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = np.zeros(4)
    norms = []
    for _ in range(10):
        # a nonzero degree-0 component keeps f'(0) away from 0 so relative errors are defined
        psi = random_even_harmonic(rng, grid32, 0.1, constant=float(rng.uniform(0.5, 1.0)))
        norms.append(c2_norm(psi, grid32))
        jet = psi.jet(grid32.nodes)
        f = lambda s: path_point(jet, grid32, s)[0]
        f2 = lambda s: path_point(jet, grid32, s)[2]
        for s in (-1.0, 0.0, 1.0):
            _, d1, d2, d3, _ = path_point(jet, grid32, s)
            worst = np.maximum(worst, [
                rel_err(d1, fd_derivative(f, s, 1, 1e-3)),
                rel_err(d2, fd_derivative(f, s, 2, 1e-3)),
                rel_err(d3, fd_derivative(f2, s, 1, 1e-3)),
                rel_err(d3, fd_derivative(f, s, 3, 5e-2)),
            ])
    elapsed = time.perf_counter() - t0
    # the third difference of f itself sits on a rounding floor of ~1e-8 absolute
    # while f''' is ~1e-6 here, so it is reported but not gated
    ok = (max(norms) <= 0.1 + 1e-12 and worst[0] <= 1e-5 and worst[1] <= 1e-5
          and worst[2] <= 1e-4 and elapsed <= 60)
    record(acceptance_log, 2, ok, f"rel err f' {worst[0]:.1e}, f'' {worst[1]:.1e}, "
           f"f''' {worst[2]:.1e} (difference of f''; third difference of f: {worst[3]:.1e}), {elapsed:.1f}s")
    assert ok


def test_criterion_03_base_point(grid32, acceptance_log):
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10):
        psi = Sum([random_even_harmonic(rng, grid32, 0.2, constant=0.3), Scale(0.05, Harmonic(3, -2))])
        jet = psi.jet(grid32.nodes)
        vals = jet.val
        grad = jet.grad  # 0-homogeneous extension: the ambient gradient is tangential
        p = volume_path(psi, grid32, [0.0])
        expect1 = integrate(grid32, vals)
        expect2 = integrate(grid32, 3 * vals**2 - np.einsum("ij,ij->i", grad, grad))
        worst = max(worst, abs(p.f1[0] - expect1), abs(p.f2[0] - expect2))
    worst_rel = 0.0
    for t in (0.01, 0.1, 0.3):
        psi = Scale(t, Sum([Scale(3.0, Monomial((0, 0, 2))), Const(-1.0, 3)]))
        f2 = volume_path(psi, grid32, [0.0]).f2[0]
        worst_rel = max(worst_rel, rel_err(f2, -48 * math.pi * t**2 / 5))
    ok = worst <= 1e-9 and worst_rel <= 1e-8
    record(acceptance_log, 3, ok, f"identity err {worst:.1e}, zonal f''(0) rel err {worst_rel:.1e}")
    assert ok


def _symbolic_cofactor2_error(n, rng):
    syms = sympy.symbols(f"a0:{n * n}")
    m = [list(syms[i * n:(i + 1) * n]) for i in range(n)]
    det = sum(
        Permutation(list(p)).signature() * sympy.Mul(*[m[i][p[i]] for i in range(n)])
        for p in permutations(range(n))
    )
    a = rng.uniform(-1, 1, (n, n))
    a = 0.5 * (a + a.T)
    subs = {syms[i * n + j]: a[i, j] for i in range(n) for j in range(n)}
    c2 = cofactor2(a)
    worst = 0.0
    for j in range(n):
        for k in range(n):
            d1 = sympy.diff(det, m[j][k])
            for r in range(n):
                for s in range(n):
                    worst = max(worst, abs(float(sympy.diff(d1, m[r][s]).subs(subs)) - c2[j, k, r, s]))
    return worst


def test_criterion_04_cofactors(acceptance_log):
    exact = all(np.array_equal(cofactor(np.eye(n)), np.eye(n)) for n in range(1, 6))
    errs = cofactor_identity_errors(seed=0, count=100, max_order=5)
    rng = np.random.default_rng(11)
    sym = max(_symbolic_cofactor2_error(n, rng) for n in (2, 3, 4))
    ok = exact and errs["euler_first"] <= 1e-10 and errs["euler_second"] <= 1e-10 and sym <= 1e-11
    record(acceptance_log, 4, ok, f"c(I) exact {exact}, Euler errs {errs['euler_first']:.1e}/"
           f"{errs['euler_second']:.1e}, symbolic err {sym:.1e}")
    assert ok


def test_criterion_05_ibp(grid16, grid32, acceptance_log):
    rows = []
    for make in [m for _, m in SHIPPED_IBP1]:
        args = make()
        rows.append((ibp1_residual(*args, grid16), ibp1_residual(*args, grid32)))
    for make in [m for _, m in SHIPPED_IBP2]:
        args = make()
        rows.append((ibp2_residual(*args, grid16), ibp2_residual(*args, grid32)))
    small = all(r32 <= 1e-6 for _, r32 in rows)
    monotone = all(r32 <= max(r16, IBP_FLOOR) for r16, r32 in rows)
    ok = small and monotone
    detail = ", ".join(f"{r16:.1e}->{r32:.1e}" for r16, r32 in rows)
    record(acceptance_log, 5, ok, f"residuals 16->32: {detail}")
    assert ok


def test_criterion_06_poincare(grid32, acceptance_log):
    eq = max(abs(poincare_gap(Harmonic(2, m), grid32)) for m in range(-2, 3))
    gaps4 = [poincare_gap(Sum([Harmonic(2, 0), Scale(0.05, Harmonic(4, m))]), grid32) for m in range(-4, 5)]
    try:
        poincare_gap(Scale(0.1, Linear([0.0, 0.0, 1.0])), grid32)
        gated = False
    except PreconditionError:
        gated = True
    ok = eq <= 1e-9 and min(gaps4) > 0 and gated
    record(acceptance_log, 6, ok, f"Y2 gap {eq:.1e}, min degree-4 gap {min(gaps4):.2e}, odd rejected {gated}")
    assert ok


def test_criterion_07_local_concavity(grid32, acceptance_log):
    t0 = time.perf_counter()
    rng = np.random.default_rng(77)
    max_logf2, min_deficit, strict = -np.inf, np.inf, True
    for _ in range(20):
        psi = random_even_harmonic(rng, grid32, 0.05)
        assert abs(integrate(grid32, psi(grid32.nodes))) < 1e-14
        path = volume_path(psi, grid32)
        rep = log_bm_check(bodies.validate_support(Exp(psi), grid32), 1.0)
        max_logf2 = max(max_logf2, path.logf2.max())
        min_deficit = min(min_deficit, rep.deficits.min())
        strict = strict and path.logf2.min() < -1e-8
    elapsed = time.perf_counter() - t0
    ok = max_logf2 <= 1e-8 and min_deficit >= -1e-8 and strict and elapsed <= 300
    record(acceptance_log, 7, ok, f"max logf2 {max_logf2:.2e}, min deficit {min_deficit:.2e}, "
           f"strict {strict}, {elapsed:.1f}s")
    assert ok


def test_criterion_08_symmetry_necessity(grid32, acceptance_log):
    psi = Scale(0.1, Linear([0.0, 0.0, 1.0]))
    logf2 = log_f_derivatives(volume_path(psi, grid32, [0.0]), 0.0)[0]
    verdict = concavity_scan(psi, grid32).verdict
    err = rel_err(logf2, 0.01)
    ok = err <= 1e-6 and verdict == "violated"
    record(acceptance_log, 8, ok, f"logf2(0) = {logf2:.12f} (rel err {err:.1e}), verdict {verdict}")
    assert ok


def test_criterion_09_third_ratio(grid32, acceptance_log):
    scales = (0.05, 0.1, 0.2)
    rho = {t: third_ratio(Scale(t, Harmonic(2, 0)), grid32) for t in scales}
    threshold = rho_threshold(3)
    implication = all(
        concavity_scan(Scale(t, Harmonic(2, 0)), grid32).verdict != "violated"
        for t in scales if rho[t] < threshold
    )
    ok = rho[0.05] < rho[0.2] and implication
    record(acceptance_log, 9, ok, f"rho {', '.join(f'{t}: {r:.3e}' for t, r in rho.items())}; "
           f"threshold {threshold:.3e}; implication holds {implication}")
    assert ok


def test_criterion_10_chain(grid32, acceptance_log):
    ball = log_minkowski_chain(bodies.ball(1.0, grid32), 1.0)
    h = Exp(Scale(0.05, Harmonic(2, 0)))
    c = (4 * math.pi / 3 / bodies.volume(bodies.validate_support(h, grid32))) ** (1 / 3)
    local = log_minkowski_chain(bodies.validate_support(Scale(c, h), grid32), 1.0)
    ok = abs(ball.first_gap) <= 1e-10 and abs(ball.second_gap) <= 1e-10 and local.first_gap >= -1e-8
    record(acceptance_log, 10, ok, f"ball gaps {ball.first_gap:.1e}/{ball.second_gap:.1e}, "
           f"local first gap {local.first_gap:.3e}")
    assert ok
