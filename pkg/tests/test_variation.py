import math

import numpy as np
import pytest
from helpers import random_even_harmonic, rel_err

from logbm import body as bodies
from logbm.determinants import cofactor2
from logbm.fields import Const, Ellipsoid, Exp, Harmonic, Linear, Monomial, Scale, Sum, curvature_from_jet
from logbm.oracles import fd_derivative
from logbm.sphere import build_grid, integrate, sphere_area
from logbm.variation import (
    PreconditionError, concavity_scan, f_prime, f_second, f_third, ibp1_residual, ibp2_residual,
    log_bm_check, log_f_derivatives, log_minkowski_chain, path_point, poincare_gap, rho_threshold,
    s_grid, third_ratio, volume_at, volume_path,
)

E3 = [0.0, 0.0, 1.0]


def quadratic_zonal(t):
    """t (3 u3^2 - 1)."""
    return Scale(t, Sum([Scale(3.0, Monomial((0, 0, 2))), Const(-1.0, 3)]))


def test_path_of_constant(grid32):
    p = volume_path(Const(1.0, 3), grid32)
    np.testing.assert_allclose(p.f, 4 * math.pi / 3 * np.exp(3 * p.s), rtol=1e-13)
    assert np.abs(p.logf2).max() < 1e-9
    assert np.abs(p.logf3).max() < 1e-9
    np.testing.assert_allclose(p.f3, 27 * p.f, rtol=1e-8)


def test_path_of_zero(grid32):
    p = volume_path(Const(0.0, 3), grid32, [-1.0, 0.0, 2.0])
    np.testing.assert_allclose(p.f, sphere_area(3) / 3, rtol=1e-14)


def test_f_at_zero(grid32):
    p = volume_path(quadratic_zonal(0.1), grid32, [0.0])
    assert abs(p.f[0] - 4 * math.pi / 3) < 1e-10
    assert abs(f_prime(p, 0.0)) < 1e-14


def test_first_derivative_at_zero(grid32):
    psi = Sum([Scale(0.03, Harmonic(0, 0)), Scale(0.05, Harmonic(2, 1))])
    p = volume_path(psi, grid32, [0.0])
    assert abs(f_prime(p, 0.0) - integrate(grid32, psi(grid32.nodes))) < 1e-12


@pytest.mark.parametrize("t", [0.01, 0.1, 0.3])
def test_second_derivative_closed_forms(grid32, t):
    p = volume_path(quadratic_zonal(t), grid32, [0.0])
    assert f_second(p, 0.0) == pytest.approx(-48 * math.pi * t**2 / 5, rel=1e-10)
    z = grid32.nodes[:, 2]
    assert integrate(grid32, (t * (3 * z**2 - 1)) ** 2) == pytest.approx(16 * math.pi * t**2 / 5, rel=1e-12)
    q = volume_path(Scale(t, Linear(E3)), grid32, [0.0])
    assert f_second(q, 0.0) == pytest.approx(4 * math.pi * t**2 / 3, rel=1e-10)
    assert log_f_derivatives(q, 0.0)[0] == pytest.approx(t**2, rel=1e-10)


def test_second_derivative_at_zero_general(grid32):
    rng = np.random.default_rng(3)
    for _ in range(5):
        psi = Sum([random_even_harmonic(rng, grid32, 0.1), Scale(0.02, Harmonic(3, 1))])
        jet = psi.jet(grid32.nodes)
        p = volume_path(psi, grid32, [0.0])
        expected = integrate(grid32, 3 * jet.val**2 - np.einsum("ij,ij->i", jet.grad, jet.grad))
        assert abs(f_second(p, 0.0) - expected) < 1e-9


def test_derivatives_against_finite_differences(grid32):
    rng = np.random.default_rng(7)
    for _ in range(3):
        psi = random_even_harmonic(rng, grid32, 0.1, constant=0.15)
        jet = psi.jet(grid32.nodes)
        f = lambda s: path_point(jet, grid32, s)[0]
        f2 = lambda s: path_point(jet, grid32, s)[2]
        for s in (-1.0, 0.0, 1.0):
            _, d1, d2, d3, _ = path_point(jet, grid32, s)
            assert rel_err(d1, fd_derivative(f, s, 1, 1e-3)) < 1e-5
            assert rel_err(d2, fd_derivative(f, s, 2, 1e-3)) < 1e-5
            assert rel_err(d3, fd_derivative(f2, s, 1, 1e-3)) < 1e-4


def test_third_derivative_smooth_along_path(grid32):
    psi = Scale(0.1, Harmonic(2, 0))
    p = volume_path(psi, grid32)
    assert np.all(np.isfinite(p.f3))
    # no blow-up: second differences are small compared with the values
    assert np.abs(np.diff(p.f3, 2)).max() < 0.05 * np.abs(p.f3).max()
    for s in (-2.0, 0.0, 2.0):
        q = curvature_from_jet(Exp(Scale(s, psi)).jet(grid32.nodes), grid32.frames)
        # N = 2: the bound N! M^(N-2) is 2 regardless of M
        assert np.abs(cofactor2(q)).max() <= 2.0


def test_sample_lookup(grid32):
    p = volume_path(Const(0.5, 3), grid32, [0.0, 1.0])
    assert f_third(p, 1.0) == p.f3[1]
    with pytest.raises(ValueError):
        f_prime(p, 0.5)


def test_logf2_negative_in_local_regime(grid32):
    p = volume_path(Scale(0.05, Harmonic(2, 0)), grid32)
    assert p.s.size == 41
    assert np.all(p.logf2 < 0)


def test_path_rejects_nonconvex(grid32):
    with pytest.raises(bodies.SupportRejected) as info:
        volume_path(Scale(1.5, Harmonic(4, 0)), grid32)
    assert info.value.s is not None


def test_ibp1(grid32, grid16):
    h = Exp(Scale(0.1, Harmonic(2, 0)))
    psi = Harmonic(3, 1)
    assert ibp1_residual(h, psi, psi, grid32) == 0.0
    assert ibp1_residual(Const(1.0, 3), Harmonic(2, 0), Harmonic(4, 0), grid32) <= 1e-9
    x2 = Linear([1.0, 0, 0]) * Linear([1.0, 0, 0])
    r32 = ibp1_residual(h, x2, Harmonic(2, 0), grid32)
    r16 = ibp1_residual(h, x2, Harmonic(2, 0), grid16)
    assert r32 <= 1e-7
    assert r32 <= max(r16, 1e-13)


def test_ibp2(grid32, grid16):
    h = Exp(Scale(0.05, Harmonic(2, 0)))
    a, b = Harmonic(2, 1), Harmonic(4, 2)
    assert ibp2_residual(h, a, b, b, grid32) == 0.0
    assert ibp2_residual(Const(1.0, 3), Harmonic(2, 0), Harmonic(2, 1), Harmonic(4, 0), grid32) <= 1e-8
    triple = (Harmonic(2, 2), Harmonic(4, -1), Harmonic(2, -2))
    r32 = ibp2_residual(h, *triple, grid32)
    assert r32 <= 1e-7
    assert r32 <= max(ibp2_residual(h, *triple, grid16), 1e-13)


def test_ibp_fails_for_non_curvature_weights(grid32):
    # sanity: replacing the cofactor of Q(h) by an arbitrary matrix field breaks the symmetry
    h = Exp(Scale(0.3, Harmonic(2, 1)))
    assert ibp1_residual(h, Harmonic(2, 0), Harmonic(4, 0), grid32) < 1e-10
    psi, phi = Harmonic(2, 0), Harmonic(4, 0)
    w = np.random.default_rng(0).standard_normal((len(grid32), 2, 2))
    w = w + np.swapaxes(w, 1, 2)
    qpsi = curvature_from_jet(psi.jet(grid32.nodes), grid32.frames)
    qphi = curvature_from_jet(phi.jet(grid32.nodes), grid32.frames)
    lhs = integrate(grid32, phi(grid32.nodes) * np.einsum("mij,mij->m", w, qpsi))
    rhs = integrate(grid32, psi(grid32.nodes) * np.einsum("mij,mij->m", w, qphi))
    assert abs(lhs - rhs) > 1e-3


def test_poincare(grid32):
    for m in range(-2, 3):
        assert abs(poincare_gap(Harmonic(2, m), grid32)) < 1e-9
    y4 = Harmonic(4, 0)
    mass = integrate(grid32, y4(grid32.nodes) ** 2)
    assert poincare_gap(y4, grid32) == pytest.approx((20 / 6 - 1) * mass, rel=1e-10)
    mixed = Sum([Harmonic(2, 1), Scale(0.04, Harmonic(4, 3))])  # degree-4 L^2 mass 1.6e-3
    assert poincare_gap(mixed, grid32) > 0
    with pytest.raises(PreconditionError):
        poincare_gap(Linear(E3), grid32)
    with pytest.raises(PreconditionError):
        poincare_gap(Sum([Harmonic(2, 0), Const(0.1, 3)]), grid32)


def test_poincare_on_circle():
    g = build_grid(2, 64)
    cos2 = Sum([Monomial((2, 0)), Scale(-1.0, Monomial((0, 2)))])
    assert abs(poincare_gap(cos2, g)) < 1e-12
    cos4 = Sum([Monomial((4, 0)), Scale(-6.0, Monomial((2, 2))), Monomial((0, 4))])
    assert poincare_gap(cos4, g) > 0


def test_concavity_scan_examples(grid32):
    const = concavity_scan(Const(0.3, 3), grid32)
    assert const.verdict == "concave"
    mixed = concavity_scan(Sum([Scale(0.05, Harmonic(2, 0)), Scale(0.03, Harmonic(4, 2))]), grid32)
    assert mixed.verdict == "strictly concave"
    assert mixed.max_logf2 < -1e-6
    assert mixed.mean_shift_error < 1e-9
    odd = concavity_scan(Scale(0.1, Linear(E3)), grid32)
    assert odd.verdict == "violated"
    assert log_f_derivatives(odd.path, 0.0)[0] == pytest.approx(0.01, rel=1e-6)


def test_mean_shift_covariance(grid32):
    psi = Sum([Scale(0.04, Harmonic(2, 2)), Const(0.07, 3)])
    rep = concavity_scan(psi, grid32)
    assert rep.mean == pytest.approx(0.07, rel=1e-12)
    assert rep.mean_shift_error < 1e-9
    assert rep.verdict == "strictly concave"


def test_concavity_for_small_even_fields(grid32):
    rng = np.random.default_rng(12)
    for _ in range(4):
        psi = random_even_harmonic(rng, grid32, 0.05, degrees=(2, 4, 6))
        p = volume_path(psi, grid32)
        assert p.logf2.max() <= 1e-8
        assert p.logf2.min() < -1e-8


def test_third_ratio(grid32):
    rho = {t: third_ratio(Scale(t, Harmonic(2, 0)), grid32) for t in (0.2, 0.1, 0.05)}
    assert rho[0.05] < rho[0.1] < rho[0.2]
    for t, r in rho.items():
        if r < rho_threshold(3):
            assert concavity_scan(Scale(t, Harmonic(2, 0)), grid32).concave
    assert third_ratio(Const(0.0, 3), grid32) == 0.0
    with pytest.raises(PreconditionError):
        third_ratio(Scale(0.1, Linear(E3)), grid32)


def test_log_bm_ball_equality(grid32):
    rep = log_bm_check(bodies.ball(2.0, grid32), 1.0)
    assert np.abs(rep.deficits).max() < 1e-12
    assert rep.equality and rep.verdict == "equality"


def test_log_bm_local_body(grid32):
    k = bodies.validate_support(Exp(Scale(0.05, Harmonic(2, 0))), grid32)
    lams = np.linspace(0.1, 0.9, 9)
    rep = log_bm_check(k, 1.0, lams)
    assert np.all(rep.deficits > 0)
    assert rep.verdict == "strict"


def test_log_bm_rejects_asymmetric(grid32):
    k = bodies.validate_support(Sum([Const(1.0, 3), Scale(0.1, Linear(E3))]), grid32)
    with pytest.raises(PreconditionError):
        log_bm_check(k, 1.0)


def test_log_bm_on_circle():
    g = build_grid(2, 64)
    psi = Scale(0.05, Sum([Monomial((2, 0)), Scale(-1.0, Monomial((0, 2)))]))
    rep = log_bm_check(bodies.validate_support(Exp(psi), g), 1.0)
    assert rep.passed and rep.verdict == "strict"
    assert volume_path(psi, g).logf2.max() < 0


def test_chain_ball(grid32):
    rep = log_minkowski_chain(bodies.ball(1.4, grid32), 1.4)
    assert abs(rep.first_gap) < 1e-10 and abs(rep.second_gap) < 1e-10


def test_chain_normalized_local_body(grid32):
    h = Exp(Scale(0.05, Harmonic(2, 0)))
    c = (4 * math.pi / 3 / bodies.volume(bodies.validate_support(h, grid32))) ** (1 / 3)
    k = bodies.validate_support(Scale(c, h), grid32)
    assert bodies.volume(k) == pytest.approx(4 * math.pi / 3, rel=1e-13)
    rep = log_minkowski_chain(k, 1.0)
    assert rep.first_gap >= -1e-8
    assert rep.second_gap >= -1e-8
    assert rep.blend_min_Q_eigen > 0


def test_chain_ellipsoid_reports(grid32):
    e = Ellipsoid([1.0, 1.2, 1 / 1.2])
    c = (4 * math.pi / 3 / bodies.volume(bodies.validate_support(e, grid32))) ** (1 / 3)
    rep = log_minkowski_chain(bodies.validate_support(Scale(c, e), grid32), 1.0)
    assert math.isfinite(rep.first_gap) and math.isfinite(rep.second_gap)
    assert rep.blend_min_Q_eigen is None or rep.blend_min_Q_eigen > 0


def test_volume_at_matches_path(grid32):
    psi = Scale(0.1, Harmonic(2, 0))
    p = volume_path(psi, grid32, [0.5])
    assert volume_at(psi, grid32, 0.5) == p.f[0]
    assert s_grid().size == 41
