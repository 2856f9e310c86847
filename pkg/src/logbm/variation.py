"""Volume along exponential paths h_s = exp(s psi) and the local log-BM experiments.

The volume path is ``f(s) = (1/n) * integral of h_s det Q(h_s)``.  Its
first three derivatives are evaluated from closed-form integrands
(cofactor contractions of curvature matrices), never by differencing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import body as bodies
from .body import BodyRep, SupportRejected
from .determinants import cofactor, cofactor2, contract2
from .fields import Const, Field, Jet, Sum, c2_norm, curvature_from_jet, jet_exp, jet_mul
from .sphere import SphereGrid, integrate, sphere_area

DEFAULT_S_SAMPLES = 41
DEFAULT_LAMBDA_SAMPLES = 21
CONCAVITY_TOL = 1e-8


class PreconditionError(ValueError):
    """An experiment's hypothesis (parity, zero mean, symmetry) fails."""


def s_grid(n_samples: int = DEFAULT_S_SAMPLES) -> np.ndarray:
    return np.linspace(-2.0, 2.0, n_samples)


def lambda_grid(n_samples: int = DEFAULT_LAMBDA_SAMPLES) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_samples)


def _frob(a, b):
    return np.einsum("mij,mij->m", a, b)


def _c2_contract(q, x, y):
    if q.shape[-1] < 2:
        # det of a 1x1 matrix is linear in its entry
        return np.zeros(q.shape[0])
    return contract2(cofactor2(q), x, y)


def path_point(psi_jet: Jet, grid: SphereGrid, s: float):
    """f, f', f'', f''' and min eigenvalue of Q(h_s) at a single ``s``.

    ``psi_jet`` is the jet of psi on ``grid.nodes`` (computed once per path).
    """
    n = grid.dim
    h = jet_exp(psi_jet.scale(s))
    dh = jet_mul(psi_jet, h)
    d2h = jet_mul(psi_jet, dh)
    q = curvature_from_jet(h, grid.frames)
    q1 = curvature_from_jet(dh, grid.frames)
    q2 = curvature_from_jet(d2h, grid.frames)
    min_eig = float(np.linalg.eigvalsh(q)[:, 0].min())
    det = np.linalg.det(q)
    cof = cofactor(q)
    psi, hv = psi_jet.val, h.val
    cq1 = _frob(cof, q1)
    f = integrate(grid, hv * det) / n
    f1 = integrate(grid, psi * hv * det)
    f2 = integrate(grid, psi**2 * hv * det + psi * hv * cq1)
    f3 = integrate(
        grid,
        hv * (psi**3 * det + 2.0 * psi**2 * cq1)
        + hv * psi * (_c2_contract(q, q1, q1) + _frob(cof, q2)),
    )
    return f, f1, f2, f3, min_eig


def volume_at(psi: Field, grid: SphereGrid, s: float) -> float:
    """f(s) alone; the sampler used by finite-difference oracles."""
    return path_point(psi.jet(grid.nodes), grid, s)[0]


def log_derivatives(f, f1, f2, f3):
    """(log f)'' and (log f)''' from f and its first three derivatives."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0):
        raise ValueError("log derivatives need f > 0")
    r1 = f1 / f
    logf2 = f2 / f - r1**2
    logf3 = f3 / f - 3.0 * r1 * f2 / f + 2.0 * r1**3
    return logf2, logf3


@dataclass(frozen=True, eq=False)
class VolumePath:
    psi: Field
    grid: SphereGrid
    s: np.ndarray
    f: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray
    logf2: np.ndarray
    logf3: np.ndarray
    min_Q_eigen: np.ndarray

    def index(self, s: float) -> int:
        hits = np.flatnonzero(np.isclose(self.s, s, rtol=0.0, atol=1e-12))
        if hits.size == 0:
            raise ValueError(f"s = {s} is not a sample of this path")
        return int(hits[0])

    def rows(self):
        for i in range(self.s.size):
            yield {
                "s": self.s[i], "f": self.f[i], "f1": self.f1[i], "f2": self.f2[i],
                "f3": self.f3[i], "logf2": self.logf2[i], "logf3": self.logf3[i],
            }


def volume_path(psi: Field, grid: SphereGrid, samples=None) -> VolumePath:
    """Sample f and its analytic derivatives along h_s = exp(s psi).

    Raises :class:`SupportRejected` (with ``s`` attached) if some h_s is
    not C^{2,+} on the grid.
    """
    samples = s_grid() if samples is None else np.asarray(samples, dtype=float)
    psi_jet = psi.jet(grid.nodes)
    out = np.empty((samples.size, 5))
    for i, s in enumerate(samples):
        out[i] = path_point(psi_jet, grid, float(s))
        hv = np.exp(s * psi_jet.val)
        if out[i, 4] <= 0.0 or hv.min() <= 0.0:
            err = SupportRejected(
                f"exp(s psi) is not C^2,+ at s = {s:.6g} (min eigenvalue {out[i, 4]:.6g})",
                eigenvalue=out[i, 4],
            )
            err.s = float(s)
            raise err
    f, f1, f2, f3, eig = out.T
    logf2, logf3 = log_derivatives(f, f1, f2, f3)
    return VolumePath(psi, grid, samples, f, f1, f2, f3, logf2, logf3, eig)


def f_prime(path: VolumePath, s: float) -> float:
    return float(path.f1[path.index(s)])


def f_second(path: VolumePath, s: float) -> float:
    return float(path.f2[path.index(s)])


def f_third(path: VolumePath, s: float) -> float:
    return float(path.f3[path.index(s)])


def log_f_derivatives(path: VolumePath, s: float):
    i = path.index(s)
    return float(path.logf2[i]), float(path.logf3[i])


# -- integration by parts -------------------------------------------------------


def ibp1_residual(h: Field, psi: Field, phi: Field, grid: SphereGrid) -> float:
    """|int phi c_ij(h) Q(psi)_ij - int psi c_ij(h) Q(phi)_ij|."""
    cof = cofactor(curvature_from_jet(h.jet(grid.nodes), grid.frames))
    jpsi, jphi = psi.jet(grid.nodes), phi.jet(grid.nodes)
    lhs = integrate(grid, jphi.val * _frob(cof, curvature_from_jet(jpsi, grid.frames)))
    rhs = integrate(grid, jpsi.val * _frob(cof, curvature_from_jet(jphi, grid.frames)))
    return abs(lhs - rhs)


def ibp2_residual(h: Field, phi: Field, varphi: Field, psi: Field, grid: SphereGrid) -> float:
    """|int psi c_ij,kl(h) Q(phi)_ij Q(varphi)_kl - (psi <-> varphi)|."""
    q = curvature_from_jet(h.jet(grid.nodes), grid.frames)
    qphi = curvature_from_jet(phi.jet(grid.nodes), grid.frames)
    jv, jp = varphi.jet(grid.nodes), psi.jet(grid.nodes)
    qv, qp = curvature_from_jet(jv, grid.frames), curvature_from_jet(jp, grid.frames)
    lhs = integrate(grid, jp.val * _c2_contract(q, qphi, qv))
    rhs = integrate(grid, jv.val * _c2_contract(q, qphi, qp))
    return abs(lhs - rhs)


# -- Poincare inequality --------------------------------------------------------


def _require_even_zero_mean(psi: Field, grid: SphereGrid):
    jet = psi.jet(grid.nodes)
    v = jet.val
    if np.max(np.abs(v - v[grid.antipode])) > 1e-10:
        raise PreconditionError("field is not even")
    mean = integrate(grid, v)
    l2 = math.sqrt(integrate(grid, v * v))
    if abs(mean) > 1e-10 * max(l2, 1.0):
        raise PreconditionError(f"field does not have zero mean (integral {mean:.3g})")
    return jet


def dirichlet_energy(psi: Field, grid: SphereGrid) -> float:
    """int |grad_s psi|^2."""
    g = psi.jet(grid.nodes).grad
    return integrate(grid, np.einsum("ij,ij->i", g, g))


def poincare_gap(psi: Field, grid: SphereGrid) -> float:
    """(1/2n) int |grad psi|^2 - int psi^2 for even, zero-mean psi."""
    jet = _require_even_zero_mean(psi, grid)
    grad2 = integrate(grid, np.einsum("ij,ij->i", jet.grad, jet.grad))
    return grad2 / (2 * grid.dim) - integrate(grid, jet.val**2)


# -- concavity and the third-derivative ratio -----------------------------------


@dataclass
class ConcavityReport:
    psi: dict
    c2_norm: float
    max_logf2: float
    strictness_margin: float
    mean: float
    mean_shift_error: float
    min_Q_eigen: float
    verdict: str
    path: VolumePath = field(repr=False)

    @property
    def concave(self) -> bool:
        return self.verdict != "violated"

    def to_dict(self) -> dict:
        return {
            "psi": self.psi, "c2_norm": self.c2_norm, "max_logf2": self.max_logf2,
            "strictness_margin": self.strictness_margin, "mean": self.mean,
            "mean_shift_error": self.mean_shift_error, "min_Q_eigen": self.min_Q_eigen,
            "verdict": self.verdict,
        }


def concavity_verdict(logf2, tol: float = CONCAVITY_TOL) -> str:
    logf2 = np.asarray(logf2)
    if np.max(logf2) > tol:
        return "violated"
    if np.min(logf2) < -tol:
        return "strictly concave"
    return "concave"


def concavity_scan(psi: Field, grid: SphereGrid, n_samples: int = DEFAULT_S_SAMPLES,
                   tol: float = CONCAVITY_TOL) -> ConcavityReport:
    """Scan (log f)'' on [-2, 2] and cross-check the mean-shift reduction.

    With m = mean of psi and psi_bar = psi - m, log f_bar(s) must equal
    log f(s) - n s m; the largest deviation is reported.
    """
    samples = s_grid(n_samples)
    path = volume_path(psi, grid, samples)
    m = integrate(grid, psi(grid.nodes)) / sphere_area(grid.dim)
    shifted = volume_path(Sum([psi, Const(-m, grid.dim)]), grid, samples)
    err = float(np.max(np.abs(np.log(shifted.f) - (np.log(path.f) - grid.dim * samples * m))))
    err = max(err, float(np.max(np.abs(shifted.logf2 - path.logf2))))
    return ConcavityReport(
        psi=psi.to_json(),
        c2_norm=c2_norm(psi, grid),
        max_logf2=float(path.logf2.max()),
        strictness_margin=float(-path.logf2.min()),
        mean=float(m),
        mean_shift_error=err,
        min_Q_eigen=float(path.min_Q_eigen.min()),
        verdict=concavity_verdict(path.logf2, tol),
        path=path,
    )


def third_ratio(psi: Field, grid: SphereGrid, n_samples: int = DEFAULT_S_SAMPLES) -> float:
    """Empirical rho = max_s |(log f)'''(s)| / ||grad psi||^2_{L^2}; 0 for psi = 0."""
    _require_even_zero_mean(psi, grid)
    energy = dirichlet_energy(psi, grid)
    if energy == 0.0:
        return 0.0
    path = volume_path(psi, grid, s_grid(n_samples))
    return float(np.max(np.abs(path.logf3)) / energy)


def rho_threshold(dim: int) -> float:
    """The sufficient bound 1 / (4 |S^{n-1}|) on rho that forces concavity."""
    return 1.0 / (4.0 * sphere_area(dim))


# -- log-Brunn-Minkowski against a ball -----------------------------------------


@dataclass
class LogBMReport:
    radius: float
    lambdas: np.ndarray
    volumes: np.ndarray
    deficits: np.ndarray
    min_Q_eigen: np.ndarray
    volume_K: float
    volume_ball: float
    passed: bool
    equality: bool
    verdict: str

    def to_dict(self) -> dict:
        return {
            "radius": self.radius, "volume_K": self.volume_K,
            "volume_ball": self.volume_ball, "min_deficit": float(self.deficits.min()),
            "max_deficit": float(self.deficits.max()),
            "min_Q_eigen": float(self.min_Q_eigen.min()), "passed": self.passed,
            "equality": self.equality, "verdict": self.verdict,
        }


def log_bm_check(K: BodyRep, radius: float, lambdas=None, tol: float = CONCAVITY_TOL) -> LogBMReport:
    """Deficits log|lam K +0 (1-lam) R B| - lam log|K| - (1-lam) log|R B|.

    ``K`` must be origin-symmetric.  Equality is flagged only when all
    deficits vanish to ``tol`` and h is constant; near-zero deficits for a
    non-constant h are reported as inconclusive.
    """
    lambdas = lambda_grid() if lambdas is None else np.asarray(lambdas, dtype=float)
    if not bodies.is_symmetric(K):
        raise PreconditionError("log-BM check needs an origin-symmetric body")
    ball = bodies.ball(radius, K.grid)
    vol_k, vol_b = bodies.volume(K), bodies.volume(ball)
    vols, eigs = np.empty(lambdas.size), np.empty(lambdas.size)
    for i, lam in enumerate(lambdas):
        blend = bodies.log_blend(K, ball, float(lam))
        vols[i] = bodies.volume(blend)
        eigs[i] = blend.min_Q_eigen
    deficits = np.log(vols) - lambdas * math.log(vol_k) - (1.0 - lambdas) * math.log(vol_b)
    passed = bool(np.all(deficits >= -tol))
    flat = bool(np.all(np.abs(deficits) <= tol))
    const_h = bool(np.ptp(K.values) <= tol * max(1.0, abs(K.values).max()))
    if not passed:
        verdict = "violated"
    elif flat and const_h:
        verdict = "equality"
    elif flat:
        verdict = "inconclusive at this tolerance"
    else:
        verdict = "strict"
    return LogBMReport(radius, lambdas, vols, deficits, eigs, vol_k, vol_b, passed,
                       flat and const_h, verdict)


@dataclass
class ChainReport:
    radius: float
    volume_K: float
    volume_ball: float
    first_lhs: float
    first_rhs: float
    first_gap: float
    second_lhs: float
    second_rhs: float
    second_gap: float
    blend_min_Q_eigen: float | None

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def log_minkowski_chain(K: BodyRep, radius: float, lambdas=None) -> ChainReport:
    """Both links of the log-Minkowski chain between K and the ball R B.

    Each link is the endpoint slope of the concave function
    lam -> log|lam K +0 (1-lam) R B|, written with the cone measure::

        (n/|K|)  int log(R / h_K) dc_K   >= log(|R B| / |K|)
        (n/|RB|) int log(h_K / R) dc_RB  >= log(|K| / |R B|)

    ``blend_min_Q_eigen`` is the smallest curvature eigenvalue over the
    log-blends on the lambda grid, or None if some blend left the C^{2,+}
    regime.
    """
    if not bodies.is_symmetric(K):
        raise PreconditionError("log-Minkowski chain needs an origin-symmetric body")
    n = K.dim
    grid = K.grid
    ball = bodies.ball(radius, grid)
    vol_k, vol_b = bodies.volume(K), bodies.volume(ball)
    log_ratio = np.log(radius / K.values)
    first_lhs = n / vol_k * integrate(grid, log_ratio * bodies.cone_densities(K))
    first_rhs = math.log(vol_b / vol_k)
    second_lhs = n / vol_b * integrate(grid, -log_ratio * bodies.cone_densities(ball))
    second_rhs = math.log(vol_k / vol_b)
    lambdas = lambda_grid() if lambdas is None else np.asarray(lambdas, dtype=float)
    try:
        eig = min(bodies.log_blend(K, ball, float(lam)).min_Q_eigen for lam in lambdas)
    except SupportRejected:
        eig = None
    return ChainReport(
        radius, vol_k, vol_b, first_lhs, first_rhs, first_lhs - first_rhs,
        second_lhs, second_rhs, second_lhs - second_rhs, eig,
    )
