"""Ansatz assembly, residual scaling, and the reduced-energy expansion.

The construction perturbs the ground state u_0 at lam_0 by a boundary-
corrected bubble and the two auxiliary profiles:

    V = z + beta W_mu,    z = u_0 + eps v + eps^2 w,    lam = lam_0 + eps.

Everything quantitative about V rests on three exact cancellations:

* -Delta z - lam z = (u_0 + eps v)^2 + 2 eps^2 u_0 w - eps^3 w, because
  the defining equations of v and w absorb the linear terms order by
  order (the eps u_0 and eps^2 v source terms drop out identically);
* -Delta W = U^2 with W = U - c(mu) exactly on the ball;
* at the center, u_0(0) = lam_0/2 kills the quadratic term of the
  reduced energy, leaving the eps- and cubic terms to fix the rate.

Energy comparisons are assembled from integrand-level differences that
stay small pointwise: the naive route computes J(V) and J(z) separately
as O(1) quantities and loses the cubic coefficient to roundoff at small
mu.  Quadrature is composite Gauss on panels aligned with the spline
knots and refined geometrically at the bubble scale, which integrates
spline-by-spline products exactly and resolves the mu-core without
adaptive overhead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .auxiliary import AuxProfiles, ConcentrationSurvey
from .bubbles import (
    ALPHA6,
    ball_integral_u,
    ball_integral_u2,
    ball_integral_u3,
    boundary_trace,
    d1_closed_form,
    d2_value,
    talenti_du,
    talenti_u,
)
from .errors import (
    AllPointsExcludedError,
    ConfigError,
    RadialModeViolationError,
    UnderResolvedError,
)
from .grid import (
    RadialFn,
    RadialGrid,
    ball_volume,
    h1_norm,
    lp_norm,
    make_core_grid,
    rescale_grid,
    sphere_area,
)
from .operators import OperatorSpec, apply_operator
from .shooting import newton_refine

GAUSS_ORDER = 12
DEFAULT_S = 0.75
RESOLUTION_FACTOR = 20.0


# ---------------------------------------------------------------------------
# spline context for the smooth fields

class _SplineSet:
    """Cubic-spline views of u_0, v, w with clamped center derivative."""

    def __init__(self, profiles: AuxProfiles):
        grid = profiles.grid
        x = grid.nodes
        self.knots = x
        self.lam0 = profiles.lam0
        self.u00 = float(profiles.u0.values[0])
        self.v00 = float(profiles.v.values[0])
        self.w00 = float(profiles.w.values[0])

        def _fit(f: RadialFn) -> CubicSpline:
            return CubicSpline(x, f.values,
                               bc_type=((1, 0.0), (1, float(f.derivative[-1]))))

        self.u0 = _fit(profiles.u0)
        self.v = _fit(profiles.v)
        self.w = _fit(profiles.w)
        self.du0 = self.u0.derivative()
        self.dv = self.v.derivative()
        self.dw = self.w.derivative()

    def z(self, r, eps: float):
        return self.u0(r) + eps * self.v(r) + eps ** 2 * self.w(r)

    def dz(self, r, eps: float):
        return self.du0(r) + eps * self.dv(r) + eps ** 2 * self.dw(r)

    def source(self, r, eps: float):
        """-Delta z - lam z with lam = lam0 + eps, via the defining
        equations: (u_0 + eps v)^2 + 2 eps^2 u_0 w - eps^3 w."""
        u0 = self.u0(r)
        w = self.w(r)
        return (u0 + eps * self.v(r)) ** 2 + 2.0 * eps ** 2 * u0 * w - eps ** 3 * w

    def neg_laplacian_z(self, r, eps: float):
        u0, v, w = self.u0(r), self.v(r), self.w(r)
        lam0 = self.lam0
        return (lam0 * u0 + u0 ** 2
                + eps * ((lam0 + 2.0 * u0) * v + u0)
                + eps ** 2 * ((lam0 + 2.0 * u0) * w + v + v ** 2))


_SPLINE_CACHE: dict[int, _SplineSet] = {}


def _splines(profiles: AuxProfiles) -> _SplineSet:
    key = id(profiles)
    if key not in _SPLINE_CACHE:
        _SPLINE_CACHE.clear()
        _SPLINE_CACHE[key] = _SplineSet(profiles)
    return _SPLINE_CACHE[key]


# ---------------------------------------------------------------------------
# panel quadrature: exact on spline products, geometric at the bubble core

def _panel_integral(f, edges: np.ndarray, order: int = GAUSS_ORDER) -> float:
    nodes, weights = leggauss(order)
    a = edges[:-1]
    h = np.diff(edges)
    x = (a[:, None] + 0.5 * h[:, None] * (nodes[None, :] + 1.0)).ravel()
    w = (0.5 * h[:, None] * weights[None, :]).ravel()
    return float(np.dot(w, f(x)))


def _mu_refined_edges(knots: np.ndarray, mu: float, lo: float, hi: float,
                      extra=()) -> np.ndarray:
    pts = [lo, hi]
    pts.extend(knots[(knots > lo) & (knots < hi)])
    scale = mu / 16.0
    while scale < hi:
        if lo < scale:
            pts.append(scale)
        scale *= 2.0
    pts.extend(p for p in extra if lo < p < hi)
    edges = np.unique(np.asarray(pts, dtype=float))
    keep = np.concatenate([[True], np.diff(edges) > 1e-14])
    return edges[keep]


def _ball_quad(f, edges: np.ndarray) -> float:
    """Integral over the ball of a radial integrand: omega_6 int f r^5 dr."""
    return sphere_area(6) * _panel_integral(lambda r: f(r) * r ** 5, edges)


# ---------------------------------------------------------------------------
# ansatz types

@dataclass(frozen=True)
class BubbleParams:
    """One bubble of the construction: rate mu, sign beta, center offset
    from the concentration point (nonzero only in the shifted-center case),
    and the case tag (1 fixed center, 2 shifted)."""

    mu: float
    beta: int
    center_offset: float = 0.0
    case: int = 1

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.beta not in (-1, 1):
            raise ValueError(f"beta must be -1 or +1, got {self.beta}")
        if self.case not in (1, 2):
            raise ValueError(f"case must be 1 or 2, got {self.case}")
        if self.case == 1 and self.center_offset != 0.0:
            raise ValueError("fixed-center bubbles cannot carry an offset")


@dataclass(frozen=True, eq=False)
class AnsatzSpec:
    """Parameters of V = u_0 + eps v + eps^2 w + sum beta_j W_j."""

    profiles: AuxProfiles
    eps: float
    bubbles: tuple
    s: float = DEFAULT_S

    def __post_init__(self):
        if not self.bubbles:
            raise ConfigError("at least one bubble is required")
        if not 0.5 < self.s < 1.0:
            raise ConfigError(f"s must lie in (1/2, 1), got {self.s}")
        if self.eps != 0.0:
            v0 = self.profiles.v0
            for b in self.bubbles:
                if b.case != 1 or b.center_offset != 0.0:
                    continue
                required = -math.copysign(1.0, 0.5 + b.beta * v0)
                if math.copysign(1.0, self.eps) != required:
                    raise ConfigError(
                        "sign of eps is inconsistent with the fixed-center "
                        f"rule -sgn(1/2 + beta v(0)) = {required:+.0f}")

    @property
    def lam(self) -> float:
        return self.profiles.lam0 + self.eps

    @property
    def mu_bar(self) -> float:
        return max(b.mu for b in self.bubbles)


@dataclass(frozen=True, eq=False)
class AnsatzProfile:
    """Sampled ansatz plus the data the analytic residual route needs."""

    fn: RadialFn = field(repr=False)
    eps: float
    mu: float
    beta: int
    lam: float
    crossing: float
    splines: _SplineSet = field(repr=False)

    @property
    def grid(self) -> RadialGrid:
        return self.fn.grid


def assemble_z(profiles: AuxProfiles, eps: float,
               grid: RadialGrid | None = None) -> RadialFn:
    """The smooth part z = u_0 + eps v + eps^2 w."""
    if grid is None or grid is profiles.grid:
        vals = (profiles.u0.values + eps * profiles.v.values
                + eps ** 2 * profiles.w.values)
        derivs = (profiles.u0.derivative + eps * profiles.v.derivative
                  + eps ** 2 * profiles.w.derivative)
        return RadialFn(profiles.grid, vals, derivs, regular_origin=True)
    S = _splines(profiles)
    return RadialFn(grid, S.z(grid.nodes, eps), S.dz(grid.nodes, eps),
                    regular_origin=True)


def _sign_crossing(S: _SplineSet, eps: float, mu: float) -> float:
    """Radius where z = W (the ansatz changes sign for beta = -1)."""
    def gap(r):
        return S.z(r, eps) - (talenti_u(r, mu) - boundary_trace(mu))
    lo, hi = mu, 0.999
    if gap(lo) >= 0.0 or gap(hi) <= 0.0:
        raise ConfigError("ansatz sign change not bracketed; mu outside the "
                          "supported range")
    return float(brentq(gap, lo, hi, xtol=1e-15, rtol=1e-15))


def assemble_ansatz(spec: AnsatzSpec,
                    grid: RadialGrid | None = None) -> AnsatzProfile:
    """Sample V on a core-refined grid (radial mode: one fixed-center
    bubble)."""
    if len(spec.bubbles) != 1:
        raise RadialModeViolationError(
            "radial sampling supports exactly one bubble")
    bubble = spec.bubbles[0]
    if bubble.center_offset != 0.0 or bubble.case != 1:
        raise RadialModeViolationError(
            "radial sampling requires a fixed-center bubble")
    profiles = spec.profiles
    if profiles.dimension != 6:
        raise RadialModeViolationError("the ansatz is specific to N = 6")
    mu, beta = bubble.mu, bubble.beta
    if grid is None:
        grid = make_core_grid(6, mu)
    S = _splines(profiles)
    r = grid.nodes
    w_vals = talenti_u(r, mu) - boundary_trace(mu)
    vals = S.z(r, spec.eps) + beta * w_vals
    derivs = S.dz(r, spec.eps) + beta * talenti_du(r, mu)
    crossing = _sign_crossing(S, spec.eps, mu) if beta == -1 else math.nan
    return AnsatzProfile(
        fn=RadialFn(grid, vals, derivs, regular_origin=True),
        eps=spec.eps,
        mu=mu,
        beta=beta,
        lam=spec.lam,
        crossing=crossing,
        splines=S,
    )


# ---------------------------------------------------------------------------
# residual measurement

def _check_resolved(grid: RadialGrid, mu: float) -> None:
    nodes = grid.nodes
    core = nodes[nodes <= 4.0 * mu]
    if len(core) < 2 or np.max(np.diff(nodes[:len(core)])) > mu / RESOLUTION_FACTOR:
        raise UnderResolvedError(
            f"grid does not resolve the bubble core at mu = {mu:.3g} "
            f"(need spacing <= mu/{RESOLUTION_FACTOR:.0f} near the origin)")


def _residual_fields(S: _SplineSet, eps: float, mu: float, lam: float):
    """Pointwise residual of V per sign region, in cancellation-free form.

    With G := -Delta z, the residual -Delta V - lam V - f(V) equals
    (G - lam z) + beta U^2 - lam beta W - f(z + beta W); the source
    identity replaces G - lam z, and the U^2-vs-f(V) difference is
    expanded so no large squares survive.
    """
    c = boundary_trace(mu)

    def negative_region(r):
        # beta = -1, V = z - W < 0: f(V) = -(W - z)^2
        z = S.z(r, eps)
        u = talenti_u(r, mu)
        w = u - c
        return (S.source(r, eps) + lam * w
                - 2.0 * u * (z + c) + (z + c) ** 2)

    def positive_region_minus(r):
        # beta = -1, V = z - W > 0: f(V) = (z - W)^2
        z = S.z(r, eps)
        u = talenti_u(r, mu)
        w = u - c
        return (S.source(r, eps) + lam * w - u ** 2 - (z - w) ** 2)

    def positive_region_plus(r):
        # beta = +1, V = z + W > 0 everywhere: f(V) = (z + W)^2
        z = S.z(r, eps)
        u = talenti_u(r, mu)
        w = u - c
        return (S.source(r, eps) + u ** 2 - lam * w - (z + w) ** 2)

    return negative_region, positive_region_minus, positive_region_plus


def _residual_l32(S: _SplineSet, eps: float, mu: float, beta: int,
                  lam: float, crossing: float) -> float:
    neg, pos_minus, pos_plus = _residual_fields(S, eps, mu, lam)
    if beta == -1:
        inner_edges = _mu_refined_edges(S.knots, mu, 0.0, crossing)
        outer_edges = _mu_refined_edges(S.knots, mu, crossing, 1.0)
        total = (_ball_quad(lambda r: np.abs(neg(r)) ** 1.5, inner_edges)
                 + _ball_quad(lambda r: np.abs(pos_minus(r)) ** 1.5,
                              outer_edges))
    else:
        edges = _mu_refined_edges(S.knots, mu, 0.0, 1.0)
        total = _ball_quad(lambda r: np.abs(pos_plus(r)) ** 1.5, edges)
    return total ** (2.0 / 3.0)


def residual_norm(v, lam: float) -> float:
    """L^{3/2}(B_1) norm of -Delta V - lam V - |V|V.

    AnsatzProfile inputs use the analytic route (exact bubble Laplacian,
    spline smooth part); plain RadialFn inputs are measured by pointwise
    finite differences on their own grid.
    """
    if isinstance(v, AnsatzProfile):
        _check_resolved(v.fn.grid, v.mu)
        return _residual_l32(v.splines, v.eps, v.mu, v.beta, lam, v.crossing)
    if isinstance(v, RadialFn):
        op = OperatorSpec(v.grid, sector=0, lam=lam)
        vals = apply_operator(op, v) - np.abs(v.values) * v.values
        vals[-1] = 0.0
        return lp_norm(RadialFn.from_values(v.grid, vals), 1.5)
    raise TypeError(f"expected AnsatzProfile or RadialFn, got {type(v)!r}")


# ---------------------------------------------------------------------------
# reduced-energy formulas

def tau_star(a: float, d2: float) -> float:
    """Minimizer of -a tau^2 + (11/9) d2 tau^3 over tau > 0."""
    if a <= 0.0:
        raise ValueError("quadratic coefficient must be positive; the point "
                         "admits no fixed-center construction")
    if d2 <= 0.0:
        raise ValueError(f"d2 must be positive, got {d2}")
    return 6.0 * a / (11.0 * d2)


def reduced_energy_polynomial(tau, a: float, d2: float):
    """P(tau) = -a tau^2 + (11/9) d2 tau^3 (vectorized in tau)."""
    tau = np.asarray(tau, dtype=float)
    return -a * tau ** 2 + (11.0 / 9.0) * d2 * tau ** 3


def expansion_E(u_xi: float, v_xi: float, beta: int, mu: float, eps: float,
                lam0: float) -> float:
    """Three-term reduced energy at a concentration point.

    d1 (lam0/2 + beta u(xi)) mu^2 + eps d1 (1/2 + beta v(xi)) mu^2
    + (11/9) d2 mu^3; the first term is identically zero on the levels
    u(xi) = -beta lam0/2.
    """
    d1 = d1_closed_form()
    d2 = d2_value(u_xi)
    return (d1 * (0.5 * lam0 + beta * u_xi) * mu ** 2
            + eps * d1 * (0.5 + beta * v_xi) * mu ** 2
            + (11.0 / 9.0) * d2 * mu ** 3)


def select_construction(survey: ConcentrationSurvey, profiles: AuxProfiles,
                        eps_magnitude: float, s: float = DEFAULT_S,
                        ) -> AnsatzSpec:
    """Choose bubble signs, the parameter sign, and the rate schedule.

    Fixed-center points require sign(eps) = -sgn(1/2 + beta v(xi)) and get
    mu = |eps| tau*; shifted-center points (v on an excluded level but
    dv/dr != 0) get mu = |eps|^{1+s} tau* and an |eps|^s offset, and adapt
    to either parameter sign through the choice of shift direction.
    """
    if eps_magnitude <= 0.0:
        raise ValueError("eps_magnitude must be positive")
    usable = [p for p in survey.points if p.case in (1, 2)]
    if not usable:
        raise AllPointsExcludedError(
            "every critical-level point falls in the excluded sets")
    d1 = d1_closed_form()
    signs = {-math.copysign(1.0, 0.5 + p.beta * p.v_value)
             for p in usable if p.case == 1}
    if len(signs) > 1:
        raise ConfigError("no single parameter sign serves every "
                          "fixed-center point")
    sign = signs.pop() if signs else -1.0
    bubbles = []
    for p in usable:
        d2 = d2_value(p.u_value)
        if p.case == 1:
            tau = tau_star(d1 * abs(0.5 + p.beta * p.v_value), d2)
            bubbles.append(BubbleParams(mu=eps_magnitude * tau, beta=p.beta))
        else:
            tau = tau_star(d1 * abs(p.dv_dr), d2)
            bubbles.append(BubbleParams(
                mu=eps_magnitude ** (1.0 + s) * tau,
                beta=p.beta,
                center_offset=eps_magnitude ** s,
                case=2,
            ))
    return AnsatzSpec(profiles=profiles, eps=sign * eps_magnitude,
                      bubbles=tuple(bubbles), s=s)


# ---------------------------------------------------------------------------
# energies

def energy(u, lam: float) -> float:
    """J(u) = 1/2 ||grad u||^2 - lam/2 ||u||^2 - 1/3 ||u||_3^3 by grid
    quadrature."""
    if isinstance(u, AnsatzProfile):
        u = u.fn
    w = u.grid.quad_weights
    kinetic = 0.5 * float(np.dot(w, u.derivative ** 2))
    mass = 0.5 * lam * float(np.dot(w, u.values ** 2))
    cubic = float(np.dot(w, np.abs(u.values) ** 3)) / 3.0
    return kinetic - mass - cubic


def _base_energy(S: _SplineSet, eps: float, lam: float) -> float:
    """J(z) via 1/2 int z (-Delta z) - lam/2 int z^2 - 1/3 int z^3."""
    edges = S.knots

    def integrand(r):
        z = S.z(r, eps)
        if np.any(z < 0.0):
            raise ConfigError("z must stay positive on the ball for the "
                              "base-energy formula; reduce |eps|")
        return (0.5 * z * S.neg_laplacian_z(r, eps)
                - 0.5 * lam * z ** 2 - z ** 3 / 3.0)

    return _ball_quad(integrand, edges)


def _energy_gap(S: _SplineSet, eps: float, mu: float, beta: int,
                lam: float, crossing: float) -> float:
    """J(V) - J(z) assembled from pointwise-small differences.

    Quadratic groups use the exact bubble integrals; the cubic group is
    split at the sign change and expanded so each integrand is evaluated
    without subtracting O(1) totals.
    """
    c = boundary_trace(mu)
    iu = ball_integral_u(mu)
    iu2 = ball_integral_u2(mu)
    iu3 = ball_integral_u3(mu)
    w_l2 = iu2 - 2.0 * c * iu + c ** 2 * ball_volume(6)

    def wfield(r):
        return talenti_u(r, mu) - c

    def zu2(r):
        return S.z(r, eps) * talenti_u(r, mu) ** 2

    def zw(r):
        return S.z(r, eps) * wfield(r)

    full_edges = _mu_refined_edges(S.knots, mu, 0.0, 1.0)
    grad_gap = beta * _ball_quad(zu2, full_edges) + 0.5 * (iu3 - c * iu2)
    mass_gap = -lam * beta * _ball_quad(zw, full_edges) - 0.5 * lam * w_l2

    if beta == -1:
        def cubic_inner(r):
            z, w = S.z(r, eps), wfield(r)
            return -w ** 3 / 3.0 + w ** 2 * z - w * z ** 2 + 2.0 * z ** 3 / 3.0

        def cubic_outer(r):
            z, w = S.z(r, eps), wfield(r)
            return z ** 2 * w - z * w ** 2 + w ** 3 / 3.0

        inner_edges = _mu_refined_edges(S.knots, mu, 0.0, crossing)
        outer_edges = _mu_refined_edges(S.knots, mu, crossing, 1.0)
        cubic_gap = (_ball_quad(cubic_inner, inner_edges)
                     + _ball_quad(cubic_outer, outer_edges))
    else:
        def cubic_whole(r):
            z, w = S.z(r, eps), wfield(r)
            return -(z ** 2 * w + z * w ** 2 + w ** 3 / 3.0)

        cubic_gap = _ball_quad(cubic_whole, full_edges)

    return grad_gap + mass_gap + cubic_gap


def _direct_ansatz_energy(S: _SplineSet, eps: float, mu: float, beta: int,
                          lam: float, crossing: float) -> float:
    """Single-shot J(V) by quadrature, used to audit the assembled gap."""
    c = boundary_trace(mu)

    def kinetic(r):
        return 0.5 * (S.dz(r, eps) + beta * talenti_du(r, mu)) ** 2

    def vfield(r):
        return S.z(r, eps) + beta * (talenti_u(r, mu) - c)

    def quadratic(r):
        return -0.5 * lam * vfield(r) ** 2

    def cubic(r):
        return -np.abs(vfield(r)) ** 3 / 3.0

    if beta == -1 and not math.isnan(crossing):
        extra = (crossing,)
    else:
        extra = ()
    edges = _mu_refined_edges(S.knots, mu, 0.0, 1.0, extra=extra)
    return (_ball_quad(kinetic, edges) + _ball_quad(quadratic, edges)
            + _ball_quad(cubic, edges))


# ---------------------------------------------------------------------------
# the expansion sweep

@dataclass(frozen=True)
class ExpansionRow:
    """One (eps, tau-multiplier) cell of the expansion comparison."""

    eps: float
    tau_mult: float
    mu: float
    j_ansatz: float
    j_base: float
    delta: float
    e_pred: float
    defect: float
    residual_l32: float
    audit_gap: float

    def as_dict(self) -> dict:
        return {
            "eps": self.eps,
            "tau_mult": self.tau_mult,
            "mu": self.mu,
            "j_ansatz": self.j_ansatz,
            "j_base": self.j_base,
            "delta": self.delta,
            "e_pred": self.e_pred,
            "defect": self.defect,
            "residual_l32": self.residual_l32,
            "audit_gap": self.audit_gap,
        }


@dataclass(frozen=True)
class ExpansionReport:
    """Fitted expansion coefficients against their closed-form targets.

    delta = J(V) - J(z) is regressed on {1, mu^2, eps mu^2, mu^3} plus
    nuisance columns {eps^2 mu^2, eps mu^3, mu^4, mu^4 log mu} that the
    next expansion orders contribute; without them the leading-column
    readings absorb percent-level bias.  remainder_exponent is the
    log-log slope, along the mu = tau* |eps| ray, of the defect
    delta - c2 + E (the part of the energy the closed-form three-term
    model fails to capture), and residual_exponent is the slope of the
    ansatz residual norm on the same ray.
    """

    lam0: float
    tau_star_value: float
    rows: tuple
    coef_const: float
    coef_mu2: float
    coef_eps_mu2: float
    coef_mu3: float
    coef_eps2_mu2: float
    coef_eps_mu3: float
    c2_closed: float
    target_eps_mu2: float
    target_mu3: float
    remainder_exponent: float
    residual_exponent: float

    def as_dict(self) -> dict:
        return {
            "lambda0": self.lam0,
            "tau_star": self.tau_star_value,
            "rows": [row.as_dict() for row in self.rows],
            "coef_const": self.coef_const,
            "coef_mu2": self.coef_mu2,
            "coef_eps_mu2": self.coef_eps_mu2,
            "coef_mu3": self.coef_mu3,
            "coef_eps2_mu2": self.coef_eps2_mu2,
            "coef_eps_mu3": self.coef_eps_mu3,
            "c2_closed": self.c2_closed,
            "target_eps_mu2": self.target_eps_mu2,
            "target_mu3": self.target_mu3,
            "remainder_exponent": self.remainder_exponent,
            "residual_exponent": self.residual_exponent,
        }


DEFAULT_EPS_MAGNITUDES = tuple(np.geomspace(0.02, 0.25, 8))
DEFAULT_TAU_MULTIPLIERS = (0.6, 0.8, 1.0, 1.25, 1.5)
REFINEMENT_EPS_MAGNITUDES = tuple(np.geomspace(0.05, 0.4, 6))


def cubic_coefficient_probe(profiles: AuxProfiles, mu_values=None) -> dict:
    """Measure the mu^3 coefficient of J(V) - J(z) at eps = 0 directly.

    Richardson extrapolation of (delta - c2)/mu^3 over a geometric mu
    ladder isolates the cubic coefficient from the mu^4 log mu tail; the
    ratio to d2 is the dimensionless constant the three-term expansion
    postulates.
    """
    if mu_values is None:
        mu_values = np.geomspace(4e-4, 4e-3, 6)
    mu_values = np.asarray(sorted(mu_values), dtype=float)
    S = _splines(profiles)
    c2 = ALPHA6 ** 3 * sphere_area(6) / 360.0
    lam0 = profiles.lam0
    ratios = []
    for mu in mu_values:
        crossing = _sign_crossing(S, 0.0, mu)
        delta = _energy_gap(S, 0.0, mu, -1, lam0, crossing)
        ratios.append((delta - c2) / mu ** 3)
    ratios = np.asarray(ratios)
    # leading drift is ~mu; eliminate it pairwise and keep the smallest-mu
    # extrapolant
    q = mu_values[1:] / mu_values[:-1]
    extrap = (q * ratios[:-1] - ratios[1:]) / (q - 1.0)
    value = float(extrap[0])
    spread = float(np.max(np.abs(np.diff(extrap))))
    # with the cubic term removed, the rest of the gap is the expansion
    # tail; its measured exponent certifies the remainder order
    tail = np.abs((ratios - value) * mu_values ** 3)
    tail_exponent = float(np.polyfit(np.log(mu_values), np.log(tail), 1)[0])
    return {
        "mu3_coefficient": value,
        "extrapolation_spread": spread,
        "ratio_to_d2": value / d2_value(S.u00),
        "tail_exponent": tail_exponent,
        "mu_values": [float(m) for m in mu_values],
    }


def case1_parameters(profiles: AuxProfiles) -> tuple[float, float]:
    """(sign of eps, tau*) for the fixed-center construction at the
    center with beta = -1."""
    b = 0.5 - profiles.v0
    if b == 0.0:
        raise AllPointsExcludedError("v(0) = 1/2: no fixed-center "
                                     "construction at the center")
    d2 = d2_value(profiles.u0.values[0])
    return -math.copysign(1.0, b), tau_star(d1_closed_form() * abs(b), d2)


def expansion_check(profiles: AuxProfiles,
                    eps_magnitudes=DEFAULT_EPS_MAGNITUDES,
                    tau_multipliers=DEFAULT_TAU_MULTIPLIERS,
                    audit_rows: int = 2) -> ExpansionReport:
    """Sweep (eps, mu) on the fixed-center schedule and fit the expansion.

    Every row carries J(V), J(z), their gap, the three-term prediction,
    and the residual norm; audit_rows rows are recomputed by single-shot
    quadrature of J(V) to bound the assembly error of the gap route.
    """
    mags = sorted(float(m) for m in eps_magnitudes)
    if len(mags) < 6:
        raise ConfigError("at least 6 eps magnitudes are required")
    if len(set(mags)) != len(mags):
        raise ConfigError("eps magnitudes must be distinct")
    S = _splines(profiles)
    lam0 = profiles.lam0
    u00, v00 = S.u00, S.v00
    sign, tau0 = case1_parameters(profiles)
    beta = -1

    rows = []
    audit_set = {0, len(mags) - 1} if audit_rows >= 2 else set()
    for i, mag in enumerate(mags):
        eps = sign * mag
        lam = lam0 + eps
        j_base = _base_energy(S, eps, lam)
        for t in tau_multipliers:
            mu = t * tau0 * mag
            crossing = _sign_crossing(S, eps, mu)
            delta = _energy_gap(S, eps, mu, beta, lam, crossing)
            e_pred = expansion_E(u00, v00, beta, mu, eps, lam0)
            resid = _residual_l32(S, eps, mu, beta, lam, crossing)
            c2 = ALPHA6 ** 3 * sphere_area(6) / 360.0
            if i in audit_set and t == 1.0:
                direct = _direct_ansatz_energy(S, eps, mu, beta, lam,
                                               crossing)
                audit = abs(direct - j_base - delta)
            else:
                audit = math.nan
            rows.append(ExpansionRow(
                eps=eps,
                tau_mult=t,
                mu=mu,
                j_ansatz=j_base + delta,
                j_base=j_base,
                delta=delta,
                e_pred=e_pred,
                defect=delta - c2 + e_pred,
                residual_l32=resid,
                audit_gap=audit,
            ))

    eps_arr = np.array([row.eps for row in rows])
    mu_arr = np.array([row.mu for row in rows])
    y = np.array([row.delta for row in rows])
    columns = np.column_stack([
        np.ones_like(mu_arr),
        mu_arr ** 2,
        eps_arr * mu_arr ** 2,
        mu_arr ** 3,
        eps_arr ** 2 * mu_arr ** 2,
        eps_arr * mu_arr ** 3,
        mu_arr ** 4,
        mu_arr ** 4 * np.log(mu_arr),
    ])
    scale = np.max(np.abs(columns), axis=0)
    coef, *_ = np.linalg.lstsq(columns / scale, y, rcond=None)
    coef /= scale
    central = [row for row in rows if math.isclose(row.tau_mult, 1.0)]

    def _ray_slope(values) -> float:
        vals = np.asarray(values, dtype=float)
        keep = np.abs(vals) > 1e-12
        if np.count_nonzero(keep) < 4:
            return math.inf
        x = np.log([row.mu for row, k in zip(central, keep) if k])
        return float(np.polyfit(x, np.log(np.abs(vals[keep])), 1)[0])

    rem_slope = _ray_slope([row.defect for row in central])
    res_slope = _ray_slope([row.residual_l32 for row in central])

    d1 = d1_closed_form()
    return ExpansionReport(
        lam0=lam0,
        tau_star_value=tau0,
        rows=tuple(rows),
        coef_const=float(coef[0]),
        coef_mu2=float(coef[1]),
        coef_eps_mu2=float(coef[2]),
        coef_mu3=float(coef[3]),
        coef_eps2_mu2=float(coef[4]),
        coef_eps_mu3=float(coef[5]),
        c2_closed=ALPHA6 ** 3 * sphere_area(6) / 360.0,
        target_eps_mu2=-d1 * (0.5 + beta * v00),
        target_mu3=-(11.0 / 9.0) * d2_value(u00),
        remainder_exponent=rem_slope,
        residual_exponent=res_slope,
    )


# ---------------------------------------------------------------------------
# Newton refinement sweep (the remainder-size proxy)

@dataclass(frozen=True)
class RefinementRow:
    """Newton outcome for one fixed-center ansatz."""

    eps: float
    mu: float
    distance_h1: float
    iterations: int
    residual_l32: float
    multiplier: float

    def as_dict(self) -> dict:
        return {
            "eps": self.eps,
            "mu": self.mu,
            "distance_h1": self.distance_h1,
            "iterations": self.iterations,
            "residual_l32": self.residual_l32,
            "multiplier": self.multiplier,
        }


@dataclass(frozen=True)
class RefinementReport:
    """Newton-refinement sweep with the fitted decay of the correction.

    distance_exponent fits ||u* - V||_{H^1} against mu_bar after dividing
    out the slowly varying factor |ln mu_bar|^{2/3} that multiplies the
    quadratic term of the remainder bound; distance_exponent_raw fits the
    distances as they are.  Over any finite mu_bar window the raw fit
    sits below the adjusted one by roughly (2/3)/|ln mu_bar|.
    """

    rows: tuple
    distance_exponent: float
    distance_exponent_raw: float

    def as_dict(self) -> dict:
        return {
            "rows": [row.as_dict() for row in self.rows],
            "distance_exponent": self.distance_exponent,
            "distance_exponent_raw": self.distance_exponent_raw,
        }


def refinement_sweep(profiles: AuxProfiles,
                     eps_magnitudes=REFINEMENT_EPS_MAGNITUDES,
                     tau_mult: float = 1.0,
                     h_over_scale: float = 0.0025,
                     h_max: float = 1.0 / 512.0,
                     max_iter: int = 60) -> RefinementReport:
    """Refine the ansatz to a true solution for each eps and record the
    H^1 drift, which the remainder bound controls by mu^2 log and eps^3
    terms.

    Newton runs in the core variable y = r/mu with the critically scaled
    unknown mu^2 u(mu y), where the bubble has amplitude and spacing O(1).
    In the original variable the flux differences of the discrete
    Laplacian cancel to (h/mu)^2 of terms of size 1/mu^4, and the rounding
    floor eps_mach |u| / h^2 swamps the Newton correction long before the
    iteration can settle; the rescaling removes the cancellation while the
    gradient seminorm, the L^{3/2} residual norm, and the solution set of
    the discrete system are all invariant under it.

    The iteration is pinned along the dilation generator of the bubble,
    mu d/dmu of the scaled profile, the direction in which the
    linearization is nearly singular; the refined profile solves the
    equation in the complement and the recorded distance is the size of
    the transversal correction, the quantity the remainder bound speaks
    about.  The leftover one-dimensional defect is the Newton result's
    multiplier.
    """
    sign, tau0 = case1_parameters(profiles)
    rows = []
    for mag in sorted(float(m) for m in eps_magnitudes):
        eps = sign * mag
        mu = tau_mult * tau0 * mag
        spec = AnsatzSpec(profiles=profiles, eps=eps,
                          bubbles=(BubbleParams(mu=mu, beta=-1),))
        grid = make_core_grid(6, mu, h_over_scale=h_over_scale, h_max=h_max)
        ansatz = assemble_ansatz(spec, grid=grid)
        core_grid = rescale_grid(grid, 1.0 / mu)
        guess = RadialFn(core_grid, mu ** 2 * ansatz.fn.values,
                         mu ** 3 * ansatz.fn.derivative)
        y = core_grid.nodes
        pin = RadialFn.from_values(
            core_grid, 48.0 * (1.0 - y ** 2) / (1.0 + y ** 2) ** 3)
        result = newton_refine(guess, spec.lam * mu ** 2,
                               max_iter=max_iter, pin=pin)
        err = RadialFn(grid,
                       (result.profile.values - guess.values) / mu ** 2,
                       (result.profile.derivative - guess.derivative) / mu ** 3)
        rows.append(RefinementRow(
            eps=eps,
            mu=mu,
            distance_h1=h1_norm(err),
            iterations=result.iterations,
            residual_l32=residual_norm(ansatz, spec.lam),
            multiplier=result.multiplier,
        ))
    log_mu = np.log([row.mu for row in rows])
    log_d = np.log([row.distance_h1 for row in rows])
    raw = float(np.polyfit(log_mu, log_d, 1)[0])
    adjusted = float(np.polyfit(log_mu, log_d - (2.0 / 3.0) * np.log(-log_mu), 1)[0])
    return RefinementReport(rows=tuple(rows), distance_exponent=adjusted,
                            distance_exponent_raw=raw)
