"""Auxiliary linear profiles and non-degeneracy certificates.

Around the ground state u_0 at the self-consistent parameter lam_0, the
linearized operator is L = -Delta - lam_0 - 2|u_0|.  Two profiles feed
the finite-dimensional expansion:

    L v = u_0,
    L w = v + sgn(u_0) v^2,

both radial with Dirichlet boundary.  Essential non-degeneracy of u_0 is
the statement that lam_0 keeps a positive distance from the Dirichlet
spectrum of -Delta - 2|u_0| in every angular sector; sectors l with

    nu_1(-Delta_0 - 2|u_0|) + l (l + N - 2) > lam_0

cannot close the gap because 1/r^2 >= 1 on the ball, so only finitely
many sectors need an eigensolve and the cutoff is certified, not assumed.

The translation-dilation identity provides a strong consistency check:
for any eta, the combination

    w_eta = (x - eta) . grad(u_0) / 2 + u_0 - lam_0 v

satisfies L w_eta = 0 exactly (it is built from the dilation generator,
the translation generators, and the v equation); its angular content is
sectors 0 and 1 only, and w_eta(0) = u_0(0) - lam_0 v(0) for every eta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RadialModeViolationError
from .grid import RadialFn, RadialGrid, lp_norm, make_grid
from .operators import (
    OperatorSpec,
    apply_operator,
    min_singular_value,
    sector_eigenvalues,
    solve_dirichlet,
)
from .shooting import Lambda0Certificate, find_lambda0, shoot

DEFAULT_L_MAX = 24


@dataclass(frozen=True, eq=False)
class AuxProfiles:
    """Ground state and the two auxiliary profiles on a shared grid."""

    dimension: int
    lam0: float
    amplitude: float
    u0: RadialFn = field(repr=False)
    v: RadialFn = field(repr=False)
    w: RadialFn = field(repr=False)

    @property
    def grid(self) -> RadialGrid:
        return self.u0.grid

    @property
    def v0(self) -> float:
        return float(self.v.values[0])

    @property
    def w0(self) -> float:
        return float(self.w.values[0])

    def linearized_potential(self) -> np.ndarray:
        return 2.0 * np.abs(self.u0.values)


def solve_v(u0: RadialFn, lam0: float) -> RadialFn:
    """Solve (-Delta - lam0 - 2|u_0|) v = u_0, v(1) = 0."""
    op = OperatorSpec(u0.grid, sector=0, lam=lam0,
                      potential=2.0 * np.abs(u0.values))
    return solve_dirichlet(op, u0)


def solve_w(u0: RadialFn, v: RadialFn, lam0: float) -> RadialFn:
    """Solve (-Delta - lam0 - 2|u_0|) w = v + sgn(u_0) v^2, w(1) = 0."""
    rhs_vals = v.values + np.sign(u0.values) * v.values ** 2
    rhs = RadialFn.from_values(u0.grid, rhs_vals)
    op = OperatorSpec(u0.grid, sector=0, lam=lam0,
                      potential=2.0 * np.abs(u0.values))
    return solve_dirichlet(op, rhs)


def build_profiles(dimension: int = 6,
                   certificate: Lambda0Certificate | None = None,
                   grid_n: int = 4096) -> AuxProfiles:
    """Assemble u_0, v, w on a uniform grid with grid_n cells."""
    if certificate is None:
        certificate = find_lambda0(dimension)
    grid = make_grid(dimension, grid_n, "uniform")
    u0 = shoot(dimension, certificate.lam0, certificate.amplitude,
               grid=grid).profile
    v = solve_v(u0, certificate.lam0)
    w = solve_w(u0, v, certificate.lam0)
    return AuxProfiles(dimension, certificate.lam0, certificate.amplitude,
                       u0, v, w)


def sector_spectrum(profiles: AuxProfiles, l_max: int = DEFAULT_L_MAX,
                    count: int = 4) -> np.ndarray:
    """Lowest eigenvalues of -Delta_l - 2|u_0| for l = 0..l_max.

    Returns an (l_max+1, count) array; row l is the ascending head of the
    sector-l Dirichlet spectrum.
    """
    if l_max < 1:
        raise RadialModeViolationError("l_max must cover at least sector 1")
    q = profiles.linearized_potential()
    rows = [sector_eigenvalues(profiles.grid, l, count, potential=q)
            for l in range(l_max + 1)]
    return np.vstack(rows)


@dataclass(frozen=True)
class ConcentrationPoint:
    """A critical point of u_0 sitting on the level +lam_0/2 or -lam_0/2.

    level is +1 or -1 for the two levels; beta = -level is the bubble sign
    that cancels the leading term of the reduced expansion there.  case is
    1 when v escapes both excluded levels +-1/2 (fixed-center schedule), 2
    when v hits +-1/2 but dv/dr does not vanish (shifted-center schedule),
    and 0 when the point supports no construction.
    """

    radius: float
    level: int
    u_value: float
    v_value: float
    dv_dr: float
    beta: int
    case: int


@dataclass(frozen=True)
class ConcentrationSurvey:
    """Critical-level survey of u_0 plus the scalar 2 v(0) - 1 report.

    essential is the verdict that the union of the two level sets is
    nonempty; two_v_minus_one carries a grid-refinement error bar when a
    coarse-grid value of v(0) is supplied (conservative: the full coarse-
    to-fine difference, about three times the Richardson error estimate).
    """

    lam0: float
    points: tuple
    two_v_minus_one: float
    two_v_error: float
    essential: bool

    def points_at(self, level: int) -> tuple:
        return tuple(p for p in self.points if p.level == level)

    def as_dict(self) -> dict:
        return {
            "lambda0": self.lam0,
            "points": [
                {
                    "radius": p.radius,
                    "level": p.level,
                    "u_value": p.u_value,
                    "v_value": p.v_value,
                    "dv_dr": p.dv_dr,
                    "beta": p.beta,
                    "case": p.case,
                }
                for p in self.points
            ],
            "two_v_minus_one": self.two_v_minus_one,
            "two_v_error": self.two_v_error,
            "essential": self.essential,
        }


LEVEL_RTOL = 1e-6
V_EXCLUSION_TOL = 1e-8


def _classify_case(v_value: float, dv_dr: float) -> int:
    if min(abs(v_value - 0.5), abs(v_value + 0.5)) > V_EXCLUSION_TOL:
        return 1
    if abs(dv_dr) > V_EXCLUSION_TOL:
        return 2
    return 0


def survey_concentration_points(profiles: AuxProfiles,
                                coarse_v0: float | None = None,
                                level_rtol: float = LEVEL_RTOL,
                                ) -> ConcentrationSurvey:
    """Enumerate critical points of u_0 on the levels +-lam_0/2.

    Radially the candidates are the center plus any interior zero of u_0';
    each is kept when u_0 matches one of the levels to level_rtol
    (relative to lam_0/2).  For the ground state the survey returns the
    center alone on the + level, matching the known ball picture.
    """
    lam0 = profiles.lam0
    half = 0.5 * lam0
    tol = level_rtol * half
    r = profiles.grid.nodes
    u, du = profiles.u0.values, profiles.u0.derivative
    v, dv = profiles.v.values, profiles.v.derivative

    candidates = [0.0]
    interior = slice(1, len(r) - 1)
    sign_flip = np.flatnonzero(np.diff(np.sign(du[interior])) != 0) + 1
    for i in sign_flip:
        denom = du[i + 1] - du[i]
        frac = 0.0 if denom == 0.0 else -du[i] / denom
        candidates.append(float(r[i] + frac * (r[i + 1] - r[i])))

    points = []
    for rc in candidates:
        u_val = float(np.interp(rc, r, u))
        for level in (+1, -1):
            if abs(u_val - level * half) <= tol:
                v_val = float(np.interp(rc, r, v))
                dv_val = 0.0 if rc == 0.0 else float(np.interp(rc, r, dv))
                points.append(ConcentrationPoint(
                    radius=rc,
                    level=level,
                    u_value=u_val,
                    v_value=v_val,
                    dv_dr=dv_val,
                    beta=-level,
                    case=_classify_case(v_val, dv_val),
                ))

    two_v = 2.0 * profiles.v0 - 1.0
    if coarse_v0 is None:
        err = math.nan
    else:
        err = 2.0 * abs(profiles.v0 - coarse_v0)
    return ConcentrationSurvey(
        lam0=lam0,
        points=tuple(points),
        two_v_minus_one=two_v,
        two_v_error=err,
        essential=bool(points),
    )


@dataclass(frozen=True)
class NondegeneracyReport:
    """Certificate that lam_0 avoids every sector's Dirichlet spectrum.

    sector_gaps[l] = min |nu - lam_0| over the computed head of sector l;
    comparison_l is the first sector where the centrifugal comparison bound
    nu_1(sector 0) + l(l+N-2) > lam_0 takes over, making the finite scan
    exhaustive (cutoff_certified).  hessian_witness is Delta u_0(0) =
    -(lam_0 u_0(0) + u_0(0)^2), strictly negative iff the center is a
    non-degenerate maximum.  survey carries the critical-level enumeration
    feeding the construction selector.
    """

    dimension: int
    lam0: float
    l_max: int
    sector_gaps: tuple
    min_gap: float
    comparison_l: int
    cutoff_certified: bool
    hessian_witness: float
    origin_value_gap: float
    survey: ConcentrationSurvey | None = None

    def as_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "lambda0": self.lam0,
            "l_max": self.l_max,
            "sector_gaps": list(self.sector_gaps),
            "min_gap": self.min_gap,
            "comparison_l": self.comparison_l,
            "cutoff_certified": self.cutoff_certified,
            "hessian_witness": self.hessian_witness,
            "origin_value_gap": self.origin_value_gap,
            "survey": None if self.survey is None else self.survey.as_dict(),
        }


def essential_nondegeneracy(profiles: AuxProfiles,
                            l_max: int = DEFAULT_L_MAX,
                            coarse_v0: float | None = None,
                            ) -> NondegeneracyReport:
    """Measure the spectral gap in each sector and certify the cutoff."""
    N = profiles.dimension
    lam0 = profiles.lam0
    q = profiles.linearized_potential()
    spec0 = sector_eigenvalues(profiles.grid, 0, 8, potential=q)
    nu1 = float(spec0[0])
    gaps = []
    for l in range(l_max + 1):
        op = OperatorSpec(profiles.grid, sector=l, lam=lam0, potential=q)
        gaps.append(min_singular_value(op))
    comparison_l = None
    for l in range(1, l_max + 1):
        if nu1 + l * (l + N - 2) > lam0:
            comparison_l = l
            break
    certified = comparison_l is not None and comparison_l <= l_max
    u00 = float(profiles.u0.values[0])
    witness = -(lam0 * u00 + u00 ** 2)
    return NondegeneracyReport(
        dimension=N,
        lam0=lam0,
        l_max=l_max,
        sector_gaps=tuple(float(g) for g in gaps),
        min_gap=float(min(gaps)),
        comparison_l=-1 if comparison_l is None else comparison_l,
        cutoff_certified=bool(certified),
        hessian_witness=witness,
        origin_value_gap=abs(u00 - 0.5 * lam0),
        survey=survey_concentration_points(profiles, coarse_v0=coarse_v0),
    )


@dataclass(frozen=True, eq=False)
class WEtaDecomposition:
    """Sector decomposition of w_eta = (x - eta) . grad(u_0)/2 + u_0 - lam_0 v.

    sector0 holds r u'/2 + u - lam_0 v; sector1 holds the radial
    coefficient -|eta| u'/2 of the (eta_hat . x_hat) harmonic.  Both are
    annihilated by the linearized operator in their sectors; the relative
    residuals record how well the discrete profiles satisfy that.
    """

    eta: tuple
    origin_value: float
    sector0: RadialFn = field(repr=False)
    sector1: RadialFn = field(repr=False)
    residual_sector0: float = 0.0
    residual_sector1: float = 0.0


def w_eta(profiles: AuxProfiles, eta) -> WEtaDecomposition:
    """Build the translation-dilation profile for a shift eta in B_1."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if len(eta) != profiles.dimension:
        raise ValueError(f"eta must have {profiles.dimension} components")
    mag = float(np.linalg.norm(eta))
    if mag >= 1.0:
        raise ValueError("eta must lie inside the unit ball")
    grid = profiles.grid
    r = grid.nodes
    u, du = profiles.u0.values, profiles.u0.derivative
    lam0 = profiles.lam0
    w0_vals = 0.5 * r * du + u - lam0 * profiles.v.values
    w1_vals = -0.5 * mag * du
    sector0 = RadialFn.from_values(grid, w0_vals)
    sector1 = RadialFn.from_values(grid, w1_vals, regular_origin=False)
    q = profiles.linearized_potential()
    res0 = _relative_sector_residual(grid, 0, lam0, q, sector0)
    res1 = _relative_sector_residual(grid, 1, lam0, q, sector1) if mag > 0 else 0.0
    return WEtaDecomposition(tuple(eta), float(u[0] - lam0 * profiles.v.values[0]),
                             sector0, sector1, res0, res1)


def _relative_sector_residual(grid: RadialGrid, sector: int, lam0: float,
                              q: np.ndarray, f: RadialFn) -> float:
    op = OperatorSpec(grid, sector=sector, lam=lam0, potential=q)
    res = apply_operator(op, f)
    scale_vals = (lam0 + q) * f.values
    num = lp_norm(RadialFn.from_values(grid, res), 2)
    den = lp_norm(RadialFn.from_values(grid, scale_vals), 2)
    return num / max(den, 1e-300)
