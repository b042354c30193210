"""Concentration bubbles on R^6, their ball projections, and constants.

The extremal profile of the critical Sobolev embedding at N = 6 is

    U_mu(x) = alpha_6 mu^2 / (mu^2 + |x|^2)^2,   alpha_6 = [N(N-2)]^{(N-2)/4} = 24,

which solves -Delta U = U^2 on all of R^6.  Centered at the origin its
projection to H^1_0(B_1) is exact: the harmonic correction is the
constant boundary trace, so

    W_mu = U_mu - c(mu),   c(mu) = U_mu(1) = 24 mu^2 / (1 + mu^2)^2,

satisfies -Delta W = U^2 with W(1) = 0.  For off-center bubbles the
correction is alpha_6 mu^2 H(x, xi) + O(mu^4) with H the Kelvin-image
regular part of the Green's function,

    H(x, xi) = (|xi| |x - xi / |xi|^2|)^{-4},  H(x, 0) = 1.

Every ball integral of a power of U reduces, via t = r^2 and u = mu^2 + t,
to an exact rational/log antiderivative; those closed forms are what the
energy expansion consumes, since they carry the mu^2 log mu cancellations
that quadrature would have to resolve numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .grid import RadialFn, RadialGrid, ball_volume, sphere_area

ALPHA6 = 24.0
N6 = 6


def alpha(dimension: int) -> float:
    """Sobolev profile amplitude [N(N-2)]^{(N-2)/4}."""
    return (dimension * (dimension - 2.0)) ** ((dimension - 2.0) / 4.0)


def talenti_u(r, mu: float, dimension: int = N6):
    """The concentration profile alpha_N mu^{(N-2)/2} (mu^2 + r^2)^{-(N-2)/2}
    restricted to its radial part."""
    if mu <= 0.0:
        raise ValueError(f"mu must be positive, got {mu}")
    half = (dimension - 2.0) / 2.0
    return alpha(dimension) * mu ** half / (mu ** 2 + np.asarray(r, dtype=float) ** 2) ** half


def talenti_du(r, mu: float, dimension: int = N6):
    """Radial derivative of talenti_u."""
    half = (dimension - 2.0) / 2.0
    r = np.asarray(r, dtype=float)
    return -2.0 * half * r * alpha(dimension) * mu ** half \
        / (mu ** 2 + r ** 2) ** (half + 1.0)


def boundary_trace(mu: float) -> float:
    """c(mu) = U_mu(1), the constant harmonic extension on the ball."""
    return ALPHA6 * mu ** 2 / (1.0 + mu ** 2) ** 2


def kernel_psi0(r, mu: float):
    """Dilation kernel element Psi^0 = dU/dmu = 2 alpha_6 mu (r^2 - mu^2)
    (mu^2 + r^2)^{-3}; Psi^0_{1,0}(0) = -48."""
    r = np.asarray(r, dtype=float)
    return 2.0 * ALPHA6 * mu * (r ** 2 - mu ** 2) / (mu ** 2 + r ** 2) ** 3


def kernel_psi1(r, mu: float):
    """Radial factor of the translation kernel elements Psi^i =
    4 alpha_6 mu^2 (x^i - xi^i)(mu^2 + |x - xi|^2)^{-3}: the coefficient of
    the l = 1 harmonic x^i / r."""
    r = np.asarray(r, dtype=float)
    return 4.0 * ALPHA6 * mu ** 2 * r / (mu ** 2 + r ** 2) ** 3


def robin_h_ball(x, xi) -> float:
    """Regular part H(x, xi) of the Dirichlet Green's function on B_1 at
    N = 6, Kelvin image form; harmonic in x, equal to |x - xi|^{-4} on the
    boundary sphere."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    s = float(np.dot(xi, xi))
    if s == 0.0:
        return 1.0
    image = xi / s
    return float((math.sqrt(s) * np.linalg.norm(x - image)) ** -4)


def project_bubble(grid: RadialGrid, mu: float) -> tuple[RadialFn, float]:
    """H^1_0(B_1) projection of the centered bubble: W = U - c(mu), exact.

    Returns the profile and the constant trace c(mu).
    """
    if grid.dimension != N6:
        raise ValueError("bubble projection implemented for N = 6")
    c = boundary_trace(mu)
    vals = talenti_u(grid.nodes, mu) - c
    derivs = talenti_du(grid.nodes, mu)
    return RadialFn(grid, vals, derivs, regular_origin=True), c


# ---------------------------------------------------------------------------
# exact ball integrals of bubble powers (N = 6)
#
# with t = r^2, u = m + t, m = mu^2:  int_0^1 f(r) r^5 dr = (1/2) int_m^{m+1}
# f (u - m)^2 du, and (u - m)^2 / u^k expands into three monomials.

def _f2(u: float, m: float) -> float:
    # antiderivative of (u-m)^2 / u^2
    return u - 2.0 * m * math.log(u) - m ** 2 / u


def _f3(u: float, m: float) -> float:
    # antiderivative of (u-m)^2 / u^3
    return math.log(u) + 2.0 * m / u - m ** 2 / (2.0 * u ** 2)


def _f4(u: float, m: float) -> float:
    # antiderivative of (u-m)^2 / u^4
    return -1.0 / u + m / u ** 2 - m ** 2 / (3.0 * u ** 3)


def _f6(u: float, m: float) -> float:
    # antiderivative of (u-m)^2 / u^6
    return -1.0 / (3.0 * u ** 3) + m / (2.0 * u ** 4) - m ** 2 / (5.0 * u ** 5)


def ball_integral_u(mu: float) -> float:
    """int_{B_1} U_mu dx, exact."""
    m = mu ** 2
    val = _f2(m + 1.0, m) - (-2.0 * m * math.log(m))
    return sphere_area(N6) * ALPHA6 * m / 2.0 * val


def ball_integral_u2(mu: float) -> float:
    """int_{B_1} U_mu^2 dx, exact; tends to 96 pi^3 mu^2 as mu -> 0."""
    m = mu ** 2
    val = _f4(m + 1.0, m) - (-1.0 / (3.0 * m))
    return sphere_area(N6) * ALPHA6 ** 2 * m ** 2 / 2.0 * val


def ball_integral_u3(mu: float) -> float:
    """int_{B_1} U_mu^3 dx, exact; tends to 24^3 pi^3 / 60."""
    m = mu ** 2
    val = _f6(m + 1.0, m) - (-1.0 / (30.0 * m ** 3))
    return sphere_area(N6) * ALPHA6 ** 3 * m ** 3 / 2.0 * val


def ball_integral_u32(mu: float) -> float:
    """int_{B_1} U_mu^{3/2} dx, exact (the L^{3/2} mass, mu^3 log mu scale)."""
    m = mu ** 2
    val = _f3(m + 1.0, m) - (math.log(m) + 1.5)
    return sphere_area(N6) * ALPHA6 ** 1.5 * m ** 1.5 / 2.0 * val


def d1_closed_form() -> float:
    """||U_mu||^2_{L^2(R^6)} / mu^2 = 96 pi^3."""
    return 96.0 * math.pi ** 3


def d1_quadrature(R: float = 50.0) -> float:
    """Same constant by quadrature on [0, R] plus the analytic r^{-8} tail
    of U^2 = 24^2 mu^4 r^{-8} (1 + O(mu^2/r^2)) at mu = 1."""
    integrand = lambda r: talenti_u(r, 1.0) ** 2 * r ** 5
    head = quad(integrand, 0.0, R, epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    # exact tail: int_R^inf 24^2 r^5 (1+r^2)^{-4} dr with u = 1 + r^2
    m = 1.0
    tail = ALPHA6 ** 2 * m ** 2 / 2.0 * (0.0 - _f4(m + R ** 2, m))
    return sphere_area(N6) * (head + tail)


def d2_value(u_center: float) -> float:
    """d_2 = alpha_6^{3/2} omega_6 |u(xi_0)|^{3/2}."""
    return ALPHA6 ** 1.5 * sphere_area(N6) * abs(u_center) ** 1.5


@dataclass(frozen=True)
class ConstantsRegistry:
    """The expansion constants with both computation routes recorded."""

    alpha6: float
    omega6: float
    d1: float
    d1_quad: float
    d2: float
    u_center: float
    d2_formula: str = "alpha6^(3/2) * omega6 * |u(center)|^(3/2)"

    def as_dict(self) -> dict:
        return {
            "alpha6": self.alpha6,
            "omega6": self.omega6,
            "d1": self.d1,
            "d1_quadrature": self.d1_quad,
            "d2": self.d2,
            "u_center": self.u_center,
            "d2_formula": self.d2_formula,
        }


def constants(u_center: float) -> ConstantsRegistry:
    """Registry of expansion constants for a ground state with the given
    center value (lam_0 / 2 at the self-consistent parameter)."""
    return ConstantsRegistry(
        alpha6=ALPHA6,
        omega6=sphere_area(N6),
        d1=d1_closed_form(),
        d1_quad=d1_quadrature(),
        d2=d2_value(u_center),
        u_center=float(u_center),
    )
