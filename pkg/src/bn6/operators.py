"""Radial sector operators on the unit ball and their linear algebra.

The Laplacian on B_1 restricted to the angular sector l (spherical
harmonic degree l) acts on radial profiles as

    (-Delta_l u)(r) = -u'' - (N-1)/r u' + l(l+N-2)/r^2 u .

The discrete form is the symmetric tridiagonal matrix obtained from
piecewise-linear elements with every coefficient moment int r^p dr
integrated exactly and the mass lumped onto the nodes; the lumped masses
coincide with the grid quadrature weights, so discrete duality
<L u, v> = <u, L v> holds to machine precision.  For l = 0 the origin
node carries the natural zero-flux (even parity) closure; for l >= 1
the profile vanishes at r = 0.  A Dirichlet condition u(1) = 0 is
imposed at the outer boundary throughout.

Operators of interest have the shifted Schroedinger form
L = -Delta_l - lam - q(r); `min_singular_value` measures the distance
from lam to the Dirichlet spectrum of -Delta_l - q in the lumped-mass
inner product, which is the quantity protecting linear solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal, get_lapack_funcs

from .errors import NearSingularError, NotConvergedError
from .grid import RadialFn, RadialGrid, differentiate

NEAR_SINGULAR_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """Spec for L = -Delta_l - lam - q on a grid.

    potential may be None (q = 0), a scalar, or a node-aligned array.
    """

    grid: RadialGrid
    sector: int = 0
    lam: float = 0.0
    potential: object = None

    def __post_init__(self):
        if self.sector < 0:
            raise ValueError(f"sector must be >= 0, got {self.sector}")
        q = self.potential
        if q is not None and not np.isscalar(q):
            if len(np.asarray(q)) != len(self.grid.nodes):
                raise ValueError("potential array must match grid length")

    def potential_values(self) -> np.ndarray:
        q = self.potential
        n = len(self.grid.nodes)
        if q is None:
            return np.zeros(n)
        if np.isscalar(q):
            return np.full(n, float(q))
        return np.asarray(q, dtype=float)


def _hat_moments(nodes: np.ndarray, p: int) -> np.ndarray:
    """Exact per-node moments int phi_i(r) r^p dr of the linear hats."""
    n = len(nodes) - 1
    out = np.zeros(n + 1)
    for i in range(n):
        a, b = nodes[i], nodes[i + 1]
        h = b - a
        m0 = (b ** (p + 1) - a ** (p + 1)) / (p + 1)
        m1 = (b ** (p + 2) - a ** (p + 2)) / (p + 2)
        out[i] += (b * m0 - m1) / h
        out[i + 1] += (m1 - a * m0) / h
    return out


class _Assembled:
    """Tridiagonal form of -Delta_l - q restricted to the unknown nodes.

    Unknowns are nodes istart..n-1 (istart = 0 for sector 0, else 1);
    node n is the Dirichlet boundary.  diag/upper/lower describe the
    stiffness-plus-centrifugal-minus-potential matrix A0 with
    A0 u = nu M u the lumped eigenproblem; masses is diag(M).
    """

    def __init__(self, op: OperatorSpec):
        grid = op.grid
        nodes = grid.nodes
        ncells = grid.n_cells
        N = grid.dimension
        l = op.sector
        # exact FEM stiffness couplings k_i = int_cell r^{N-1} dr / h^2
        cell_m0 = (nodes[1:] ** N - nodes[:-1] ** N) / N
        h = np.diff(nodes)
        k = cell_m0 / h ** 2
        masses_full = grid.cell_masses()
        cent_full = np.zeros(ncells + 1)
        if l > 0:
            cent_full = l * (l + N - 2) * _hat_moments(nodes, N - 3)
        qvals = op.potential_values()

        istart = 0 if l == 0 else 1
        idx = np.arange(istart, ncells)  # unknown node indices
        k_left = np.concatenate(([0.0], k))    # stiffness of the cell left of node i
        k_right = np.concatenate((k, [0.0]))   # and right of node i
        diag_full = k_left + k_right + cent_full - masses_full * qvals
        diag = diag_full[idx]
        # coupling between unknown nodes i and i+1 is the stiffness of cell i
        upper = -k[idx[:-1]]

        self.op = op
        self.istart = istart
        self.idx = idx
        self.diag = diag
        self.upper = upper
        self.masses = masses_full[idx]
        self.k = k
        self.cent_full = cent_full
        self.masses_full = masses_full
        self.qvals = qvals

    def shifted(self, lam: float):
        """diag/upper of A0 - lam M."""
        return self.diag - lam * self.masses, self.upper

    def eigenvalues(self, lam: float = 0.0, count: int | None = None) -> np.ndarray:
        """Eigenvalues of A0 z = nu M z, optionally only the lowest `count`."""
        sm = np.sqrt(self.masses)
        d = self.diag / self.masses
        e = self.upper / (sm[:-1] * sm[1:])
        if count is None:
            vals = eigvalsh_tridiagonal(d, e)
        else:
            count = min(count, len(d))
            vals = eigvalsh_tridiagonal(d, e, select="i",
                                        select_range=(0, count - 1))
        return vals - lam

    def factor(self, lam: float):
        """LU factor of A0 - lam M; returns a solve closure, raising
        NearSingularError when the factorization hits an exact zero pivot.

        The system is Jacobi-equilibrated first: near r = 0 the stiffness
        entries scale like h^{N-2} x h^2 and an unscaled elimination lets
        roundoff excite the singular homogeneous mode r^{2-N}.
        """
        d, u = self.shifted(lam)
        s = 1.0 / np.sqrt(np.maximum(np.abs(d), 1e-300))
        ds = d * s * s
        us = u * s[:-1] * s[1:]
        dl = us.copy()
        (gttrf,) = get_lapack_funcs(("gttrf",), (ds,))
        fact = gttrf(dl, ds, us)
        if fact[-1] > 0:
            raise NearSingularError(
                f"zero pivot in sector {self.op.sector} factorization at lam={lam}")
        dlf, df, duf, du2f, ipiv, _ = fact
        (gttrs,) = get_lapack_funcs(("gttrs",), (ds,))

        def solve(rhs: np.ndarray) -> np.ndarray:
            x, info = gttrs(dlf, df, duf, du2f, ipiv, s * rhs)
            if info != 0:
                raise NearSingularError("tridiagonal back-substitution failed")
            return s * x

        return solve

    def min_singular(self, lam: float, iterations: int = 8) -> float:
        """Smallest |nu - lam| over the pencil spectrum, by inverse iteration.

        Deterministic start vector; cheap enough for per-solve guards.
        Falls back to the full spectrum when inverse iteration stalls.
        """
        try:
            solve = self.factor(lam)
        except NearSingularError:
            return 0.0
        rng = np.random.default_rng(20260815)
        y = rng.standard_normal(len(self.diag))
        nu = np.inf
        for _ in range(iterations):
            z = solve(self.masses * y)
            nz = np.sqrt(np.dot(z, self.masses * z))
            if not np.isfinite(nz) or nz == 0.0:
                return 0.0
            z /= nz
            d, u = self.shifted(lam)
            az = d * z
            az[:-1] += u * z[1:]
            az[1:] += u * z[:-1]
            nu_new = float(np.dot(z, az))
            converged = abs(nu_new - nu) <= 1e-10 * max(1.0, abs(nu_new))
            nu = nu_new
            y = z
            if converged:
                break
        return abs(nu)

    def scale(self) -> float:
        """Gershgorin-type magnitude of the pencil, for singularity thresholds."""
        d = np.abs(self.diag / self.masses)
        sm = np.sqrt(self.masses)
        e = np.abs(self.upper / (sm[:-1] * sm[1:]))
        rad = d.copy()
        rad[:-1] += e
        rad[1:] += e
        return float(np.max(rad))


def assemble(op: OperatorSpec) -> _Assembled:
    return _Assembled(op)


def solve_dirichlet(op: OperatorSpec, g: RadialFn,
                    check_singular: bool = True) -> RadialFn:
    """Solve L u = g with u(1) = 0 (and the sector origin condition).

    Raises NearSingularError when lam sits within NEAR_SINGULAR_RTOL x scale
    of the sector spectrum, and NotConvergedError if the solved residual
    fails a defensive check.
    """
    if g.grid is not op.grid:
        raise ValueError("rhs grid does not match operator grid")
    asm = assemble(op)
    if check_singular:
        sigma = asm.min_singular(op.lam)
        if sigma < NEAR_SINGULAR_RTOL * asm.scale():
            raise NearSingularError(
                f"sector {op.sector}: lam={op.lam} within {sigma:.3e} of spectrum")
    solve = asm.factor(op.lam)
    rhs = asm.masses * g.values[asm.idx]
    x = solve(rhs)
    d, u = asm.shifted(op.lam)
    res = d * x
    res[:-1] += u * x[1:]
    res[1:] += u * x[:-1]
    res -= rhs
    rnorm = np.max(np.abs(res)) / max(np.max(np.abs(rhs)), 1e-300)
    if not np.isfinite(rnorm) or rnorm > 1e-8:
        raise NotConvergedError(f"linear solve residual {rnorm:.3e}")
    full = np.zeros(len(op.grid.nodes))
    full[asm.idx] = x
    deriv = differentiate(op.grid.nodes, full)
    if op.sector == 0:
        deriv[0] = 0.0
    return RadialFn(op.grid, full, deriv, regular_origin=(op.sector == 0))


def min_singular_value(op: OperatorSpec) -> float:
    """Distance from lam to the sector spectrum (authoritative full solve)."""
    asm = assemble(op)
    vals = asm.eigenvalues(lam=op.lam)
    return float(np.min(np.abs(vals)))


def sector_eigenvalues(grid: RadialGrid, sector: int, count: int,
                       potential: object = None) -> np.ndarray:
    """Lowest `count` Dirichlet eigenvalues of -Delta_l - q on B_1."""
    asm = assemble(OperatorSpec(grid, sector=sector, lam=0.0, potential=potential))
    return asm.eigenvalues(count=count)


def apply_operator(op: OperatorSpec, f: RadialFn) -> np.ndarray:
    """Pointwise strong-form values of L f at the nodes.

    Three-point finite differences in r at interior nodes; at the origin
    (sector 0 only) the even-parity form Delta u(0) = 2N du/d(r^2) is
    differenced in the variable s = r^2, which stays uniformly consistent
    as r -> 0.  Boundary entries (and the origin for sectors >= 1, where
    the profile vanishes) are zeroed.  Complements `weak_apply`: this
    form is for pointwise residual checks, that one for duality.
    """
    grid = op.grid
    r = grid.nodes
    u = f.values
    N = grid.dimension
    l = op.sector
    q = OperatorSpec.potential_values(op)
    n = len(r) - 1
    out = np.zeros(n + 1)
    # interior nodes: nonuniform 3-point second derivative + first derivative
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    upp = 2.0 * (hm * u[2:] - (hm + hp) * u[1:-1] + hp * u[:-2]) \
        / (hm * hp * (hm + hp))
    up = (u[2:] * hm ** 2 - u[:-2] * hp ** 2 + u[1:-1] * (hp ** 2 - hm ** 2)) \
        / (hm * hp * (hm + hp))
    ri = r[1:-1]
    lap = upp + (N - 1) / ri * up
    out[1:-1] = -lap + (l * (l + N - 2) / ri ** 2 - op.lam - q[1:-1]) * u[1:-1]
    if l == 0:
        # du/ds at s = 0, 3-point one-sided in s = r^2, written in
        # difference form so nearby-value cancellation happens first
        s1, s2 = r[1] ** 2, r[2] ** 2
        dus = ((u[1] - u[0]) / s1 * s2 - (u[2] - u[0]) / s2 * s1) / (s2 - s1)
        out[0] = -2.0 * N * dus - (op.lam + q[0]) * u[0]
    return out


def weak_apply(op: OperatorSpec, f: RadialFn) -> np.ndarray:
    """Lumped weak action (M^{-1} A) f at the nodes, boundary entries zeroed.

    Exactly symmetric in the mass inner product; the variational
    counterpart of `apply_operator`, and the residual the Dirichlet and
    Newton solvers actually drive to zero.
    """
    asm = assemble(op)
    u = f.values
    k, cent, masses, q = asm.k, asm.cent_full, asm.masses_full, asm.qvals
    flux = k * np.diff(u)                       # k_i (u_{i+1} - u_i) per cell
    inflow = np.concatenate(([0.0], flux))      # k_{i-1}(u_i - u_{i-1})
    outflow = np.concatenate((flux, [0.0]))     # k_i (u_{i+1} - u_i)
    out = (inflow - outflow + cent * u) / masses - (op.lam + q) * u
    out[-1] = 0.0
    if asm.istart == 1:
        out[0] = 0.0
    return out


def dirichlet_eigenvalue(dimension: int, index: int = 1, sector: int = 0,
                         n: int = 2048) -> float:
    """Radial Dirichlet eigenvalue of -Delta_l on B_1, Richardson-extrapolated
    from grids with n and 2n cells."""
    if index < 1:
        raise ValueError(f"index must be >= 1, got {index}")
    from .grid import make_grid
    coarse = sector_eigenvalues(make_grid(dimension, n), sector, index)[index - 1]
    fine = sector_eigenvalues(make_grid(dimension, 2 * n), sector, index)[index - 1]
    return float((4.0 * fine - coarse) / 3.0)
