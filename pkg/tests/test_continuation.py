"""Branch tracing over amplitude and large-amplitude limit extraction."""

import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import jn_zeros, jv

from bn6.continuation import (
    RESIDUAL_TOL,
    Branch,
    LimitEstimate,
    extract_limit,
    radial_eigenvalue,
    trace_branch,
)
from bn6.errors import BranchLostError
from bn6.shooting import BranchPoint, solve_bvp

# m-th radial Dirichlet eigenvalue of -Delta on B_1 in R^N: squared m-th
# zero of J_{N/2-1}.  N = 3 gives (m pi)^2; N = 5 needs brentq on the
# half-integer order.
RADIAL_EV = {
    (3, 1): math.pi ** 2,
    (3, 2): 4.0 * math.pi ** 2,
    (3, 3): 9.0 * math.pi ** 2,
    (4, 2): jn_zeros(1, 2)[1] ** 2,
    (5, 2): brentq(lambda x: jv(1.5, x), 6.5, 9.5) ** 2,
    (6, 2): jn_zeros(2, 2)[1] ** 2,
}


@pytest.mark.parametrize("dim,m", sorted(RADIAL_EV))
def test_radial_eigenvalue_matches_bessel(dim, m):
    got = radial_eigenvalue(dim, m)
    assert got == pytest.approx(RADIAL_EV[(dim, m)], rel=1e-8)


def test_radial_eigenvalue_rejects_bad_m():
    with pytest.raises(ValueError):
        radial_eigenvalue(6, 0)


def _synthetic_point(amplitude, lam, m=1):
    return BranchPoint(3, float(lam), float(amplitude), m, 0.0, 0, None)


def _synthetic_branch(amps, lams, m=1):
    pts = tuple(_synthetic_point(a, l, m) for a, l in zip(amps, lams))
    return Branch(3, m, pts)


def test_branch_rejects_unordered_amplitudes():
    with pytest.raises(ValueError):
        _synthetic_branch([1.0, 3.0, 2.0], [5.0, 4.0, 3.0])


def test_branch_rejects_mixed_nodal_counts():
    pts = (_synthetic_point(1.0, 5.0, m=1), _synthetic_point(2.0, 4.0, m=2))
    with pytest.raises(ValueError):
        Branch(3, 1, pts)


def test_extract_limit_input_validation():
    amps = np.geomspace(1.0, 128.0, 8)
    branch = _synthetic_branch(amps, 5.0 + 1.0 / amps)
    with pytest.raises(ValueError):
        extract_limit(branch, tail_length=7)
    short = _synthetic_branch(amps[:5], 5.0 + 1.0 / amps[:5])
    with pytest.raises(ValueError):
        extract_limit(short)


def test_power_tail_recovered_exactly():
    amps = np.geomspace(1e2, 1e5, 12)
    lams = 5.0 + 3.0 * amps ** -1.5
    est = extract_limit(_synthetic_branch(amps, lams))
    assert est.model == "power"
    # exact data, so the floor is curve_fit's own stopping tolerance
    assert est.lam_infinity == pytest.approx(5.0, abs=1e-6)
    assert est.exponent == pytest.approx(1.5, rel=1e-4)
    assert est.coefficient == pytest.approx(3.0, rel=1e-3)
    assert est.monotone and not est.alternating
    assert not est.poor_fit
    assert est.uncertainty < 1e-4


def test_log_tail_selects_log_model():
    # gap closing like 1/ln(a) is slower than any power; the power fit
    # stalls above the limit and the shifted-log law must take over
    amps = np.geomspace(1e3, 1e6, 10)
    lams = 10.0 - 12.0 / (np.log(amps) - 3.0)
    est = extract_limit(_synthetic_branch(amps, lams))
    assert est.model == "log"
    assert est.exponent == 1.0
    assert est.lam_infinity == pytest.approx(10.0, abs=1e-6)
    assert est.coefficient == pytest.approx(-12.0, rel=1e-4)


def test_alternating_tail_flagged():
    amps = np.geomspace(1e2, 1e5, 8)
    lams = 7.0 + np.array([(-1.0) ** k for k in range(8)]) * amps ** -0.4
    est = extract_limit(_synthetic_branch(amps, lams))
    assert est.alternating and not est.monotone
    # boxing keeps the extrapolation inside the data's reach even here
    span = lams.max() - lams.min()
    assert lams.min() - span <= est.lam_infinity <= lams.max() + span


def test_extract_limit_is_deterministic():
    amps = np.geomspace(10.0, 1e4, 9)
    lams = 2.0 + 0.7 * amps ** -0.8
    branch = _synthetic_branch(amps, lams)
    assert extract_limit(branch) == extract_limit(branch)
    assert isinstance(extract_limit(branch), LimitEstimate)


def test_limit_estimate_round_trips_to_dict():
    amps = np.geomspace(10.0, 1e4, 9)
    est = extract_limit(_synthetic_branch(amps, 2.0 + 0.7 * amps ** -0.8))
    d = est.as_dict()
    assert d["model"] == est.model
    assert d["tail"] == [list(pair) for pair in est.tail]
    assert len(d["tail"]) == 8


def test_trace_branch_ground_state_short_window():
    branch = trace_branch(3, 1, a_start=1.0, a_end=256.0)
    assert len(branch.points) == 9
    assert branch.diagnostics == ()
    assert all(p.residual <= RESIDUAL_TOL for p in branch.points)
    assert all(p.nodal_count == 1 for p in branch.points)
    # lambda decreases toward its limit on the ground-state branch
    assert np.all(np.diff(branch.lambdas) < 0.0)

    # matching is fold-free: an independent solve at a traced lambda
    # returns the traced amplitude
    mid = branch.points[4]
    again = solve_bvp(3, mid.lam, 1)
    assert again.amplitude == pytest.approx(mid.amplitude, rel=1e-8)

    est = extract_limit(branch)
    limit = math.pi ** 2 / 4.0
    assert est.lam_infinity == pytest.approx(limit, rel=0.05)
    assert math.isfinite(est.uncertainty)

    # dropping the newest point moves the estimate by at most the quoted
    # uncertainty: the error bar covers window-shift sensitivity
    est2 = extract_limit(Branch(3, 1, branch.points[:-1]))
    assert abs(est2.lam_infinity - est.lam_infinity) <= 1.5 * est.uncertainty


def test_trace_branch_raises_when_window_is_hopeless():
    # the fixed profile grid stops resolving the spike at extreme
    # amplitude; every schedule entry is rejected and the trace reports
    # the loss instead of returning junk
    with pytest.raises(BranchLostError):
        trace_branch(4, 2, a_start=1e7, a_end=4e7, points=2)
