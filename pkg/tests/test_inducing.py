import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from induced_ulam import canonical_lsv
from induced_ulam.constants import compute_constants
from induced_ulam.inducing import (BranchCapError, branch_inverse, branches_for_tolerance, build_induced,
                                   induced_value, inverse_orbit_table, tail_mass_bound, locate_branch,
                                   locate_k, neutral_orbit, return_time)

X1 = 0.28492014549902663295569997905978432441989871956447
LAMBDA_HAT_Z2 = 0.21507985450097336704430002094021567558010128043553


def test_first_branches(induced05):
    z1 = induced05.branch(1)
    assert (z1.a, z1.b) == (0.75, 1.0)
    z2 = induced05.branch(2)
    assert z2.a == pytest.approx((1 + X1) / 2, rel=1e-15)
    assert z2.b == 0.75
    assert induced05.branch_measure()[1] == pytest.approx(LAMBDA_HAT_Z2, rel=1e-14)


def test_measures_partition_delta(induced05):
    total = induced05.branch_measure().sum() + induced05.tail_mass
    assert total == pytest.approx(1.0, abs=1e-14)


def test_tail_tolerance_met(induced05):
    assert induced05.tail_mass <= 1e-8
    shorter = build_induced(induced05.spec, branch_count=induced05.branch_count - 1)
    assert shorter.tail_mass > 1e-8


def test_tail_within_series_bound(lsv05, induced05):
    b = compute_constants(lsv05, 1.0)
    assert induced05.tail_mass <= tail_mass_bound(b.C2, lsv05, induced05.branch_count)


def test_branch_cap_reports_needed_count():
    with pytest.raises(BranchCapError) as info:
        branches_for_tolerance(canonical_lsv(0.7), 1e-8, cap=1000)
    assert info.value.needed > 1000


def test_orbit_decreasing(lsv05):
    xs = neutral_orbit(lsv05, 2000).xs
    assert xs[0] == 0.5
    assert np.all(np.diff(xs) < 0) and xs[-1] > 0


@given(st.floats(0.5, 1.0, exclude_min=True))
def test_locate_branch_matches_forward_return_time(z):
    spec = canonical_lsv(0.5)
    ind = build_induced(spec, branch_count=400)
    n = int(locate_branch(ind, z))
    if n == 0 or n > 40:
        return  # deep branches: forward iteration loses the boundary to round-off
    b = ind.branch(n)
    # skip points within round-off of a branch boundary
    if min(z - b.a, b.b - z) < 1e-12:
        return
    assert return_time(spec, z) == n


@given(st.integers(1, 30), st.floats(0.5, 1.0, exclude_max=True))  # Z_n is half-open at b_n
def test_branch_inverse_is_onto(n, y):
    ind = build_induced(canonical_lsv(0.5), branch_count=30)
    z = branch_inverse(ind, n, y)
    b = ind.branch(n)
    assert b.a - 1e-15 <= z <= b.b + 1e-15
    if n <= 10 and min(z - b.a, b.b - z) > 1e-12:
        assert induced_value(ind, z) == pytest.approx(y, abs=1e-9)


def test_locate_k_half_open(lsv05):
    orbit = neutral_orbit(lsv05, 50)
    xs = orbit.xs
    assert locate_k(orbit, xs[3]) == 3
    assert locate_k(orbit, 0.5 * (xs[3] + xs[2])) == 3
    assert locate_k(orbit, 0.5) == 0
    assert locate_k(orbit, 0.25) == 2  # x_2 = 0.178 <= 0.25 < x_1 = 0.285


def test_inverse_table_rows(induced05):
    nodes = np.array([0.5, 0.75, 1.0])
    tab = inverse_orbit_table(induced05, nodes, 4)
    assert np.array_equal(tab[0], nodes)
    assert tab[1, 0] == pytest.approx(X1, rel=1e-15)
    assert np.all(np.diff(tab, axis=0) < 0)


@given(st.floats(0.05, 0.95))
def test_orbit_lower_envelope(alpha):
    # y^(-a) >= x^(-a) - a 2^a along y = T1(x), summed down the orbit
    xs = neutral_orbit(canonical_lsv(alpha), 5000).xs
    n = np.arange(len(xs))
    lower = (0.5 ** -alpha + n * alpha * 2.0 ** alpha) ** (-1.0 / alpha)
    assert np.all(xs >= lower * (1 - 1e-12))
