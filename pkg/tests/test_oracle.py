import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from induced_ulam import canonical_lsv
from induced_ulam.discretization import DoublingMap
from induced_ulam.oracle import DyadicMapError, Histogram, birkhoff_histogram, pure_ulam_full_map, ulam_matrix


@pytest.fixture(scope="module")
def hist(lsv05):
    return birkhoff_histogram(lsv05, n_iters=10 ** 6, bins=64, seed=3)


def test_histogram_is_a_density(hist):
    assert hist.counts.sum() == hist.n_iters == 10 ** 6
    assert np.sum(hist.density * hist.width) == pytest.approx(1.0, abs=1e-12)
    assert np.all(hist.sigma >= 0)


def test_histogram_seeded(lsv05, hist):
    again = birkhoff_histogram(lsv05, n_iters=10 ** 6, bins=64, seed=3)
    assert np.array_equal(again.counts, hist.counts)
    other = birkhoff_histogram(lsv05, n_iters=10 ** 6, bins=64, seed=4)
    assert not np.array_equal(other.counts, hist.counts)


def test_histogram_interpolation():
    h = Histogram(4, np.array([10, 20, 30, 40]), 100, 0, 0, 0)
    assert h.at(0.125) == pytest.approx((0.4, h.sigma[0]))
    d, s = h.at(0.25)
    assert d == pytest.approx(0.6)
    assert s == pytest.approx(np.hypot(h.sigma[0], h.sigma[1]) / 2)
    assert h.bin_of(1.0) == 3
    assert h.to_csv().splitlines()[0] == "bin_left,bin_right,density,sigma"


def test_dyadic_map_refused():
    with pytest.raises(DyadicMapError):
        birkhoff_histogram(DoublingMap(), n_iters=10)


def test_dyadic_with_jitter_is_roughly_uniform():
    h = birkhoff_histogram(DoublingMap(), n_iters=200_000, bins=8, seed=1, burn_in=10, jitter=1e-9)
    assert np.all(np.abs(h.density - 1.0) < 5 * h.sigma + 1e-3)


@given(st.integers(2, 200))
def test_ulam_rows_stochastic(m):
    U = ulam_matrix(canonical_lsv(0.5), m)
    assert np.max(np.abs(np.asarray(U.sum(axis=1)).ravel() - 1.0)) < 1e-14
    assert U.data.min() >= 0


def test_ulam_doubling_is_exact():
    r = pure_ulam_full_map(DoublingMap(), 64)
    assert np.allclose(r.density, 1.0, atol=1e-12)


def test_pure_ulam_matches_direct_solve(lsv05):
    r = pure_ulam_full_map(lsv05, 512)
    forced = pure_ulam_full_map(lsv05, 512, max_iter=1)
    assert forced.method == "direct"
    assert np.max(np.abs(r.density - forced.density)) < 1e-9
    assert np.sum(r.density) / 512 == pytest.approx(1.0)


def test_histogram_agrees_with_ulam(lsv05, hist):
    r = pure_ulam_full_map(lsv05, 64)
    mid = slice(16, 64)
    # same binning; allow the Ulam projection error on top of sampling noise
    assert np.all(np.abs(hist.density[mid] - r.density[mid]) < 6 * hist.sigma[mid] + 0.02)
