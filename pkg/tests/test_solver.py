import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from induced_ulam.constants import compute_constants, density_sup_bound
from induced_ulam.discretization import DoublingMap, Mesh, NodalDensity, StochasticMatrix, assemble
from induced_ulam.solver import measure_of, stationary, sup_inf_var, uniform_density


def test_one_by_one():
    r = stationary(StochasticMatrix.from_array([[1.0]]), 1e-14)
    assert r.vector.tolist() == [1.0]
    assert r.residual == 0.0


def test_two_state_uniform():
    r = stationary(StochasticMatrix.from_array([[0.5, 0.5], [0.5, 0.5]]), 1e-14)
    assert np.allclose(r.vector, 0.5)


@pytest.mark.parametrize("m", [2, 64, 1024])
def test_doubling_one_iteration(m):
    r = stationary(assemble(DoublingMap(), m), 1e-14)
    assert r.iterations == 1
    assert r.residual < 1e-14
    assert np.allclose(r.density.values, 1.0, atol=1e-14)


@given(st.integers(2, 6), st.integers(0, 2 ** 32 - 1))
def test_random_stochastic_matrix(n, seed):
    A = np.random.default_rng(seed).random((n, n)) + 0.05
    A /= A.sum(axis=1, keepdims=True)
    r = stationary(StochasticMatrix.from_array(A), 1e-14)
    assert np.allclose(r.vector @ A, r.vector, atol=1e-13)
    assert np.all(r.vector > 0)


def test_measure_examples():
    mesh = Mesh(0.5, 1.0, 8)
    u = uniform_density(mesh)
    assert measure_of(u, (0.5, 1.0)) == pytest.approx(1.0)
    assert measure_of(u, (0.6, 0.85)) == pytest.approx(0.5)
    assert measure_of(u, (0.75, 1.0)) == pytest.approx(0.5)


@given(st.lists(st.floats(0.0, 5.0), min_size=3, max_size=12), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_measure_matches_fine_trapezoid(vals, p, q):
    mesh = Mesh(0.0, 1.0, len(vals) - 1)
    f = NodalDensity(mesh, np.array(vals))
    a, b = sorted((p, q))
    xs = np.linspace(a, b, 20001)
    ys = f(xs)
    fine = float(np.sum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs)))
    assert measure_of(f, (a, b)) == pytest.approx(fine, abs=1e-6)


def test_sup_inf_var_examples():
    mesh = Mesh(0.0, 1.0, 2)
    assert sup_inf_var(NodalDensity(mesh, np.full(3, 2.5))) == (2.5, 2.5, 0.0)
    assert sup_inf_var(NodalDensity(mesh, np.array([0.0, 1.0, 0.0])))[2] == 2.0


def test_stationary_properties(solved05):
    matrix, r = solved05
    assert r.converged and r.residual < 1e-13
    assert np.all(r.density.values > 0)
    assert r.density.integral() == pytest.approx(1.0, abs=1e-14)
    # residual history decreases along the iteration (round-off floor aside)
    h = r.history
    assert np.all(h[1:] <= h[:-1] * (1 + 1e-12) + 1e-15)
    assert 0.0 < r.lambda2 < 1.0


def test_normalisation_idempotent(solved05):
    _, r = solved05
    once = r.density.normalized()
    assert np.array_equal(once.normalized().values, once.values)


def test_sup_bound_holds(lsv05, solved05):
    _, r = solved05
    bound = density_sup_bound(compute_constants(lsv05, 1.0))
    # bound is stated for the Lebesgue-normalised density g = f_hat / |Delta|
    assert r.density.values.max() / lsv05.delta_length <= bound + 1e-6


def test_iteration_cap_reports_residual(solved05):
    matrix, _ = solved05
    r = stationary(matrix, 1e-30, max_iter=5)
    assert not r.converged and r.iterations == 5 and r.residual > 0


def test_eps_must_be_positive(solved05):
    with pytest.raises(ValueError):
        stationary(solved05[0], 0.0)
