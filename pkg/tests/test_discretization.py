import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from induced_ulam import canonical_lsv
from induced_ulam.discretization import (DoublingMap, HatBasis, Mesh, NodalDensity, TailToleranceError,
                                         apply_Qm, assemble, hat_integral, load_matrix, save_matrix)
from induced_ulam.inducing import build_induced


def test_doubling_two_cells_by_hand():
    # hat masses (1/4, 1/2, 1/4); each half-cell image is a full cell, whose mass is split 1/2-1/2
    P = assemble(DoublingMap(), 2).dense()
    expected = np.array([[0.375, 0.5, 0.125], [0.25, 0.5, 0.25], [0.125, 0.5, 0.375]])
    assert np.allclose(P, expected, atol=1e-15)


@pytest.mark.parametrize("m", [2, 3, 64, 1024])
def test_doubling_fixes_constants(m):
    P = assemble(DoublingMap(), m)
    v = P.masses / P.masses.sum()
    assert np.max(np.abs(P.left_apply(v) - v)) < 1e-15
    assert np.all(P.raw_row_sums == pytest.approx(1.0, abs=1e-14))


@given(st.integers(1, 40), st.floats(0.0, 1.0))
def test_hats_partition_unity(m, x):
    vals = HatBasis(Mesh(0.0, 1.0, m)).values(x)
    assert vals.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(vals >= 0)


@given(st.integers(1, 20), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_hat_integrals_add_up(m, p, q):
    a, b = sorted((p, q))
    basis = HatBasis(Mesh(0.0, 1.0, m))
    total = sum(hat_integral(basis, i, a, b) for i in range(m + 1))
    assert total == pytest.approx(b - a, abs=1e-13)


@given(st.lists(st.floats(0.0, 10.0), min_size=1, max_size=30))
def test_Qm_preserves_integral(avgs):
    mesh = Mesh(0.0, 1.0, len(avgs))
    f = apply_Qm(HatBasis(mesh), avgs)
    assert f.integral() == pytest.approx(np.mean(avgs), rel=1e-12, abs=1e-12)


def test_one_cell_induced_matrix():
    # a single cell: every hat sends its whole mass into the one cell
    P = assemble(build_induced(canonical_lsv(0.5), branch_count=50), 1).dense()
    assert np.allclose(P, 0.5)


@given(st.floats(0.1, 0.9), st.integers(2, 40), st.integers(200, 400))
def test_fast_route_matches_generic(alpha, m, B):
    ind = build_induced(canonical_lsv(alpha), branch_count=B)
    fast = assemble(ind, m).dense()
    slow = assemble(ind, m, route="generic").dense()
    assert np.max(np.abs(fast - slow)) < 1e-12


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_row_stochastic(alpha):
    ind = build_induced(canonical_lsv(alpha), branch_count=3000)
    P = assemble(ind, 64)
    assert np.max(np.abs(P.row_sums() - 1.0)) < 1e-13
    assert P.min_entry() >= 0.0
    assert np.all(P.tail_row_mass >= 0) and np.all(P.tail_row_mass < 1e-2)


def test_tail_tolerance_enforced():
    ind = build_induced(canonical_lsv(0.5), branch_count=10)
    with pytest.raises(TailToleranceError):
        assemble(ind, 8, tail_tol=1e-8)
    # the first hat sits inside the dropped tail when B = 1
    with pytest.raises(TailToleranceError):
        assemble(build_induced(canonical_lsv(0.5), branch_count=1), 2)


def test_sparse_path_matches_dense():
    ind = build_induced(canonical_lsv(0.5), branch_count=2000)
    from induced_ulam import discretization as d

    dense = assemble(ind, 64).dense()
    old = d.DENSE_LIMIT
    d.DENSE_LIMIT = 8
    try:
        sparse = assemble(ind, 64)
    finally:
        d.DENSE_LIMIT = old
    assert sparse.is_sparse
    v = np.random.default_rng(0).random(65)
    assert np.allclose(sparse.left_apply(v), v @ dense, atol=1e-15)


def test_cache_round_trip(tmp_path, induced05):
    P = assemble(induced05, 32, tail_tol=1e-8)
    path = tmp_path / "m.npz"
    save_matrix(path, P)
    back = load_matrix(path, P.meta)
    assert back is not None
    assert np.array_equal(back.dense(), P.dense())
    other = dict(P.meta, tail_tol=1e-7)
    assert load_matrix(path, other) is None
    assert load_matrix(tmp_path / "missing.npz", P.meta) is None


def test_nodal_density_eval_and_integral():
    mesh = Mesh(0.5, 1.0, 4)
    f = NodalDensity(mesh, np.array([0.0, 1.0, 2.0, 3.0, 4.0]))
    assert f(0.5625) == pytest.approx(0.5)
    assert f.eval_offset(0.0625) == pytest.approx(0.5)
    assert f.integral() == pytest.approx(2.0)
    assert f.normalized().integral() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        f(0.4)
