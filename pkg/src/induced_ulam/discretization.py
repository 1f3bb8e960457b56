"""Piecewise-linear Markov discretisation of the induced transfer operator.

The operator P_m = Q_m o L_hat acts on continuous piecewise-linear densities
sum_i w_i psi_i over a uniform mesh of Delta (peak-1 hats). We store it in
hat-mass coordinates: with s_i = int psi_i, the vector v_i = w_i s_i evolves
under the row-stochastic matrix

    P[i, k] = (1 / s_i) * sum_j M[i, j] * B[j, k],

where M[i, j] = sum_b int_{T_b^{-1}(I_j)} psi_i is the mass hat i sends into
cell j and B splits each cell's mass evenly between its two end nodes (that
split is exactly what Q_m does to cell averages). Every entry of M is an
exact hat integral between branch preimages of mesh nodes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .inducing import InducedMap

DENSE_LIMIT = 2048


@dataclass(frozen=True)
class Mesh:
    a: float
    b: float
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("mesh needs at least one cell")
        if not self.b > self.a:
            raise ValueError("empty interval")

    @property
    def length(self) -> float:
        return self.b - self.a

    @property
    def h(self) -> float:
        return self.length / self.m

    @property
    def nodes(self) -> np.ndarray:
        c = self.a + self.h * np.arange(self.m + 1)
        c[-1] = self.b
        return c


@dataclass(frozen=True)
class HatBasis:
    mesh: Mesh

    def masses(self) -> np.ndarray:
        s = np.full(self.mesh.m + 1, self.mesh.h)
        s[0] = s[-1] = 0.5 * self.mesh.h
        return s

    def values(self, x) -> np.ndarray:
        """Matrix of psi_i(x): one row per x, one column per hat."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        t = (x - self.mesh.a) / self.mesh.h
        return np.clip(1.0 - np.abs(t[:, None] - np.arange(self.mesh.m + 1)[None, :]), 0.0, None)


def hat_integral(basis: HatBasis, i: int, a: float, b: float) -> float:
    """Exact integral of psi_i over [a, b]."""
    mesh = basis.mesh
    if not mesh.a <= a <= b <= mesh.b:
        raise ValueError("[a, b] must lie inside the mesh interval")
    h = mesh.h
    total = 0.0
    # psi_i rises on cell i-1 and falls on cell i
    for cell, rising in ((i - 1, True), (i, False)):
        if cell < 0 or cell >= mesh.m:
            continue
        left = mesh.a + cell * h
        p, q = max(a, left), min(b, left + h)
        if q <= p:
            continue
        s, t = (p - left) / h, (q - left) / h
        up = 0.5 * h * (t * t - s * s)
        total += up if rising else h * (t - s) - up
    return total


@dataclass(frozen=True)
class NodalDensity:
    mesh: Mesh
    values: np.ndarray

    def __call__(self, x):
        return density_eval(self, x)

    def eval_offset(self, u):
        """Evaluate at x = a + u; avoids cancellation for points close to a."""
        t = np.asarray(u, dtype=float) / self.mesh.h
        idx = np.clip(np.floor(t).astype(int), 0, self.mesh.m - 1)
        w = t - idx
        return (1.0 - w) * self.values[idx] + w * self.values[idx + 1]

    def integral(self) -> float:
        """Integral against normalised Lebesgue measure on the mesh interval."""
        v = self.values
        return self.mesh.h * (0.5 * v[0] + v[1:-1].sum() + 0.5 * v[-1]) / self.mesh.length

    def normalized(self) -> "NodalDensity":
        return NodalDensity(self.mesh, self.values / self.integral())


def density_eval(density: NodalDensity, x):
    """Linear interpolation of the nodal values."""
    mesh = density.mesh
    arr = np.asarray(x, dtype=float)
    if np.any(arr < mesh.a) or np.any(arr > mesh.b):
        raise ValueError("x outside the mesh interval")
    out = density.eval_offset(arr - mesh.a)
    return float(out) if np.ndim(x) == 0 else out


def apply_Qm(basis: HatBasis, cell_averages) -> NodalDensity:
    f = np.asarray(cell_averages, dtype=float)
    if len(f) != basis.mesh.m:
        raise ValueError("need one average per cell")
    w = np.empty(len(f) + 1)
    w[0] = f[0]
    w[-1] = f[-1]
    w[1:-1] = 0.5 * (f[:-1] + f[1:])
    return NodalDensity(basis.mesh, w)


@dataclass
class StochasticMatrix:
    P: object  # ndarray or scipy CSR, shape (m+1, m+1)
    masses: np.ndarray
    tail_row_mass: np.ndarray
    raw_row_sums: np.ndarray
    mesh: Mesh | None = None
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_array(cls, P, masses=None) -> "StochasticMatrix":
        P = np.asarray(P, dtype=float)
        n = P.shape[0]
        if P.shape != (n, n):
            raise ValueError("matrix must be square")
        sums = P.sum(axis=1)
        return cls(P, np.ones(n) if masses is None else np.asarray(masses, float),
                   np.zeros(n), sums)

    @property
    def size(self) -> int:
        return self.P.shape[0]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.P)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.P.sum(axis=1)).ravel()

    def min_entry(self) -> float:
        return float(self.P.data.min()) if self.is_sparse else float(self.P.min())

    def left_apply(self, v: np.ndarray) -> np.ndarray:
        """v -> v P."""
        if self.is_sparse:
            return self._PT @ v
        return v @ self.P

    def dense(self) -> np.ndarray:
        return self.P.toarray() if self.is_sparse else np.asarray(self.P)

    def __post_init__(self):
        if sp.issparse(self.P):
            self.P = sp.csr_matrix(self.P)
            self._PT = self.P.T.tocsr()


class DoublingMap:
    """x -> 2x mod 1 on [0, 1], presented through its two onto branches."""

    delta = (0.0, 1.0)
    tail_mass = 0.0
    exact_dyadic = True

    def branch_offsets(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        yield 0.5 * nodes
        yield 0.5 * (nodes + 1.0)

    def apply(self, x):
        return np.mod(2.0 * np.asarray(x, dtype=float), 1.0)


def _pieces(p: np.ndarray, h: float, m: int):
    """Split the intervals [p_j, p_{j+1}] at mesh nodes; each is shorter than 2 cells."""
    lo, hi = p[:-1], p[1:]
    if np.any(hi < lo):
        lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    cells = np.arange(len(lo))
    l0 = np.clip(np.floor(lo / h).astype(np.int64), 0, m - 1)
    split = (l0 + 1) * h
    two = (hi > split) & (l0 < m - 1)
    if np.any(hi[two] > split[two] + h * (1 + 1e-9)):
        raise ValueError("branch preimage of a cell spans more than two cells; map is not expanding")
    first_hi = np.where(two, split, hi)
    P = np.concatenate([lo, split[two]])
    Q = np.concatenate([first_hi, hi[two]])
    L = np.concatenate([l0, l0[two] + 1])
    C = np.concatenate([cells, cells[two]])
    return P, Q, L, C


def _piece_triplets(P, Q, L, C, h):
    s = P / h - L
    t = Q / h - L
    upper = 0.5 * h * (t * t - s * s)
    lower = h * (t - s) - upper
    rows = np.concatenate([L, L + 1])
    cols = np.concatenate([C, C])
    vals = np.concatenate([lower, upper])
    keep = vals != 0.0
    return rows[keep], cols[keep], vals[keep]


def mass_matrix_generic(branch_map, mesh: Mesh):
    """Hat-by-cell mass matrix for any branch-presented map (numpy route)."""
    h, m = mesh.h, mesh.m
    L = mesh.length
    R, Cc, V = [], [], []
    for offsets in branch_map.branch_offsets(mesh.nodes):
        u = np.clip(np.asarray(offsets, dtype=float), 0.0, L)
        r, c, v = _piece_triplets(*_pieces(u, h, m), h)
        R.append(r)
        Cc.append(c)
        V.append(v)
    rows, cols, vals = (np.concatenate(x) for x in (R, Cc, V))
    return sp.coo_matrix((vals, (rows, cols)), shape=(m + 1, m)).tocsr()


def mass_matrix_lsv(ind: InducedMap, mesh: Mesh):
    """Same matrix as :func:`mass_matrix_generic`, via the numba kernel."""
    spec = ind.spec
    h, m, B = mesh.h, mesh.m, ind.branch_count
    hi_off = np.concatenate(([spec.delta_length], ind.lo_offset[:-1]))
    widths = hi_off - ind.lo_offset
    narrow = np.flatnonzero(widths < 4 * h)
    n_star = int(narrow[0]) + 1 if narrow.size else B + 1
    if n_star <= B:
        row_limit = min(m + 1, int(hi_off[n_star - 1] / h) + 2)
    else:
        row_limit = 0
    capacity = 4 * (m + 1) * max(n_star - 1, 1) + 64
    near, rows, cols, vals, count = _kernels.lsv_assemble(
        spec.x0, spec.alpha, spec.lsv_coeff, m, B, row_limit, capacity)
    if count < 0:
        raise RuntimeError("assembly buffer overflow")
    far = sp.coo_matrix((vals, (rows, cols)), shape=(m + 1, m)).tocsr()
    if row_limit:
        block = sp.csr_matrix(near)
        block.resize((m + 1, m))
        far = far + block
    return far


class TailToleranceError(RuntimeError):
    pass


def assemble(branch_map, mesh: Mesh | int, tail_tol: float | None = None,
             route: str = "auto") -> StochasticMatrix:
    """Row-stochastic matrix of P_m in hat-mass coordinates.

    Rows are renormalised to absorb the mass of dropped branches; the
    pre-normalisation row sums (as a fraction of each hat's mass) are kept
    in ``raw_row_sums`` and the deficit in ``tail_row_mass``.
    """
    if isinstance(mesh, (int, np.integer)):
        mesh = Mesh(*branch_map.delta, int(mesh))
    if tail_tol is not None and branch_map.tail_mass > tail_tol:
        raise TailToleranceError(
            f"dropped branch mass {branch_map.tail_mass:.3e} exceeds tail_tol {tail_tol:.3e}")
    if abs(mesh.a - branch_map.delta[0]) > 0 or abs(mesh.b - branch_map.delta[1]) > 0:
        raise ValueError("mesh must cover the map's domain exactly")
    fast = isinstance(branch_map, InducedMap) and branch_map.spec.lsv_coeff is not None
    if route == "generic" or (route == "auto" and not fast):
        M = mass_matrix_generic(branch_map, mesh)
    else:
        M = mass_matrix_lsv(branch_map, mesh)
    basis = HatBasis(mesh)
    s = basis.masses()
    rs = np.asarray(M.sum(axis=1)).ravel()
    if np.any(rs <= 0):
        raise TailToleranceError("a hat lies entirely inside the dropped tail; use more branches")
    m = mesh.m
    split = sp.diags([np.full(m, 0.5), np.full(m, 0.5)], [0, 1], shape=(m, m + 1), format="csr")
    P = sp.diags(1.0 / rs) @ M @ split
    P = P.tocsr()
    P.eliminate_zeros()
    if m <= DENSE_LIMIT:
        P = P.toarray()
    meta = {"m": m, "tail_tol": tail_tol, "tail_mass": float(branch_map.tail_mass)}
    if isinstance(branch_map, InducedMap):
        meta.update(B=branch_map.branch_count, alpha=branch_map.spec.alpha, x0=branch_map.spec.x0,
                    map_hash=branch_map.spec.identity())
    return StochasticMatrix(P, s, np.clip(1.0 - rs / s, 0.0, None), rs / s, mesh, meta)


def cache_header(meta: dict) -> dict:
    keys = ("map_hash", "alpha", "x0", "m", "tail_tol", "B")
    return {k: (float(meta[k]).hex() if isinstance(meta.get(k), float) else meta.get(k)) for k in keys}


def save_matrix(path, matrix: StochasticMatrix) -> None:
    """npz layout: header (JSON string), CSR arrays data/indices/indptr, masses, row data."""
    P = sp.csr_matrix(matrix.P)
    np.savez(
        Path(path),
        header=np.array(json.dumps(cache_header(matrix.meta), sort_keys=True)),
        data=P.data, indices=P.indices, indptr=P.indptr, shape=np.array(P.shape),
        masses=matrix.masses, tail_row_mass=matrix.tail_row_mass, raw_row_sums=matrix.raw_row_sums,
        mesh=np.array([matrix.mesh.a, matrix.mesh.b, matrix.mesh.m], dtype=float),
        meta=np.array(json.dumps(matrix.meta, sort_keys=True)),
    )


def load_matrix(path, expected_meta: dict) -> StochasticMatrix | None:
    """Load a cached matrix only if its header matches bit-exactly."""
    path = Path(path)
    if not path.exists():
        return None
    with np.load(path) as z:
        if str(z["header"]) != json.dumps(cache_header(expected_meta), sort_keys=True):
            return None
        P = sp.csr_matrix((z["data"], z["indices"], z["indptr"]), shape=tuple(z["shape"]))
        a, b, m = z["mesh"]
        mesh = Mesh(float(a), float(b), int(m))
        meta = json.loads(str(z["meta"]))
        out = StochasticMatrix(P if mesh.m > DENSE_LIMIT else P.toarray(), z["masses"],
                               z["tail_row_mass"], z["raw_row_sums"], mesh, meta)
    return out
