"""Independent cross-checks of the pulled-back density.

* ``birkhoff_histogram``: occupation histogram of a long seeded orbit.
* ``pure_ulam_full_map``: classical piecewise-constant Ulam matrix of the
  full (non-induced) map on a uniform mesh of [0, 1].

Random numbers come from numpy's PCG64 via ``default_rng(seed)``; the seed is
stored in the result.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels
from .mapmodel import MapSpec, inverse_T1


class DyadicMapError(ValueError):
    """Binary floating point collapses orbits of exact-dyadic maps onto 0."""


@dataclass(frozen=True)
class Histogram:
    bins: int
    counts: np.ndarray
    n_iters: int
    burn_in: int
    seed: int
    restarts: int

    @property
    def width(self) -> float:
        return 1.0 / self.bins

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.bins + 1)

    @property
    def centers(self) -> np.ndarray:
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])

    @property
    def density(self) -> np.ndarray:
        return self.counts / (self.n_iters * self.width)

    @property
    def sigma(self) -> np.ndarray:
        """Multinomial standard deviation of each bin's density (ignores serial correlation)."""
        p = self.counts / self.n_iters
        return np.sqrt(p * (1.0 - p) / self.n_iters) / self.width

    def at(self, x: float) -> tuple[float, float]:
        """Linear interpolation between bin centres, with the matching sigma."""
        c = self.centers
        x = float(x)
        if x <= c[0]:
            return float(self.density[0]), float(self.sigma[0])
        if x >= c[-1]:
            return float(self.density[-1]), float(self.sigma[-1])
        j = int(np.searchsorted(c, x)) - 1
        w = (x - c[j]) / (c[j + 1] - c[j])
        d = (1 - w) * self.density[j] + w * self.density[j + 1]
        s = np.hypot((1 - w) * self.sigma[j], w * self.sigma[j + 1])
        return float(d), float(s)

    def bin_of(self, x: float) -> int:
        return min(int(x * self.bins), self.bins - 1)

    def to_csv(self) -> str:
        e = self.edges
        lines = ["bin_left,bin_right,density,sigma"]
        lines += [f"{e[i]!r},{e[i + 1]!r},{self.density[i]!r},{self.sigma[i]!r}" for i in range(self.bins)]
        return "\n".join(lines) + "\n"


def birkhoff_histogram(spec, n_iters: int = 10 ** 8, bins: int = 256, seed: int = 20240601,
                       burn_in: int = 10 ** 4, jitter: float = 0.0) -> Histogram:
    """Histogram of a single long orbit started from a seeded uniform point."""
    if getattr(spec, "exact_dyadic", False) and jitter <= 0.0:
        raise DyadicMapError("exact-dyadic map: orbits collapse to 0 in binary floating point; pass jitter > 0")
    rng = np.random.default_rng(seed)
    counts = np.zeros(bins, dtype=np.int64)
    restarts = 0
    if isinstance(spec, MapSpec) and spec.lsv_coeff is not None and jitter == 0.0:
        a = spec.lsv_coeff
        empty = np.zeros(0, dtype=np.int64)
        x, done = _kernels.lsv_birkhoff(rng.uniform(), burn_in, spec.alpha, a, spec.x0, bins, empty)
        while done < burn_in:
            restarts += 1
            x, done = _kernels.lsv_birkhoff(rng.uniform(), burn_in, spec.alpha, a, spec.x0, bins, empty)
        remaining = n_iters
        while remaining > 0:
            x, done = _kernels.lsv_birkhoff(x, remaining, spec.alpha, a, spec.x0, bins, counts)
            remaining -= done
            if remaining > 0:
                # the orbit hit 0 or 1 exactly; restart from a fresh point
                restarts += 1
                x = rng.uniform()
                counts[min(int(x * bins), bins - 1)] += 1
                remaining -= 1
    else:
        x = rng.uniform()
        for step in range(burn_in + n_iters):
            x = float(spec.apply(x) if hasattr(spec, "apply") else spec.T(x))
            if jitter:
                x = (x + jitter * rng.standard_normal()) % 1.0
            if not 0.0 < x < 1.0:
                restarts += 1
                x = rng.uniform()
            if step >= burn_in:
                counts[min(int(x * bins), bins - 1)] += 1
    return Histogram(bins, counts, int(counts.sum()), burn_in, seed, restarts)


@dataclass(frozen=True)
class UlamResult:
    m: int
    matrix: sp.csr_matrix
    density: np.ndarray  # piecewise-constant values on the m cells
    residual: float
    method: str

    def at(self, x: float) -> float:
        return float(self.density[min(int(x * self.m), self.m - 1)])


def _preimage_points(spec, nodes):
    """Preimages of the mesh nodes under each branch, as increasing arrays."""
    if isinstance(spec, MapSpec):
        return [np.asarray(inverse_T1(spec, nodes)), np.asarray(spec.T2_inv(nodes))]
    return [np.asarray(p) for p in spec.branch_offsets(nodes)]


def ulam_matrix(spec, m: int) -> sp.csr_matrix:
    """U[i, j] = lambda(I_i and T^{-1} I_j) / lambda(I_i) on a uniform mesh of [0, 1]."""
    if m < 2:
        raise ValueError("m must be at least 2")
    nodes = np.linspace(0.0, 1.0, m + 1)
    rows, cols, vals = [], [], []
    for pre in _preimage_points(spec, nodes):
        lo, hi = pre[0], pre[-1]
        inner = nodes[(nodes > lo) & (nodes < hi)]
        pts = np.union1d(pre, inner)
        mid = 0.5 * (pts[:-1] + pts[1:])
        length = np.diff(pts)
        keep = length > 0
        mid, length = mid[keep], length[keep]
        src = np.minimum((mid * m).astype(np.int64), m - 1)
        dst = np.clip(np.searchsorted(pre, mid, side="right") - 1, 0, m - 1)
        rows.append(src)
        cols.append(dst)
        vals.append(length * m)
    U = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m)).tocsr()
    # the pieces of each cell sum to h up to rounding; make rows stochastic exactly
    return (sp.diags(1.0 / np.asarray(U.sum(axis=1)).ravel()) @ U).tocsr()


def pure_ulam_full_map(spec, m: int, tol: float = 1e-12, max_iter: int = 20000) -> UlamResult:
    """Piecewise-constant invariant density of the full map by the classical Ulam method.

    Power iteration is tried first; the full map mixes slowly near the
    neutral point, so if it has not converged after ``max_iter`` steps the
    fixed vector is found by a sparse direct solve instead.
    """
    U = ulam_matrix(spec, m)
    UT = U.T.tocsr()
    p = np.full(m, 1.0 / m)
    method = "power"
    res = np.inf
    for _ in range(max_iter):
        q = UT @ p
        q /= q.sum()
        res = float(np.max(np.abs(q - p))) * m
        p = q
        if res < tol:
            break
    if res >= tol:
        method = "direct"
        A = (UT - sp.identity(m, format="csr")).tolil()
        A[0, :] = np.ones(m)
        rhs = np.zeros(m)
        rhs[0] = 1.0
        p = spla.spsolve(A.tocsc(), rhs)
        p = np.clip(p, 0.0, None)
        p /= p.sum()
        res = float(np.max(np.abs(UT @ p - p))) * m
    return UlamResult(m, U, p * m, res, method)
