"""Stationary density of the discretised operator and simple measurements on it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .discretization import Mesh, NodalDensity, StochasticMatrix

DEFAULT_MAX_ITER = 1_000_000


class NonPositiveDensityError(RuntimeError):
    """Stationary vector has a zero or negative entry; the matrix is not irreducible."""


@dataclass(frozen=True)
class StationaryResult:
    vector: np.ndarray  # probability vector (sum 1) in the matrix's own coordinates
    density: NodalDensity | None  # lambda_hat-normalised nodal density, when a mesh is attached
    residual: float
    iterations: int
    converged: bool
    lambda2: float  # heuristic |lambda_2| from successive residual ratios (nan if unknown)
    history: np.ndarray

    @property
    def error_estimate(self) -> float:
        """residual / (1 - |lambda_2|): heuristic bound on the distance to the true fixed vector."""
        lam = self.lambda2 if np.isfinite(self.lambda2) else 0.0
        return self.residual / max(1.0 - lam, 1e-300)


def _nodal(matrix: StochasticMatrix, v: np.ndarray) -> np.ndarray:
    if matrix.mesh is None:
        return v / matrix.masses * (matrix.masses.sum() / len(v))
    return matrix.mesh.length * v / matrix.masses


def stationary(matrix: StochasticMatrix, eps: float = 1e-13, max_iter: int = DEFAULT_MAX_ITER,
               start: np.ndarray | None = None) -> StationaryResult:
    """Left Perron vector of a row-stochastic matrix by power iteration.

    Starts from the uniform density (hat masses proportional to s_i) and stops
    once the sup-norm change of the nodal density over one step is below eps.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    v = matrix.masses / matrix.masses.sum() if start is None else np.asarray(start, float) / np.sum(start)
    w = _nodal(matrix, v)
    history = []
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        vn = matrix.left_apply(v)
        vn = vn / vn.sum()
        wn = _nodal(matrix, vn)
        res = float(np.max(np.abs(wn - w)))
        history.append(res)
        v, w = vn, wn
        if res < eps:
            converged = True
            break
    if np.any(v <= 0):
        raise NonPositiveDensityError(f"stationary vector has min entry {v.min():.3e}")
    hist = np.asarray(history)
    density = NodalDensity(matrix.mesh, w) if matrix.mesh is not None else None
    return StationaryResult(v, density, hist[-1], it, converged, _lambda2(hist), hist)


def _lambda2(hist: np.ndarray) -> float:
    # geometric mean of the last few residual ratios, ignoring the round-off floor
    good = hist[hist > 1e-13]
    if len(good) < 3:
        return float("nan")
    tail = good[-min(6, len(good)):]
    ratios = tail[1:] / tail[:-1]
    return float(min(np.exp(np.mean(np.log(ratios))), 1.0))


def cumulative(density: NodalDensity, u) -> np.ndarray:
    """Integral of the density from the left end to a + u, against Lebesgue measure."""
    mesh = density.mesh
    h = mesh.h
    vals = density.values
    cells = np.concatenate(([0.0], np.cumsum(0.5 * h * (vals[:-1] + vals[1:]))))
    u = np.clip(np.asarray(u, dtype=float), 0.0, mesh.length)
    t = u / h
    l = np.clip(np.floor(t).astype(int), 0, mesh.m - 1)
    s = t - l
    partial = h * (vals[l] * s + 0.5 * (vals[l + 1] - vals[l]) * s * s)
    return cells[l] + partial


def measure_of(density: NodalDensity, interval) -> float:
    """(1/|Delta|) * integral of the density over (a, b)."""
    a, b = interval
    mesh = density.mesh
    if not mesh.a <= a <= b <= mesh.b:
        raise ValueError("interval must lie inside the mesh interval")
    F = cumulative(density, [a - mesh.a, b - mesh.a])
    return float((F[1] - F[0]) / mesh.length)


def measures_of(density: NodalDensity, lo_offset, hi_offset) -> np.ndarray:
    """Vectorised :func:`measure_of` with endpoints given as offsets from the left end."""
    mesh = density.mesh
    return (cumulative(density, hi_offset) - cumulative(density, lo_offset)) / mesh.length


def sup_inf_var(density: NodalDensity) -> tuple[float, float, float]:
    v = density.values
    return float(v.max()), float(v.min()), float(np.abs(np.diff(v)).sum())


def uniform_density(mesh: Mesh) -> NodalDensity:
    return NodalDensity(mesh, np.ones(mesh.m + 1))
