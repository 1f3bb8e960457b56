"""First-return map of T on Delta = [x0, 1].

The neutral orbit x_{n+1} = T1^{-1}(x_n) cuts [0, x0) into W_n = (x_n, x_{n-1});
Z_n = T2^{-1}(W_{n-1}) is the set of points in Delta returning after exactly
n steps. Branch domains are stored as half-open intervals [a_n, b_n), with
Z_1 = [a_1, 1] closed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .mapmodel import MapSpec, inverse_T1

DEFAULT_TAIL_TOL = 1e-8
DEFAULT_BRANCH_CAP = 100_000


class BranchCapError(RuntimeError):
    """The requested tail tolerance needs more branches than the cap allows."""

    def __init__(self, message, needed=None):
        super().__init__(message)
        self.needed = needed


@dataclass(frozen=True)
class NeutralOrbit:
    xs: np.ndarray  # x_0 = x0 > x_1 > ...

    @property
    def length(self) -> int:
        return len(self.xs) - 1


@dataclass(frozen=True)
class InducedBranch:
    n: int
    a: float
    b: float

    @property
    def return_time(self) -> int:
        return self.n


@dataclass(frozen=True)
class InducedMap:
    spec: MapSpec
    orbit: NeutralOrbit
    lo: np.ndarray  # a_n for n = 1..B (index n-1)
    hi: np.ndarray  # b_n
    lo_offset: np.ndarray  # a_n - x0, kept separately for precision near x0
    tail_mass: float

    @property
    def branch_count(self) -> int:
        return len(self.lo)

    @property
    def delta(self) -> tuple[float, float]:
        return (self.spec.x0, 1.0)

    @property
    def branches(self) -> list[InducedBranch]:
        return [InducedBranch(n + 1, float(a), float(b)) for n, (a, b) in enumerate(zip(self.lo, self.hi))]

    def branch(self, n: int) -> InducedBranch:
        if not 1 <= n <= self.branch_count:
            raise IndexError(f"branch {n} outside 1..{self.branch_count}")
        return InducedBranch(n, float(self.lo[n - 1]), float(self.hi[n - 1]))

    def branch_measure(self) -> np.ndarray:
        """Normalised Lebesgue measure of Z_1 .. Z_B."""
        hi_off = np.concatenate(([self.spec.delta_length], self.lo_offset[:-1]))
        return (hi_off - self.lo_offset) / self.spec.delta_length

    def branch_offsets(self, nodes: np.ndarray):
        """Yield, for n = 1..B, the offsets from x0 of the branch-n preimages of ``nodes``."""
        spec = self.spec
        y = np.asarray(nodes, dtype=float).copy()
        for n in range(1, self.branch_count + 1):
            if n > 1:
                y = inverse_T1(spec, y)
            yield _offset(spec, y)


def _offset(spec: MapSpec, y):
    if spec.lsv_coeff is not None:
        return spec.delta_length * y
    return spec.T2_inv(y) - spec.x0


def neutral_orbit(spec: MapSpec, length: int) -> NeutralOrbit:
    if spec.lsv_coeff is not None:
        xs = _kernels.lsv_neutral_orbit(spec.x0, spec.alpha, spec.lsv_coeff, int(length))
    else:
        xs = np.empty(length + 1)
        xs[0] = spec.x0
        for n in range(length):
            xs[n + 1] = inverse_T1(spec, xs[n])
    return NeutralOrbit(xs)


def tail_mass_after(spec: MapSpec, orbit: NeutralOrbit, B: int) -> float:
    """Normalised measure of the union of Z_n, n > B: T2^{-1}((0, x_{B-1}))."""
    return float(_offset(spec, orbit.xs[B - 1])) / spec.delta_length


def branches_for_tolerance(spec: MapSpec, tail_tol: float, cap: int = DEFAULT_BRANCH_CAP) -> int:
    """Smallest B whose dropped branches carry at most ``tail_tol`` of Delta."""
    orbit = neutral_orbit(spec, cap)
    tails = np.asarray(_offset(spec, orbit.xs[:-1])) / spec.delta_length  # tail after B = index+1
    ok = np.flatnonzero(tails <= tail_tol)
    if ok.size == 0:
        # extrapolate with x_n ~ n^{-1/alpha} to tell the caller what B is needed
        ratio = tails[-1] / tail_tol
        needed = int(np.ceil(cap * ratio ** spec.alpha))
        raise BranchCapError(
            f"tail tolerance {tail_tol:g} needs about {needed} branches, cap is {cap}", needed=needed
        )
    return int(ok[0]) + 1


def build_induced(spec: MapSpec, branch_count: int | None = None, tail_tol: float = DEFAULT_TAIL_TOL,
                  cap: int = DEFAULT_BRANCH_CAP) -> InducedMap:
    """Induced map with branches Z_1..Z_B.

    If ``branch_count`` is omitted, B is the smallest count whose tail
    (the measure of all dropped branches) is below ``tail_tol``.
    """
    if branch_count is None:
        branch_count = branches_for_tolerance(spec, tail_tol, cap)
    B = int(branch_count)
    if B < 1:
        raise ValueError("branch_count must be positive")
    orbit = neutral_orbit(spec, B)
    xs = orbit.xs
    lo_off = np.asarray(_offset(spec, xs[:B]), dtype=float)
    lo = spec.x0 + lo_off
    hi = np.concatenate(([1.0], lo[:-1]))
    return InducedMap(spec, orbit, lo, hi, lo_off, tail_mass_after(spec, orbit, B))


def branch_inverse(ind: InducedMap, n: int, y):
    """T2^{-1} T1^{-(n-1)} y: the point of Z_n that T_hat sends to y."""
    if not 1 <= n <= ind.branch_count:
        raise IndexError(f"branch {n} outside 1..{ind.branch_count}")
    arr = np.asarray(y, dtype=float)
    x0 = ind.spec.x0
    if np.any(arr < x0 - 1e-15) or np.any(arr > 1.0):
        raise ValueError("y must lie in Delta")
    for _ in range(n - 1):
        arr = inverse_T1(ind.spec, arr)
    out = ind.spec.T2_inv(arr)
    return float(out) if np.ndim(y) == 0 else out


def inverse_orbit_table(ind: InducedMap, nodes, depth: int) -> np.ndarray:
    """Table whose row n-1 is T1^{-(n-1)}(nodes); row 0 is the nodes."""
    nodes = np.asarray(nodes, dtype=float)
    spec = ind.spec
    if spec.lsv_coeff is not None:
        return _kernels.lsv_inverse_table(nodes, spec.alpha, spec.lsv_coeff, int(depth))
    tab = np.empty((depth, len(nodes)))
    tab[0] = nodes
    for n in range(1, depth):
        tab[n] = inverse_T1(spec, tab[n - 1])
    return tab


def locate_branch(ind: InducedMap, z) -> np.ndarray:
    """Return time n with z in Z_n (0 if z falls in the dropped tail)."""
    z = np.asarray(z, dtype=float)
    # lo is decreasing; search on the reversed (increasing) array
    rev = ind.lo[::-1]
    pos = np.searchsorted(rev, z, side="right")
    n = ind.branch_count - pos + 1
    return np.where(pos == 0, 0, n)


def locate_k(orbit: NeutralOrbit, x) -> np.ndarray:
    """k with x in W_k = [x_k, x_{k-1}); 0 for x >= x0 (inside Delta)."""
    x = np.asarray(x, dtype=float)
    rev = orbit.xs[::-1]
    pos = np.searchsorted(rev, x, side="right")
    k = orbit.length - pos + 1
    if np.any(pos == 0):
        raise ValueError("x lies below the computed neutral orbit; extend the orbit")
    return np.where(x >= orbit.xs[0], 0, k)


def return_time(spec: MapSpec, z: float, max_steps: int = 10_000) -> int:
    """First n >= 1 with T^n(z) back in [x0, 1], by forward iteration."""
    x = float(z)
    for n in range(1, max_steps + 1):
        x = float(spec.T(x))
        if x >= spec.x0:
            return n
    raise RuntimeError("no return within max_steps")


def induced_value(ind: InducedMap, z: float) -> float:
    """T_hat(z) computed as T^n(z) with n the return time of the branch holding z."""
    n = int(locate_branch(ind, z))
    if n == 0:
        raise ValueError("z lies in the dropped tail")
    x = float(z)
    for _ in range(n):
        x = float(ind.spec.T(x))
    return x


def tail_mass_bound(c2: float, spec: MapSpec, B: int) -> float:
    """(C2 / (beta |Delta|)) * sum_{n>B} n^{-(1+1/alpha)} via integral comparison."""
    s = 1.0 + 1.0 / spec.alpha
    return c2 / (spec.beta * spec.delta_length) * (B ** (1.0 - s) / (s - 1.0))
