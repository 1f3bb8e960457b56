"""Pull the induced density back to the whole interval.

For x outside Delta the invariant density is the series

    f(x) = c * sum_n g(z_n) / |DT^n(z_n)|,   z_n = T2^{-1} T1^{-(n-1)} x,

with g = f_hat / |Delta| the Lebesgue density of the induced invariant measure
and c = 1 / sum_k k mu_hat(Z_k) the Kac normaliser. On Delta, f = c * g.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .constants import (ConstantsBundle, NonCanonicalError, compute_constants, eta_k,
                        series_sum_bound, tail_moment_bound)
from .discretization import NodalDensity
from .inducing import InducedMap, locate_k, neutral_orbit
from .mapmodel import inverse_T1
from .solver import measures_of, sup_inf_var


class TruncationError(ValueError):
    """More terms are needed than the induced map provides."""

    def __init__(self, message, needed=None):
        super().__init__(message)
        self.needed = needed


@dataclass(frozen=True)
class PullbackEvaluator:
    induced: InducedMap
    density: NodalDensity  # lambda_hat-normalised f_hat on Delta
    bundle: ConstantsBundle
    c_tau_m: float  # c(N_used)
    N_used: int
    zk_measure: np.ndarray  # mu_hat(Z_k), k = 1..B

    @property
    def g(self) -> NodalDensity:
        """Lebesgue density of the induced invariant measure."""
        return NodalDensity(self.density.mesh, self.density.values / self.induced.spec.delta_length)

    def __call__(self, x):
        return eval_fm(self, x, self.N_used)


def make_evaluator(ind: InducedMap, density: NodalDensity, N: int | None = None,
                   bundle: ConstantsBundle | None = None) -> PullbackEvaluator:
    if bundle is None:
        bundle = compute_constants(ind.spec, Chat=1.0)
    N = ind.branch_count if N is None else int(N)
    if not 1 <= N <= ind.branch_count:
        raise TruncationError(f"N = {N} outside 1..{ind.branch_count}", needed=N)
    spec = ind.spec
    hi_off = np.concatenate(([spec.delta_length], ind.lo_offset[:-1]))
    mu = measures_of(density, ind.lo_offset, hi_off)
    k = np.arange(1, N + 1)
    c = 1.0 / float(np.sum(k * mu[:N]))
    return PullbackEvaluator(ind, density, bundle, c, N, mu)


def c_tau(ev: PullbackEvaluator, N: int) -> tuple[float, float]:
    """1 / sum_{k<=N} k mu_hat(Z_k) and a bound on its distance to the untruncated value."""
    if not 1 <= N <= ev.induced.branch_count:
        raise TruncationError(f"N = {N} outside 1..{ev.induced.branch_count}", needed=N)
    k = np.arange(1, N + 1)
    partial = float(np.sum(k * ev.zk_measure[:N]))
    sup, inf, _ = sup_inf_var(ev.density)
    lam_z1 = float(ev.induced.branch_measure()[0])
    bound = sup / (inf * lam_z1) * tail_moment_bound(ev.bundle, N)
    return 1.0 / partial, bound


def c_tau_tail_iterative(ev: PullbackEvaluator, N: int) -> float:
    """Same bound with the running partial sum in the denominator (never larger)."""
    k = np.arange(1, N + 1)
    partial = float(np.sum(k * ev.zk_measure[:N]))
    sup = float(ev.density.values.max())
    return sup * tail_moment_bound(ev.bundle, N) / partial


def series(ev: PullbackEvaluator, x, N: int) -> np.ndarray:
    """sum_{n<=N} g(z_n)/|DT^n(z_n)| for x outside Delta (no normaliser)."""
    spec = ev.induced.spec
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    gv = ev.g.values
    if spec.lsv_coeff is not None:
        return _kernels.lsv_pullback_sum(xs, gv, spec.x0, spec.alpha, spec.lsv_coeff, int(N))
    g = ev.g
    y = xs.copy()
    deriv = np.ones_like(y)
    total = np.zeros_like(y)
    for n in range(1, N + 1):
        if n > 1:
            y = inverse_T1(spec, y)
            deriv = deriv * spec.dT1(y)
        z = spec.T2_inv(y)
        total += g(np.clip(z, spec.x0, 1.0)) / (deriv * np.abs(spec.dT2(z)))
    return total


def terms(ev: PullbackEvaluator, x: float, N: int) -> np.ndarray:
    """Individual terms g(z_n)/|DT^n(z_n)|, n = 1..N, at a single x."""
    spec = ev.induced.spec
    y = float(x)
    deriv = 1.0
    out = np.empty(N)
    for n in range(1, N + 1):
        if n > 1:
            y = float(inverse_T1(spec, y))
            deriv *= float(spec.dT1(y))
        z = float(spec.T2_inv(y))
        out[n - 1] = float(ev.g(min(max(z, spec.x0), 1.0))) / (deriv * abs(float(spec.dT2(z))))
    return out


def eval_fm(ev: PullbackEvaluator, x, N: int):
    """c(N) * series for x < x0 and c(N) * g(x) on Delta."""
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(arr <= 0.0) or np.any(arr > 1.0):
        raise ValueError("x must lie in (0, 1]")
    c, _ = c_tau(ev, N)
    x0 = ev.induced.spec.x0
    out = np.empty_like(arr)
    inside = arr >= x0
    if np.any(inside):
        out[inside] = c * ev.g(arr[inside])
    if np.any(~inside):
        out[~inside] = c * series(ev, arr[~inside], N)
    return float(out[0]) if np.ndim(x) == 0 else out


def locate(ev: PullbackEvaluator, x: float) -> int:
    """k with x in W_k (0 on Delta); extends the neutral orbit if x lies below it."""
    orbit = ev.induced.orbit
    length = orbit.length
    while x < orbit.xs[-1]:
        length *= 2
        orbit = neutral_orbit(ev.induced.spec, length)
    return int(locate_k(orbit, x))


@dataclass(frozen=True)
class TruncationChoice:
    k: int
    N1: int
    N2: int
    N2_iterative: int
    N: int
    eta: float


def _smallest(pred, start: int = 1, limit: int = 1 << 62) -> int:
    """Smallest integer n >= start with pred(n), for predicates monotone in n."""
    if pred(start):
        return start
    hi = start * 2
    while not pred(hi):
        hi *= 2
        if hi > limit:
            raise TruncationError("no admissible truncation below the search limit")
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def truncation_N(ev: PullbackEvaluator, x_star: float, R: float, bundle: ConstantsBundle | None = None,
                 k: int | None = None) -> TruncationChoice:
    """N1, N2 and N = max(N1, N2) keeping |f_m,N(x*) - f_m(x*)| <= R/3.

    N1 bounds the series tail by R/6 and N2 the normaliser truncation by R/6.
    Both are computed with the supremum of g, the density actually summed.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    bundle = ev.bundle if bundle is None else bundle
    if not bundle.canonical:
        raise NonCanonicalError("truncation estimates assume T1(x) = x + 2^a x^(1+a)")
    if k is None:
        k = locate(ev, x_star)
    if k == 0:
        # on Delta the series is one term; only the normaliser needs truncating
        eta = float("nan")
        N1 = 1
        F = float(ev.g.values.max())
    else:
        eta = eta_k(bundle, k)
        F = float(ev.g.values.max()) * series_sum_bound(bundle, k)
        sup_g = float(ev.g.values.max())
        log_rhs = math.log(R / 6.0) + math.log(eta - 1.0) - math.log(sup_g) - eta * math.log(k + 2.0)
        # (N1 + k)^(1 - eta) <= rhs
        guess = max(1, math.ceil(math.exp(log_rhs / (1.0 - eta)) - k)) if log_rhs < 0 else 1

        def ok1(n):
            return math.log(sup_g) + (1.0 - eta) * math.log(n + k) - math.log(eta - 1.0) \
                + eta * math.log(k + 2.0) <= math.log(R / 6.0)

        N1 = guess
        while N1 > 1 and ok1(N1 - 1):
            N1 -= 1
        while not ok1(N1):
            N1 += 1
    sup, inf, _ = sup_inf_var(ev.density)
    lam_z1 = float(ev.induced.branch_measure()[0])
    ratio = sup / (inf * lam_z1)
    N2 = _smallest(lambda n: ratio * tail_moment_bound(bundle, n) * F <= R / 6.0)
    B = ev.induced.branch_count
    cum = np.cumsum(np.arange(1, B + 1) * ev.zk_measure)

    def ok2(n):
        partial = cum[min(n, B) - 1]
        return sup * tail_moment_bound(bundle, n) / partial * F <= R / 6.0

    N2i = _smallest(ok2)
    N2i = min(N2i, N2)
    N = max(N1, N2)
    return TruncationChoice(k, N1, N2, N2i, N, eta)


def weighted_norm_distance(f, g, alpha: float, grid: int = 1000, lo: float = 1e-6) -> float:
    """Grid estimate (a lower bound) of sup_{x in (0,1]} |x^(1+alpha) (f(x) - g(x))|."""
    xs = np.geomspace(lo, 1.0, grid)
    return float(np.max(np.abs(xs ** (1.0 + alpha) * (np.asarray(f(xs)) - np.asarray(g(xs))))))


@dataclass(frozen=True)
class KacResult:
    value: float
    error_bar: float
    cutoff: float


def kac_integral(ev: PullbackEvaluator, N: int | None = None, cutoff: float = 1e-16,
                 ratio: float = 0.7, order: int = 12, delta_cells: int = 4) -> KacResult:
    """Integral of f_m over (0, 1] by Gauss-Legendre on panels.

    Panels shrink geometrically toward 0; on (0, cutoff) the integral is
    bounded analytically with the canonical-family series bound and added
    to the error bar.
    """
    N = ev.N_used if N is None else N
    spec = ev.induced.spec
    x0 = spec.x0
    c, _ = c_tau(ev, N)
    # Delta part: exact, f = c g is piecewise linear
    delta_part = c * float(ev.g.integral()) * spec.delta_length
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = [x0]
    while edges[-1] > cutoff:
        edges.append(edges[-1] * ratio)
    edges = np.array(edges[::-1])
    edges[0] = cutoff
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    xs = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    vals = c * series(ev, xs, N)
    left = float(np.sum((vals.reshape(len(a), order) * weights[None, :]).sum(axis=1) * half))
    err = _small_x_mass(ev, cutoff, c)
    return KacResult(delta_part + left, err, cutoff)


def _small_x_mass(ev: PullbackEvaluator, cutoff: float, c: float) -> float:
    bundle = ev.bundle
    if not bundle.canonical:
        return float("nan")
    a = bundle.alpha
    # x_n^(-a) <= x0^(-a) + n a 2^a, so the cutoff's cylinder index is at least k below;
    # the bound decreases in k, and walking the orbit down to 1e-16 is too slow
    x0 = ev.induced.spec.x0
    k = max(1, math.floor((cutoff ** -a - x0 ** -a) / (a * 2.0 ** a)))
    # f_m <= c sup g (1/beta) 3^d k / (eta_1 - 1) on W_k and lambda(W_k) <= C2 k^{-(1+1/a)}
    eta1 = eta_k(bundle, 1)
    const = c * float(ev.g.values.max()) * 3.0 ** bundle.d / (bundle.beta * (eta1 - 1.0)) * bundle.C2
    p = 1.0 / a
    return const * (k ** (1.0 - p) / (p - 1.0) + k ** (-p))
