"""Two-branch interval maps with a neutral fixed point at 0.

A map is described by a frozen :class:`MapSpec` holding vectorised function
handles for both branches. The left branch has the form
``T1(x) = x + x**(1+alpha) + x**(1+alpha)*delta0(x)``; the right branch maps
``[x0, 1]`` onto ``[0, 1]`` increasingly.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels

Func = Callable[[np.ndarray], np.ndarray]


class MapSpecError(ValueError):
    """Raised when a map description violates the family assumptions."""


class RootSolveError(RuntimeError):
    """Safeguarded root solve did not converge; the spec is malformed."""


@dataclass(frozen=True)
class MapSpec:
    alpha: float
    x0: float
    beta: float
    T1: Func
    dT1: Func
    d2T1: Func
    T2: Func
    dT2: Func
    d2T2: Func
    T2_inv: Func
    delta0: Func
    delta1: Func
    D: float
    name: str = "custom"
    params: tuple = ()
    # T1(x) = x + lsv_coeff * x**(1+alpha) with T2 affine: enables the numba path
    lsv_coeff: float | None = field(default=None)

    @property
    def delta_length(self) -> float:
        return 1.0 - self.x0

    @property
    def is_canonical(self) -> bool:
        return self.lsv_coeff is not None and self.lsv_coeff == 2.0 ** self.alpha and self.x0 == 0.5

    def T(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.x0, self.T1(x), self.T2(x))

    def dT(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.x0, self.dT1(x), self.dT2(x))

    def identity(self) -> str:
        """Stable hash of the map parameters, used for cache headers."""
        text = repr((self.name, float(self.alpha).hex(), float(self.x0).hex(), self.params))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _const(value):
    return lambda x: np.full_like(np.asarray(x, dtype=float), value)


def lsv_family(alpha: float, coeff: float) -> MapSpec:
    """T1(x) = x + coeff*x**(1+alpha) on [0, x0), affine onto right branch."""
    if not 0.0 < alpha < 1.0:
        raise MapSpecError(f"alpha must lie in (0, 1), got {alpha}")
    if coeff <= 0.0:
        raise MapSpecError("coeff must be positive")
    a = float(coeff)
    # 2**alpha makes x0 = 1/2 exactly; otherwise solve T1(x0) = 1
    x0 = 0.5 if a == 2.0 ** alpha else float(_kernels.lsv_inv(1.0, alpha, a))
    L = 1.0 - x0

    def T1(x):
        x = np.asarray(x, dtype=float)
        return x + a * x ** (1.0 + alpha)

    def dT1(x):
        x = np.asarray(x, dtype=float)
        return 1.0 + (1.0 + alpha) * a * x ** alpha

    def d2T1(x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return (1.0 + alpha) * alpha * a * x ** (alpha - 1.0)

    def T2(x):
        return (np.asarray(x, dtype=float) - x0) / L

    spec = MapSpec(
        alpha=float(alpha),
        x0=x0,
        beta=1.0 / L,
        T1=T1,
        dT1=dT1,
        d2T1=d2T1,
        T2=T2,
        dT2=_const(1.0 / L),
        d2T2=_const(0.0),
        T2_inv=lambda y: x0 + L * np.asarray(y, dtype=float),
        delta0=_const(a - 1.0),
        delta1=_const((1.0 + alpha) * (a - 1.0)),
        D=0.0,
        name="lsv",
        params=(float(alpha).hex(), a.hex()),
        lsv_coeff=a,
    )
    return _with_distortion(spec)


def canonical_lsv(alpha: float) -> MapSpec:
    """The LSV map T1(x) = x + 2**alpha * x**(1+alpha), T2(x) = 2x - 1."""
    if not 0.0 < alpha < 1.0:
        raise MapSpecError(f"alpha must lie in (0, 1), got {alpha}")
    return lsv_family(alpha, 2.0 ** alpha)


def _with_distortion(spec: MapSpec) -> MapSpec:
    from dataclasses import replace

    return replace(spec, D=distortion_bound(spec))


def inverse_T1(spec: MapSpec, y, tol: float = 1e-14):
    """Preimage of ``y`` in [0, x0) under the left branch.

    Works on scalars and arrays. Uses Newton steps inside a bisection
    bracket [0, y], which always contains the root because T1(x) >= x.
    """
    arr = np.asarray(y, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise MapSpecError("inverse_T1 needs y in [0, 1]")
    if spec.lsv_coeff is not None:
        out = _kernels.lsv_inv_array(np.atleast_1d(arr).ravel(), spec.alpha, spec.lsv_coeff)
        out = out.reshape(arr.shape)
    else:
        out = _newton_bisect(spec.T1, spec.dT1, np.atleast_1d(arr).ravel(), spec.x0)
        out = out.reshape(arr.shape)
    if np.any(~np.isfinite(out)):
        raise RootSolveError("left-branch inverse did not converge")
    resid = np.abs(spec.T1(out) - arr)
    if np.any(resid > max(tol, 0.0) + 4e-16 * np.abs(arr)):
        raise RootSolveError(f"left-branch inverse residual {resid.max():.3e} exceeds tol")
    return float(out) if np.ndim(y) == 0 else out


def _newton_bisect(f, df, ys, x_max, maxiter=200):
    """Vectorised safeguarded Newton for T1(x) = y with root in [0, min(y, x_max)]."""
    lo = np.zeros_like(ys)
    hi = np.minimum(ys, x_max)
    x = hi.copy()
    done = ys <= 0.0
    x[done] = 0.0
    for _ in range(maxiter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            return x
        xa = x[act]
        fx = f(xa) - ys[act]
        pos = fx > 0
        hi[act] = np.where(pos, xa, hi[act])
        lo[act] = np.where(pos, lo[act], xa)
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = xa - fx / df(xa)
        bad = ~((xn > lo[act]) & (xn < hi[act]))
        xn[bad] = 0.5 * (lo[act][bad] + hi[act][bad])
        conv = (np.abs(xn - xa) <= 4.4e-16 * np.abs(xn)) | (hi[act] - lo[act] <= 4.4e-16 * hi[act])
        x[act] = np.where(fx == 0, xa, xn)
        done[act[conv | (fx == 0)]] = True
    raise RootSolveError("safeguarded Newton hit the iteration cap")


def inverse_T2(spec: MapSpec, y):
    return spec.T2_inv(y)


def orbit_derivative(spec: MapSpec, z: float, n: int) -> float:
    """|DT^n(z)| by forward iteration of the chain rule.

    ``z`` must lie in the right branch and its orbit must stay in [0, 1]
    for n steps. Forward iteration amplifies round-off, so for deep n the
    backward form :func:`backward_orbit_derivative` is preferred.
    """
    if n < 1:
        raise ValueError("n must be positive")
    if not spec.x0 <= z <= 1.0:
        raise MapSpecError("z must lie in the right branch [x0, 1]")
    x = float(z)
    total = 1.0
    for _ in range(n):
        if not -1e-12 <= x <= 1.0 + 1e-12:
            raise MapSpecError(f"orbit of {z} escaped [0, 1]")
        x = min(max(x, 0.0), 1.0)
        total *= abs(float(spec.dT(x)))
        x = float(spec.T(x))
    return total


def backward_orbit_derivative(spec: MapSpec, x, n: int):
    """|DT^n| at T2^{-1} T1^{-(n-1)} x, built from the backward orbit of x."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if spec.lsv_coeff is not None:
        out = _kernels.lsv_orbit_derivative_backward(xs, spec.x0, spec.alpha, spec.lsv_coeff, int(n))
    else:
        y = xs.copy()
        deriv = np.ones_like(y)
        for _ in range(1, n):
            y = inverse_T1(spec, y)
            deriv = deriv * spec.dT1(y)
        out = deriv * np.abs(spec.dT2(spec.T2_inv(y)))
    return float(out[0]) if np.ndim(x) == 0 else out


def distortion_bound(spec: MapSpec, depth: int = 20000) -> float:
    """Estimate sup |T_hat''| / T_hat'^2 over all induced branches.

    The ratio for T1^j is maximal at the left end x_j of its domain and
    increases with j; it is accumulated along the neutral orbit and the
    remaining increase is extrapolated from the last doubling of depth.
    A 1% margin is added. The second-branch term is added separately.
    """
    if spec.lsv_coeff is not None:
        xs = _kernels.lsv_neutral_orbit(spec.x0, spec.alpha, spec.lsv_coeff, depth)
    else:
        xs = [spec.x0]
        for _ in range(depth):
            xs.append(inverse_T1(spec, xs[-1]))
        xs = np.asarray(xs)
    inner = xs[1:]
    d1 = spec.dT1(inner)
    d2 = spec.d2T1(inner)
    # R_j = R_{j-1} + T1''(x_j) / (T1'(x_j)^2 * prod_{l<j} T1'(x_l))
    log_prod = np.concatenate(([0.0], np.cumsum(np.log(d1))[:-1]))
    incr = d2 / d1 ** 2 * np.exp(-log_prod)
    R = np.cumsum(incr)
    tail = R[-1] - R[len(R) // 2 - 1]
    grid = np.linspace(spec.x0, 1.0, 257)
    t2 = float(np.max(np.abs(spec.d2T2(grid)) / spec.dT2(grid) ** 2))
    return float(1.01 * (R[-1] + tail) + t2)


def check_spec(spec: MapSpec, samples: int = 1000) -> list[str]:
    """Sample the family assumptions; returns a list of violations."""
    problems = []
    a, x0 = spec.alpha, spec.x0
    if not 0.0 < a < 1.0:
        problems.append("alpha outside (0, 1)")
    if not 0.0 < x0 < 1.0:
        problems.append("x0 outside (0, 1)")
    if abs(float(spec.T1(0.0))) > 1e-14:
        problems.append("T1(0) != 0")
    if abs(float(spec.T1(x0)) - 1.0) > 1e-12:
        problems.append("T1(x0) != 1")
    if abs(float(spec.T2(x0))) > 1e-12 or abs(float(spec.T2(1.0)) - 1.0) > 1e-12:
        problems.append("T2 is not an increasing onto map [x0,1] -> [0,1]")
    if abs(float(spec.dT1(0.0)) - 1.0) > 1e-12:
        problems.append("T1'(0) != 1")
    xs = np.linspace(0.0, x0, samples + 2)[1:-1]
    if np.any(spec.dT1(xs) <= 1.0):
        problems.append("T1' <= 1 inside (0, x0)")
    if np.any(np.diff(spec.T1(xs)) <= 0):
        problems.append("T1 not increasing")
    zs = np.linspace(x0, 1.0, samples + 1)[1:]
    if np.any(np.abs(spec.dT2(zs)) < spec.beta * (1 - 1e-12)):
        problems.append("|T2'| < beta")
    if spec.beta <= 1.0:
        problems.append("beta <= 1")
    # decomposition of T1 and T1' through delta0, delta1
    xp = xs ** (1.0 + a)
    if not np.allclose(spec.T1(xs), xs + xp + xp * spec.delta0(xs), rtol=1e-10, atol=1e-14):
        problems.append("T1 does not match x + x^(1+a)(1+delta0)")
    xa = xs ** a
    if not np.allclose(spec.dT1(xs), 1.0 + (1.0 + a) * xa + xa * spec.delta1(xs), rtol=1e-10, atol=1e-14):
        problems.append("T1' does not match 1 + (1+a)x^a + x^a delta1")
    if np.any(np.diff(spec.delta0(xs)) < -1e-12):
        problems.append("delta0 decreasing")
    if spec.D < 0 or not math.isfinite(spec.D):
        problems.append("distortion bound D not finite and nonnegative")
    return problems
