"""Numerical checks of the bounds the error analysis relies on.

Each suite samples an inequality and counts violations. They are sanity
checks on the implementation and constants, not proofs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import ConstantsBundle, compute_constants, log_G_n_bound
from .discretization import Mesh, NodalDensity
from .inducing import InducedMap, build_induced, neutral_orbit
from .mapmodel import MapSpec, backward_orbit_derivative


@dataclass(frozen=True)
class SuiteReport:
    name: str
    checked: int
    violations: int
    worst_ratio: float  # max of lhs / rhs over the samples; <= 1 means no violation

    @property
    def passed(self) -> bool:
        return self.violations == 0


def _report(name, lhs, rhs, rtol=1e-12) -> SuiteReport:
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    bad = lhs > rhs * (1.0 + rtol)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = float(np.nanmax(lhs / rhs))
    return SuiteReport(name, int(lhs.size), int(bad.sum()), ratio)


def _grid(spec: MapSpec, n: int = 1000) -> np.ndarray:
    return np.linspace(0.0, spec.x0, n + 2)[1:-1]


def binomial_inequality(spec: MapSpec) -> SuiteReport:
    """(1+u)^(1+a) <= 1 + (1+a)u + a(1+a)/2 u^2 with u = x^a (1 + delta0(x))."""
    a = spec.alpha
    xs = _grid(spec)
    u = xs ** a * (1.0 + spec.delta0(xs))
    return _report("binomial inequality", (1.0 + u) ** (1.0 + a), 1.0 + (1.0 + a) * u + a * (1.0 + a) / 2.0 * u * u)


def ratio_bound(spec: MapSpec, bundle: ConstantsBundle) -> SuiteReport:
    """(T1(x)/x)^(1+a) / T1'(x) <= 1 + C0 x^(2a)."""
    a = spec.alpha
    xs = _grid(spec)
    g = (spec.T1(xs) / xs) ** (1.0 + a) / spec.dT1(xs)
    return _report("ratio bound", g, 1.0 + bundle.C0 * xs ** (2.0 * a))


def orbit_decay(spec: MapSpec, bundle: ConstantsBundle, n_max: int = 10_000) -> SuiteReport:
    """x_n <= C1 n^(-1/a) along the neutral orbit."""
    xs = neutral_orbit(spec, n_max).xs[1:]
    n = np.arange(1, n_max + 1)
    return _report("orbit decay", xs, bundle.C1 * n ** (-1.0 / spec.alpha))


def weighted_derivative(spec: MapSpec, bundle: ConstantsBundle, n_max: int = 50, samples: int = 200) -> SuiteReport:
    """x^(1+a) / |DT^n(z_n(x))| <= G_n bound on a geometric grid of (0, x0)."""
    a = spec.alpha
    xs = np.geomspace(1e-8, spec.x0, samples + 1)[:-1]
    lhs, rhs = [], []
    for n in range(1, n_max + 1):
        d = backward_orbit_derivative(spec, xs, n)
        lhs.append((1.0 + a) * np.log(xs) - np.log(d))
        rhs.append(np.full_like(xs, log_G_n_bound(bundle, n)))
    # compare in log space; M is far beyond float range for alpha near 1
    lhs, rhs = np.concatenate(lhs), np.concatenate(rhs)
    bad = lhs > rhs + 1e-12
    return SuiteReport("weighted derivative", int(lhs.size), int(bad.sum()), float(np.exp(np.max(lhs - rhs))))


def return_moment(ind: InducedMap, bundle: ConstantsBundle) -> SuiteReport:
    """sum_{n<=B} n lambda_hat(Z_n) <= C3."""
    mu = ind.branch_measure()
    n = np.arange(1, ind.branch_count + 1)
    return _report("return-time moment", [float(np.sum(n * mu))], [bundle.C3])


def cylinder_decay(ind: InducedMap, bundle: ConstantsBundle) -> SuiteReport:
    """lambda(W_n) <= C2 n^(-(1+1/a)), the ingredient of every tail bound."""
    xs = ind.orbit.xs
    w = xs[:-1] - xs[1:]  # lambda(W_n) for n = 1..len
    n = np.arange(1, len(w) + 1)
    return _report("cylinder decay", w, bundle.C2 * n ** (-(1.0 + 1.0 / ind.spec.alpha)))


def lasota_yorke(ind: InducedMap, bundle: ConstantsBundle, trials: int = 100, seed: int = 7,
                 knots: int = 24, grid: int = 1001) -> SuiteReport:
    """V(L f) <= gamma V f + C_LY ||f||_1 for random piecewise-linear f on Delta.

    The transfer operator of the induced map is applied through its branch
    sum and the variation of L f is taken on a fine grid (a lower estimate).
    """
    from .pullback import PullbackEvaluator, series

    spec = ind.spec
    rng = np.random.default_rng(seed)
    mesh = Mesh(spec.x0, 1.0, knots)
    ys = np.linspace(spec.x0, 1.0, grid)
    L = spec.delta_length
    lhs, rhs = [], []
    for _ in range(trials):
        vals = rng.uniform(-1.0, 1.0, knots + 1)
        f = NodalDensity(mesh, vals)
        # series() sums g(z_n)/|DT^n| with g = values / |Delta|; undo that scaling
        ev = PullbackEvaluator(ind, NodalDensity(mesh, vals * L), bundle, 1.0, 1, np.zeros(1))
        Lf = series(ev, ys, ind.branch_count)
        var_Lf = float(np.abs(np.diff(Lf)).sum())
        var_f = float(np.abs(np.diff(vals)).sum())
        fine = f(np.linspace(spec.x0, 1.0, 64 * knots + 1))
        norm1 = float(np.mean(0.5 * (np.abs(fine[1:]) + np.abs(fine[:-1])))) * L
        lhs.append(var_Lf)
        rhs.append(bundle.gamma * var_f + bundle.C_LY * norm1)
    return _report("Lasota-Yorke", lhs, rhs)


def run_all(spec: MapSpec, bundle: ConstantsBundle | None = None, ind: InducedMap | None = None,
            lasota_yorke_branches: int = 400) -> list[SuiteReport]:
    bundle = compute_constants(spec, 1.0) if bundle is None else bundle
    ind = build_induced(spec) if ind is None else ind
    small = build_induced(spec, branch_count=min(lasota_yorke_branches, ind.branch_count))
    return [
        binomial_inequality(spec),
        ratio_bound(spec, bundle),
        orbit_decay(spec, bundle),
        weighted_derivative(spec, bundle),
        return_moment(ind, bundle),
        cylinder_decay(ind, bundle),
        lasota_yorke(small, bundle),
    ]
