"""Certified constants for the weighted-norm error bound and the algorithm's
feasibility estimates.

M is astronomically large for moderate alpha (about 3e25 at alpha = 1/2), so
every quantity that multiplies it is carried as a natural logarithm; the
linear value is filled in only when it is representable.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .mapmodel import MapSpec

_LOG_MAX = math.log(1.7e308)


def _exp_or_inf(log_value: float) -> float:
    return math.exp(log_value) if log_value < _LOG_MAX else math.inf


@dataclass(frozen=True)
class ConstantsBundle:
    alpha: float
    x0: float
    beta: float
    C0: float
    C1: float
    C2: float
    C3: float
    C4: float
    M: float
    gamma: float
    C_LY: float
    D: float
    Chat: float
    Cstar: float
    log_M: float
    log_Cstar: float
    d: float
    d1: float
    canonical: bool

    @property
    def delta_length(self) -> float:
        return 1.0 - self.x0

    def to_json(self) -> dict:
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, float) and not math.isfinite(value):
                value = None  # JSON has no infinity; log_ fields carry the size
            out[key] = value
        return out


def default_C_LY(spec: MapSpec) -> float:
    """Branch-wise Lasota-Yorke constant 2D for onto branches."""
    return 2.0 * spec.D


def compute_constants(spec: MapSpec, Chat: float, C_LY: float | None = None) -> ConstantsBundle:
    if Chat <= 0:
        raise ValueError("Chat must be positive")
    if C_LY is None:
        C_LY = default_C_LY(spec)
    if C_LY <= 0:
        raise ValueError("C_LY must be positive")
    a, x0, beta = spec.alpha, spec.x0, spec.beta
    L = 1.0 - x0
    dz = float(spec.delta0(x0))
    C0 = a * (1.0 + a) / 2.0 * (1.0 + 2.0 * dz + dz * dz)
    base = 2.0 ** (1.0 / a) - 1.0
    log_C1 = (math.log(2.0) + math.log(base)) / a
    C1 = math.exp(log_C1)
    C2 = (1.0 - x0) / x0 ** (1.0 + a) * 2.0 ** (1.0 + 1.0 / a) * base ** (1.0 + 1.0 / a)
    log_M = (1.0 + a) * log_C1 + 2.0 * C0 * math.exp(2.0 * a * log_C1) - math.log(beta)
    gamma = 1.0 / beta
    C3 = 1.0 / beta + C2 / (beta * L) * (a + (2.0 - a) / (1.0 - a))
    C4 = 1.0 + C3 * (C_LY / (1.0 - gamma) + 1.0 / L)
    # log(1 + x0^{1+a}/beta + M(1+a))
    log_bracket = _logaddexp(math.log1p(x0 ** (1.0 + a) / beta), log_M + math.log1p(a))
    log_Cstar = math.log(Chat) + log_bracket + math.log(C4)
    d1 = 1.0 / (2.0 * a ** (1.0 / a)) - 1.0 / (2.0 * (1.0 + a) ** (1.0 / a))
    d = (1.0 + a) * 2.0 ** a * (1.0 / (2.0 * (1.0 + a) ** (1.0 / a)) + d1) ** a
    return ConstantsBundle(
        alpha=a, x0=x0, beta=beta, C0=C0, C1=C1, C2=C2, C3=C3, C4=C4,
        M=_exp_or_inf(log_M), gamma=gamma, C_LY=float(C_LY), D=spec.D, Chat=float(Chat),
        Cstar=_exp_or_inf(log_Cstar), log_M=log_M, log_Cstar=log_Cstar, d=d, d1=d1,
        canonical=spec.is_canonical,
    )


def _logaddexp(p: float, q: float) -> float:
    hi, lo = max(p, q), min(p, q)
    return hi + math.log1p(math.exp(lo - hi))


class NonCanonicalError(ValueError):
    """The feasibility estimates are only established for T1 = x + 2^a x^{1+a}."""


def eta_k(bundle: ConstantsBundle, k: int) -> float:
    if not bundle.canonical:
        raise NonCanonicalError("eta_k is only valid for the canonical LSV family")
    if k < 1:
        raise ValueError("k must be positive")
    return bundle.d * (k + 2) / (k + 2 + bundle.d)


def log_G_n_bound(bundle: ConstantsBundle, n: int) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    a = bundle.alpha
    if n == 1:
        return (1.0 + a) * math.log(bundle.x0) - math.log(bundle.beta)
    return bundle.log_M - (1.0 + 1.0 / a) * math.log(n - 1)


def G_n_bound(bundle: ConstantsBundle, n: int) -> float:
    """Upper bound on x^{1+a} / |DT^n(z_n(x))| over x in [0, x0)."""
    return _exp_or_inf(log_G_n_bound(bundle, n))


def sum_tail_n_lambda(bundle: ConstantsBundle, N: int) -> float:
    """Bound on sum_{n>N} n * lambda_hat(Z_n); N = 0 gives the full-sum bound C3."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    if N == 0:
        return bundle.C3
    a = bundle.alpha
    p = 1.0 / a  # sum_{n>N} n^{-1/a} <= N^{1-p} / (p - 1)
    return bundle.C2 / (bundle.beta * bundle.delta_length) * N ** (1.0 - p) / (p - 1.0)


def tail_moment_bound(bundle: ConstantsBundle, N: int) -> float:
    """Bound on sum_{k>N} k * lambda_hat(Z_k) using lambda_hat(Z_k) = lambda(W_{k-1}) / (beta |Delta|).

    With lambda(W_j) <= C2 j^{-s}, s = 1 + 1/alpha, the sum is at most
    (C2 / (beta |Delta|)) * sum_{j>=N} (j^{1-s} + j^{-s}), bounded by integral comparison.
    """
    if N < 1:
        raise ValueError("N must be positive")
    s = 1.0 + 1.0 / bundle.alpha
    head = N ** (1.0 - s) + N ** (-s)
    tail = N ** (2.0 - s) / (s - 2.0) + N ** (1.0 - s) / (s - 1.0)
    return bundle.C2 / (bundle.beta * bundle.delta_length) * (head + tail)


def series_sum_bound(bundle: ConstantsBundle, k: int) -> float:
    """(1/beta) ((k+2)/k)^eta_k k / (eta_k - 1): bound on sum_n 1/|DT^n(z_n(x))| for x in W_k."""
    eta = eta_k(bundle, k)
    return ((k + 2.0) / k) ** eta * k / (eta - 1.0) / bundle.beta


def epsilon_divisor(bundle: ConstantsBundle, k: int) -> float:
    """Factor turning a sup-norm density error into a pointwise error of the pulled-back density."""
    L = bundle.delta_length
    # k = 0 means x in Delta, where the series is the single term g(x)
    series = 1.0 if k == 0 else series_sum_bound(bundle, k)
    return series * (1.0 + bundle.C3 * (bundle.C_LY / (1.0 - bundle.gamma) + 1.0 / L))


def density_sup_bound(bundle: ConstantsBundle) -> float:
    """C_LY / (1 - gamma) + 1/|Delta|: sup bound for the fixed density of the discretised operator."""
    return bundle.C_LY / (1.0 - bundle.gamma) + 1.0 / bundle.delta_length
