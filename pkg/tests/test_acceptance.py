"""Acceptance criteria, one test each.

Every test writes a single ``ACCEPT <n> PASS|FAIL`` line with the measured
quantities before asserting, so the verdicts appear in ``pytest -v`` output
(and in ``python3 tests/test_acceptance.py``) whether or not they hold.
"""
import json
import math
import sys
import time

import numpy as np
import pytest

from induced_ulam import canonical_lsv
from induced_ulam.cli import main as cli_main
from induced_ulam.constants import compute_constants, density_sup_bound, eta_k
from induced_ulam.discretization import DoublingMap, assemble
from induced_ulam.inducing import build_induced
from induced_ulam.lemmas import (binomial_inequality, cylinder_decay, orbit_decay, ratio_bound, return_moment,
                                 weighted_derivative)
from induced_ulam.oracle import birkhoff_histogram, pure_ulam_full_map
from induced_ulam.pipeline import practical_estimate, solve_density
from induced_ulam.pullback import eval_fm, kac_integral, make_evaluator
from induced_ulam.solver import stationary

ALPHAS = (0.3, 0.5, 0.7)
# alpha = 0.7 needs about 3.5e5 branches for a 1e-8 tail; the default cap is 1e5
BRANCH_CAP = 1_000_000
TAIL_TOL = 1e-8


@pytest.fixture
def verdict(request):
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(n, ok, detail):
        line = f"ACCEPT {n:>2} {'PASS' if ok else 'FAIL'}  {detail}"
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        else:
            print(line)
        assert ok, line

    return emit


@pytest.fixture(scope="module")
def assembled():
    """Matrices and fixed densities for every (alpha, m) of the stochasticity criterion."""
    t0 = time.perf_counter()
    out = {}
    for a in ALPHAS:
        ind = build_induced(canonical_lsv(a), tail_tol=TAIL_TOL, cap=BRANCH_CAP)
        for m in (128, 512):
            out[a, m] = (ind, assemble(ind, m, tail_tol=TAIL_TOL))
    return out, time.perf_counter() - t0


def test_1_doubling_exact(verdict):
    t0 = time.perf_counter()
    worst_res, worst_it = 0.0, 0
    for m in (2, 64, 1024):
        r = stationary(assemble(DoublingMap(), m), 1e-12)
        worst_res = max(worst_res, r.residual, float(np.max(np.abs(r.density.values - 1.0))))
        worst_it = max(worst_it, r.iterations)
    dt = time.perf_counter() - t0
    verdict(1, worst_res < 1e-12 and worst_it <= 2 and dt < 1.0,
            f"doubling map: max residual {worst_res:.1e}, iterations {worst_it}, {dt:.2f} s")


def test_2_stochastic(verdict, assembled):
    mats, dt = assembled
    err = max(float(np.max(np.abs(P.row_sums() - 1.0))) for _, P in mats.values())
    neg = min(P.min_entry() for _, P in mats.values())
    B = {a: mats[a, 128][0].branch_count for a in ALPHAS}
    verdict(2, err <= 1e-12 and neg >= 0.0 and dt < 60.0,
            f"row-sum error {err:.1e}, min entry {neg:.1e}, branches {B}, {dt:.1f} s")


def test_3_lemma_suites(verdict, assembled):
    mats, _ = assembled
    t0 = time.perf_counter()
    failed, checked = [], 0
    for a in ALPHAS:
        spec = canonical_lsv(a)
        b = compute_constants(spec, 1.0)
        ind = mats[a, 128][0]
        for r in (binomial_inequality(spec), ratio_bound(spec, b), orbit_decay(spec, b, 10_000),
                  weighted_derivative(spec, b, 50), return_moment(ind, b), cylinder_decay(ind, b)):
            checked += r.checked
            if not r.passed:
                failed.append(f"{r.name}@{a}: {r.violations}")
    dt = time.perf_counter() - t0
    verdict(3, not failed and dt < 60.0,
            f"{checked} samples over 6 suites x 3 alphas, violations {failed or 'none'}, {dt:.1f} s")


def test_4_constants(verdict):
    b = compute_constants(canonical_lsv(0.5), 1.0)
    errs = {
        "C1": abs(b.C1 - 36.0), "C0": abs(b.C0 - 0.75), "d": abs(b.d - 3.0), "eta1": abs(eta_k(b, 1) - 1.5),
    }
    log_err = abs(b.log_M - (1.5 * math.log(36.0) + 54.0 - math.log(2.0)))
    worst = max(errs.values())
    verdict(4, worst <= 1e-12 and log_err <= 1e-9, f"max constant error {worst:.1e}, log_M error {log_err:.1e}")


def test_5_sup_bound(verdict, assembled):
    mats, _ = assembled
    rows = []
    ok = True
    for (a, m), (ind, P) in mats.items():
        spec = ind.spec
        res = stationary(P, 1e-13)
        # Lebesgue-normalised g = f_hat / |Delta| is the stricter reading (|Delta| < 1)
        sup_g = float(res.density.values.max()) / spec.delta_length
        bound = density_sup_bound(compute_constants(spec, 1.0))
        ok &= sup_g <= bound + 1e-6
        rows.append(f"{a}/{m}: {sup_g:.3f}<={bound:.3g}")
    verdict(5, ok, "sup g vs bound " + ", ".join(rows))


def test_6_convergence_ladder(verdict):
    t0 = time.perf_counter()
    spec = canonical_lsv(0.5)
    _, ref = solve_density(spec, 4096, 1e-13)
    ladder = (128, 256, 512, 1024, 2048)
    dist = []
    for m in ladder:
        _, r = solve_density(spec, m, 1e-13)
        dist.append(float(np.max(np.abs(r.density.values - ref.density.values[::4096 // m]))))
    ratios = [b / a for a, b in zip(dist, dist[1:])]
    # the proved rate is ln m / m; the scaled error must not grow along the ladder
    scaled = [d * m / math.log(m) for d, m in zip(dist, ladder)]
    dominated = all(y <= x * (1 + 1e-12) for x, y in zip(scaled, scaled[1:]))
    dt = time.perf_counter() - t0
    verdict(6, max(ratios) <= 0.75 and dominated and dt < 600,
            "distances " + ", ".join(f"{d:.2e}" for d in dist) + "; ratios "
            + ", ".join(f"{q:.3f}" for q in ratios) + f"; d*m/ln m non-increasing {dominated}; {dt:.1f} s")


def test_7_kac(verdict):
    t0 = time.perf_counter()
    spec = canonical_lsv(0.5)
    N = 10_000
    ind, res = solve_density(spec, 1024, 1e-13, min_branches=N)
    k = kac_integral(make_evaluator(ind, res.density, N))
    dt = time.perf_counter() - t0
    # the mass below the quadrature cutoff is only bounded, so it counts against the tolerance
    verdict(7, abs(k.value - 1.0) + k.error_bar <= 1e-3 and dt < 60,
            f"integral {k.value:.7f} (+ unresolved mass <= {k.error_bar:.1e} below {k.cutoff:g}), {dt:.1f} s")


def test_8_cross_oracle(verdict):
    t0 = time.perf_counter()
    spec = canonical_lsv(0.5)
    hist = birkhoff_histogram(spec, n_iters=10 ** 8, bins=256, seed=20240601)
    ulam = pure_ulam_full_map(spec, 4096)
    rows, ok = [], True
    for x in (0.3, 0.5, 0.75):
        r = practical_estimate(spec, x, 2048, 10_000, 1e-12)
        h, s = hist.at(x)
        u = ulam.at(x)
        z = abs(r.value - h) / s
        rel = abs(r.value - u) / u
        ok &= z <= 3.0 and rel <= 0.02
        rows.append(f"x={x}: f={r.value:.5f} hist={h:.5f}+-{s:.5f} ({z:.2f} sigma) ulam={u:.5f} ({100 * rel:.2f}%)")
    dt = time.perf_counter() - t0
    verdict(8, ok and dt < 900, "; ".join(rows) + f"; seed {hist.seed}, {dt:.0f} s")


def test_9_weight_shape(verdict):
    t0 = time.perf_counter()
    spec = canonical_lsv(0.5)
    N = 10_000
    ind, a = solve_density(spec, 1024, 1e-13, min_branches=N)
    _, b = solve_density(spec, 2048, 1e-13, min_branches=N)
    xs = np.geomspace(1e-3, 1e-1, 40)
    diff = np.abs(eval_fm(make_evaluator(ind, a.density, N), xs, N)
                  - eval_fm(make_evaluator(ind, b.density, N), xs, N))
    slope = float(np.polyfit(np.log(xs), np.log(diff), 1)[0])
    dt = time.perf_counter() - t0
    # |f_m - f_2m| may blow up toward 0 no faster than x^-(1+alpha), with 0.1 slack
    verdict(9, -slope <= 1.0 + spec.alpha + 0.1 and dt < 300,
            f"log-log slope of |f_1024 - f_2048| on [1e-3, 1e-1]: {slope:.3f} (limit -{1.6:.1f}), {dt:.1f} s")


def test_10_rigorous_honesty(verdict, capsys):
    code = cli_main(["density", "--mode", "rigorous", "--alpha", "0.5", "--x-star", "0.5", "--R", "0.1"])
    out = capsys.readouterr().out
    report = json.loads(out)

    def finite(obj):
        if isinstance(obj, dict):
            return all(finite(v) for v in obj.values())
        if isinstance(obj, list):
            return all(finite(v) for v in obj)
        return not isinstance(obj, float) or math.isfinite(obj)

    clean = finite(report) and "NaN" not in out and "Infinity" not in out
    lm = report.get("log10_m_star")
    verdict(10, code == 3 and lm is not None and lm > 20 and clean,
            f"exit {code}, log10 m* = {lm:.2f}, log10 C* = {report.get('log10_Cstar'):.2f}, finite fields {clean}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
