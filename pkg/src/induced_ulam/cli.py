"""Command-line front end.

Configuration is a flat ``key=value`` file (``--config``) and/or flags of the
same names; flags win. Results are JSON, tables are CSV whose leading ``#``
lines carry the constants bundle and rigor flags.

Exit codes: 0 success, 2 configuration error, 3 infeasible rigorous run,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .constants import compute_constants
from .discretization import assemble, load_matrix, save_matrix
from .inducing import BranchCapError, build_induced
from .mapmodel import MapSpecError, RootSolveError, canonical_lsv, lsv_family
from .pipeline import (InfeasibleError, PipelineConfig, certify_pointwise, practical_estimate, solve_density)
from .pullback import TruncationError, make_evaluator, weighted_norm_distance
from .solver import NonPositiveDensityError, stationary

CACHE_ENV = "INDUCED_ULAM_CACHE"
EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    family: str = "lsv"  # "lsv": T1 = x + 2^a x^(1+a); "custom": T1 = x + coeff x^(1+a)
    alpha: float = 0.5
    coeff: float | None = None
    m: int = 1024
    tail_tol: float = 1e-8
    branch_cap: int = 100_000
    eps: float = 1e-12
    R: float = 0.1
    x_star: float = 0.5
    N: int = 10_000
    Chat: float = 1.0
    C_LY: float | None = None
    mode: str = "practical"
    out: str | None = None
    seed: int = 20240601
    n_iters: int = 10 ** 8
    bins: int = 256
    burn_in: int = 10 ** 4
    ladder: str = "128,256,512,1024,2048"
    ref_m: int = 4096
    grid: int = 1000
    samples: int = 512
    timings: bool = False

    def validate(self) -> "RunConfig":
        if self.family not in ("lsv", "custom"):
            raise ConfigError("family must be 'lsv' or 'custom'")
        if self.family == "custom" and self.coeff is None:
            raise ConfigError("family=custom needs coeff")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.mode not in ("rigorous", "practical"):
            raise ConfigError("mode must be 'rigorous' or 'practical'")
        for name in ("m", "N", "branch_cap", "bins", "n_iters", "ref_m", "grid", "samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.m < 2:
            raise ConfigError("m must be at least 2")
        for name in ("tail_tol", "eps", "R", "Chat"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.C_LY is not None and not self.C_LY > 0:
            raise ConfigError("C_LY must be positive")
        if not 0.0 < self.x_star <= 1.0:
            raise ConfigError("x_star must lie in (0, 1]")
        self.ladder_values()
        return self

    def ladder_values(self) -> list[int]:
        try:
            vals = [int(v) for v in str(self.ladder).split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"ladder must be comma-separated integers: {exc}") from None
        if not vals or min(vals) < 2:
            raise ConfigError("ladder needs mesh sizes >= 2")
        return vals

    def spec(self):
        if self.family == "lsv":
            return canonical_lsv(self.alpha)
        return lsv_family(self.alpha, self.coeff)

    def pipeline(self) -> PipelineConfig:
        return PipelineConfig(Chat=self.Chat, C_LY=self.C_LY, tail_tol=self.tail_tol, branch_cap=self.branch_cap)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(name: str, text: str):
    kind = str(_FIELDS[name].type)
    text = text.strip()
    if "None" in kind and text.lower() in ("none", ""):
        return None
    try:
        if kind.startswith("bool"):
            if text.lower() in ("1", "true", "yes"):
                return True
            if text.lower() in ("0", "false", "no"):
                return False
            raise ValueError(text)
        if kind.startswith("int"):
            return int(float(text)) if "e" in text.lower() else int(text)
        if kind.startswith("float"):
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, value)
    return out


def build_config(config_path: str | None, overrides: dict) -> RunConfig:
    values = {}
    if config_path:
        try:
            values.update(parse_config_text(Path(config_path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    for key, value in overrides.items():
        if value is not None:
            values[key] = _convert(key, str(value)) if isinstance(value, str) else value
    return RunConfig(**values).validate()


# ---- output helpers -------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(cfg: RunConfig, header: list[str], rows, constants: dict, flags: list[str]) -> str:
    lines = ["# constants: " + json.dumps(_clean(constants), sort_keys=True, allow_nan=False),
             "# rigor_flags: " + json.dumps(flags), ",".join(header)]
    for row in rows:
        lines.append(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _bundle(cfg: RunConfig):
    return compute_constants(cfg.spec(), cfg.Chat, cfg.C_LY)


def _flags(cfg: RunConfig) -> list[str]:
    flags = ["Chat supplied: not derived here"]
    if cfg.C_LY is None:
        flags.append("C_LY default 2D with D estimated numerically along the neutral orbit")
    return flags


def _cache_path(cfg: RunConfig, ind) -> Path | None:
    root = os.environ.get(CACHE_ENV)
    if not root:
        return None
    spec = ind.spec
    name = f"{spec.identity()}_m{cfg.m}_B{ind.branch_count}_{float(cfg.tail_tol).hex()}.npz"
    return Path(root) / name


def _matrix(cfg: RunConfig, ind):
    path = _cache_path(cfg, ind)
    meta = {"m": cfg.m, "tail_tol": cfg.tail_tol, "B": ind.branch_count, "alpha": ind.spec.alpha,
            "x0": ind.spec.x0, "map_hash": ind.spec.identity()}
    if path is not None:
        cached = load_matrix(path, meta)
        if cached is not None:
            return cached, True
    matrix = assemble(ind, cfg.m, tail_tol=cfg.tail_tol)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_matrix(path, matrix)
    return matrix, False


# ---- subcommands ------------------------------------------------------------

def cmd_constants(cfg: RunConfig) -> int:
    b = _bundle(cfg)
    _emit(cfg, dumps({"constants": b.to_json(), "rigor_flags": _flags(cfg)}))
    return EXIT_OK


def cmd_induce(cfg: RunConfig) -> int:
    spec = cfg.spec()
    ind = build_induced(spec, tail_tol=cfg.tail_tol, cap=cfg.branch_cap)
    mu = ind.branch_measure()
    xs = ind.orbit.xs
    rows = [(n + 1, ind.lo[n], ind.hi[n], mu[n], xs[n]) for n in range(ind.branch_count)]
    text = _csv(cfg, ["n", "a_n", "b_n", "lambda_hat_Z_n", "x_n_minus_1"], rows, _bundle(cfg).to_json(),
                _flags(cfg) + [f"tail_mass={ind.tail_mass!r}"])
    _emit(cfg, text)
    return EXIT_OK


def cmd_discretize(cfg: RunConfig) -> int:
    ind = build_induced(cfg.spec(), tail_tol=cfg.tail_tol, cap=cfg.branch_cap)
    matrix, hit = _matrix(cfg, ind)
    rs = matrix.row_sums()
    path = _cache_path(cfg, ind)
    out = {"m": cfg.m, "B": ind.branch_count, "tail_mass": ind.tail_mass, "cache_hit": hit,
           "cache_path": str(path) if path else None, "max_row_sum_error": float(np.max(np.abs(rs - 1.0))),
           "min_entry": matrix.min_entry(), "constants": _bundle(cfg).to_json(), "rigor_flags": _flags(cfg)}
    _emit(cfg, dumps(out))
    return EXIT_OK


def cmd_solve(cfg: RunConfig) -> int:
    ind = build_induced(cfg.spec(), tail_tol=cfg.tail_tol, cap=cfg.branch_cap)
    matrix, _ = _matrix(cfg, ind)
    res = stationary(matrix, cfg.eps)
    nodes = res.density.mesh.nodes
    flags = _flags(cfg) + [f"residual={float(res.residual)!r}", f"iterations={res.iterations}",
                           "values are lambda_hat-normalised (integral over Delta against lambda/|Delta| is 1)"]
    _emit(cfg, _csv(cfg, ["node", "value"], zip(nodes, res.density.values), _bundle(cfg).to_json(), flags))
    return EXIT_OK


def cmd_density(cfg: RunConfig) -> int:
    spec = cfg.spec()
    if cfg.mode == "rigorous":
        try:
            result = certify_pointwise(spec, cfg.x_star, cfg.R, cfg.pipeline())
        except InfeasibleError as exc:
            _emit(cfg, dumps(exc.report))
            return EXIT_INFEASIBLE
    else:
        result = practical_estimate(spec, cfg.x_star, cfg.m, cfg.N, cfg.eps, cfg.pipeline())
    out = result.to_json()
    if not cfg.timings:
        out.pop("timings", None)
    _emit(cfg, dumps(out))
    return EXIT_OK


def cmd_convergence(cfg: RunConfig) -> int:
    spec = cfg.spec()
    pc = cfg.pipeline()
    ind, ref = solve_density(spec, cfg.ref_m, cfg.eps, pc)
    N = min(cfg.N, ind.branch_count)
    ref_ev = make_evaluator(ind, ref.density, N)
    rows = []
    for m in cfg.ladder_values():
        if cfg.ref_m % m:
            raise ConfigError(f"ref_m={cfg.ref_m} must be a multiple of every ladder mesh (got {m})")
        _, res = solve_density(spec, m, cfg.eps, pc)
        step = cfg.ref_m // m
        sup_err = float(np.max(np.abs(res.density.values - ref.density.values[::step])))
        ev = make_evaluator(ind, res.density, N)
        wb = weighted_norm_distance(ev, ref_ev, spec.alpha, cfg.grid)
        rows.append((m, sup_err, wb))
    flags = _flags(cfg) + [f"reference m={cfg.ref_m}", "weighted_B_err is a grid estimate (lower bound)"]
    _emit(cfg, _csv(cfg, ["m", "sup_err_vs_ref", "weighted_B_err"], rows, _bundle(cfg).to_json(), flags))
    return EXIT_OK


def cmd_verify_lemmas(cfg: RunConfig) -> int:
    from .lemmas import run_all

    spec = cfg.spec()
    ind = build_induced(spec, tail_tol=cfg.tail_tol, cap=cfg.branch_cap)
    b = _bundle(cfg)
    reports = run_all(spec, b, ind)
    rows = [(r.name.replace(" ", "_"), r.checked, r.violations, r.worst_ratio, "pass" if r.passed else "FAIL")
            for r in reports]
    _emit(cfg, _csv(cfg, ["suite", "checked", "violations", "worst_ratio", "status"], rows, b.to_json(), _flags(cfg)))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_NUMERIC


def cmd_oracle(cfg: RunConfig) -> int:
    from .oracle import birkhoff_histogram

    h = birkhoff_histogram(cfg.spec(), cfg.n_iters, cfg.bins, cfg.seed, cfg.burn_in)
    flags = _flags(cfg) + [f"seed={cfg.seed}", "generator=PCG64", f"restarts={h.restarts}",
                           "sigma is multinomial and ignores serial correlation"]
    rows = zip(h.edges[:-1], h.edges[1:], h.density, h.sigma)
    _emit(cfg, _csv(cfg, ["bin_left", "bin_right", "density", "sigma"], rows, _bundle(cfg).to_json(), flags))
    return EXIT_OK


def cmd_plot_data(cfg: RunConfig) -> int:
    spec = cfg.spec()
    xs = np.linspace(0.0, 1.0, cfg.samples + 1)
    left = xs[xs < spec.x0]
    right = xs[xs >= spec.x0]
    rows = [("T1", x, y) for x, y in zip(left, spec.T1(left))]
    rows += [("T1", spec.x0, 1.0)]
    rows += [("T2", x, y) for x, y in zip(right, spec.T2(right))]
    ind = build_induced(spec, branch_count=min(12, cfg.branch_cap))
    rows += [("orbit", x, 0.0) for x in ind.orbit.xs]
    rows += [("Z_boundary", a, float(n + 1)) for n, a in enumerate(ind.lo)]
    _emit(cfg, _csv(cfg, ["series", "x", "y"], rows, _bundle(cfg).to_json(), _flags(cfg)))
    return EXIT_OK


COMMANDS = {
    "constants": cmd_constants,
    "induce": cmd_induce,
    "discretize": cmd_discretize,
    "solve": cmd_solve,
    "density": cmd_density,
    "convergence": cmd_convergence,
    "verify-lemmas": cmd_verify_lemmas,
    "oracle": cmd_oracle,
    "plot-data": cmd_plot_data,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="induced-ulam", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="flat key=value configuration file")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        names = [flag]
        if f.name == "x_star":
            names.append("--x")
        p.add_argument(*names, dest=f.name, default=None, help=f"overrides {f.name}")
    return p


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
        cfg = build_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except (ConfigError, MapSpecError) as exc:
        sys.stdout.write(dumps({"error": "config", "message": str(exc)}))
        return EXIT_CONFIG
    except (RootSolveError, NonPositiveDensityError, TruncationError, BranchCapError, RuntimeError,
            FloatingPointError, ValueError) as exc:
        payload = {"error": "numerical", "type": type(exc).__name__, "message": str(exc)}
        needed = getattr(exc, "needed", None)
        if needed is not None:
            payload["needed"] = needed
        sys.stdout.write(dumps(payload))
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
