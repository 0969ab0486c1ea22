"""Command-line front end: cbe exact|estimate|rate-curve|sample|validate."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import asymptotics as asy
from .estimate import DeviationEstimate
from .exact_transform import EnsembleParams, laplace_values
from .montecarlo import (
    MCConfig,
    empirical_kolmogorov,
    integrated_autocorr_time,
    mcmc_sample,
    mean_with_error,
    write_csv,
)
from .specfun import DomainError, QuadratureError, QuadratureSpec
from .tilt import ConvergenceError, Regime, classify_regime, scheme_estimate
from .validation import rate_curve_rows, run_battery

EXIT_OK, EXIT_VALIDATE, EXIT_INPUT, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4


class InputError(ValueError):
    """Configuration rejected before any computation."""


@dataclass
class MCBlock:
    samples: int = 10_000
    burn: int = 1_000
    thin: int = 1
    seed: int = 0
    chains: int = 64


@dataclass
class QuadBlock:
    abs_tol: float = 1e-13
    rel_tol: float = 1e-11


@dataclass
class ExperimentConfig:
    command: str
    n: int = 10
    beta: float = 2.0
    delta: float = 0.0
    x: list = field(default_factory=list)
    z: list = field(default_factory=list)
    mc: MCBlock = field(default_factory=MCBlock)
    quad: QuadBlock = field(default_factory=QuadBlock)
    out: str | None = None
    format: str = "csv"
    quick: bool = False
    inject_fault: str | None = None

    @property
    def quad_spec(self) -> QuadratureSpec:
        return QuadratureSpec(abs_tol=self.quad.abs_tol, rel_tol=self.quad.rel_tol)

    def validate(self):
        if self.command == "validate":
            return
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise InputError(f"--N must be a positive integer, got {self.n!r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise InputError(f"--beta must be positive and finite, got {self.beta!r}")
        if not (self.delta >= 0 and math.isfinite(self.delta)):
            raise InputError(f"--delta must be nonnegative, got {self.delta!r}")
        if self.format not in ("csv", "json"):
            raise InputError(f"--format must be csv or json, got {self.format!r}")
        if any(not math.isfinite(v) for v in self.x + self.z):
            raise InputError("--x / --z values must be finite")
        if self.command == "exact" and any(2 * self.delta + z <= -1 for z in self.z):
            raise InputError("--z requires 2*delta + z > -1")
        if self.command == "estimate":
            if self.n < 3:
                raise InputError("--N must be >= 3 for estimate")
            if any(v <= 0 for v in self.x):
                raise InputError("--x must be positive for estimate")
        if self.command == "rate-curve" and any(not 0 < v < math.log(2) for v in self.x):
            raise InputError("--x grid for rate-curve must lie in (0, log 2)")
        if self.command == "sample":
            m = self.mc
            if m.samples < 1 or m.burn < 0 or m.thin < 1 or m.chains < 1 or m.seed < 0:
                raise InputError("--samples >= 1, --burn >= 0, --thin >= 1, --seed >= 0 are required")
            if not self.out:
                raise InputError("--out is required for sample")


def parse_grid(spec: str) -> list[float]:
    """'A:B:STEP' inclusive of B up to rounding."""
    try:
        a, b, step = (float(t) for t in spec.split(":"))
    except ValueError as exc:
        raise InputError(f"grid must be A:B:STEP, got {spec!r}") from exc
    if step <= 0 or b < a:
        raise InputError(f"grid {spec!r} needs STEP > 0 and B >= A")
    k = int(math.floor((b - a) / step + 1e-9))
    return [round(a + i * step, 12) for i in range(k + 1)]


_DEFAULT_GRIDS = {
    "exact": ("z", [0.0, 0.5, 1.0, 2.0]),
    "estimate": ("x", [1.0, 5.0, 20.0]),
    "rate-curve": ("x", parse_grid("0.02:0.66:0.02") + [0.666]),
}


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"--config {args.config}: invalid JSON ({exc})") from exc
    mc = MCBlock(**data.pop("mc", {}))
    quad = QuadBlock(**data.pop("quad", {}))
    data.pop("command", None)
    for k in ("x", "z"):
        if k in data and not isinstance(data[k], list):
            data[k] = [data[k]]
    try:
        cfg = ExperimentConfig(command=args.command, mc=mc, quad=quad, **data)
    except TypeError as exc:
        raise InputError(f"--config: {exc}") from exc
    # flags win over the file
    for flag, attr in (("N", "n"), ("beta", "beta"), ("delta", "delta"), ("out", "out"), ("format", "format")):
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg, attr, val)
    for flag, attr in (("samples", "samples"), ("burn", "burn"), ("thin", "thin"), ("seed", "seed"), ("chains", "chains")):
        val = getattr(args, flag, None)
        if val is not None:
            setattr(cfg.mc, attr, val)
    if args.x is not None:
        cfg.x = list(args.x)
    if args.x_grid is not None:
        cfg.x = parse_grid(args.x_grid)
    if args.z is not None:
        cfg.z = list(args.z)
    if args.z_grid is not None:
        cfg.z = parse_grid(args.z_grid)
    cfg.quick = bool(args.quick)
    cfg.inject_fault = args.inject_fault
    if args.command in _DEFAULT_GRIDS:
        key, default = _DEFAULT_GRIDS[args.command]
        if not getattr(cfg, key):
            setattr(cfg, key, list(default))
    cfg.validate()
    return cfg


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("CBE_THREADS", "1")))
    except ValueError:
        return 1


def _ordered_map(fn, items):
    # Executor.map yields in input order regardless of completion order
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_exact(cfg: ExperimentConfig) -> list[dict]:
    p = EnsembleParams(cfg.n, cfg.beta, cfg.delta)

    def row(z):
        vals = [float(laplace_values(p, z, k)) for k in range(4)]
        return {"z": z, "lambda": vals[0], "lambda_1": vals[1], "lambda_2": vals[2], "lambda_3": vals[3]}

    return _ordered_map(row, cfg.z)


def _est_row(x, regime, est: DeviationEstimate | None, method=None) -> dict:
    if est is None:
        return {
            "x": x, "regime": regime.tag.value, "method": method, "probability": 0.0,
            "log_probability": -math.inf, "prefactor": 0.0, "exponent": -math.inf,
            "quality": "Equivalent", "flags": "", "rationale": regime.rationale,
        }
    return {"x": x, "regime": regime.tag.value, **est.as_row(), "rationale": regime.rationale}


def estimate_rows(n: int, beta: float, x: float, spec: QuadratureSpec) -> list[dict]:
    regime = classify_regime(n, beta, x)
    if regime.tag is Regime.OUT_OF_RANGE:
        return [_est_row(x, regime, None, "OutOfRange")]
    rows = []
    candidates = [
        lambda: scheme_estimate(n, beta, x),
        lambda: asy.estimate_clt_tail(n, beta, x),
        lambda: asy.estimate_small_moderate(n, beta, x, spec),
        lambda: asy.estimate_true_moderate(n, beta, x, spec),
        lambda: asy.estimate_simplified(n, beta, x, spec),
        lambda: asy.large_dev(n, beta, x / n)[1],
    ]
    for make in candidates:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                rows.append(_est_row(x, regime, make()))
        except DomainError:
            continue  # estimator not applicable at this (N, beta, x)
    return rows


def cmd_estimate(cfg: ExperimentConfig) -> list[dict]:
    spec = cfg.quad_spec
    per_x = _ordered_map(lambda x: estimate_rows(cfg.n, cfg.beta, x, spec), cfg.x)
    return [r for rows in per_x for r in rows]


def cmd_rate_curve(cfg: ExperimentConfig) -> list[dict]:
    return [r for rows in _ordered_map(lambda x: rate_curve_rows(cfg.beta, [x]), cfg.x) for r in rows]


def cmd_sample(cfg: ExperimentConfig) -> dict:
    p = EnsembleParams(cfg.n, cfg.beta, cfg.delta)
    m = cfg.mc
    batch = mcmc_sample(p, MCConfig(n_samples=m.samples, n_burn=m.burn, thinning=m.thin, n_chains=m.chains), m.seed)
    h = 2.0 * cfg.delta
    mean_pred = float(laplace_values(EnsembleParams(cfg.n, cfg.beta), h, 1))
    var_pred = float(laplace_values(EnsembleParams(cfg.n, cfg.beta), h, 2))
    mean, mean_se = mean_with_error(batch)
    tau = integrated_autocorr_time(batch.by_chain())
    write_csv(batch, cfg.out)
    summary = {
        "n": cfg.n, "beta": cfg.beta, "delta": cfg.delta, "seed": m.seed, "samples": int(batch.values.size),
        "mean": mean, "mean_std_error": mean_se, "variance": float(np.var(batch.values)),
        "predicted_mean": mean_pred, "predicted_variance": var_pred,
        "acceptance_rate": batch.acceptance_rate, "proposal_scale": batch.proposal_scale,
        "autocorr_time": tau, "effective_size": batch.values.size / tau,
        "kolmogorov": empirical_kolmogorov(batch, mean_pred, math.sqrt(var_pred)),
        "flags": list(batch.flags),
    }
    with open(summary_path(cfg.out), "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def summary_path(out: str) -> str:
    root, _ = os.path.splitext(out)
    return root + ".summary.json"


def _fmt(v):
    return repr(v) if isinstance(v, float) else v


def emit(rows: list[dict], cfg: ExperimentConfig):
    fh = open(cfg.out, "w", newline="") if cfg.out else sys.stdout
    try:
        if cfg.format == "json":
            json.dump(rows, fh, indent=2, default=str)
            fh.write("\n")
        else:
            cols = list(rows[0].keys()) if rows else []
            w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(v) for k, v in r.items()})
    finally:
        if fh is not sys.stdout:
            fh.close()


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cbe", description="Deviations of log|det(I - U)| for circular beta ensembles.")
    ap.add_argument("command", choices=["exact", "estimate", "rate-curve", "sample", "validate"])
    ap.add_argument("--config", help="JSON config file; flags override its values")
    ap.add_argument("--N", type=int)
    ap.add_argument("--beta", type=float)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--x", type=float, nargs="+")
    ap.add_argument("--x-grid", dest="x_grid", metavar="A:B:STEP")
    ap.add_argument("--z", type=float, nargs="+")
    ap.add_argument("--z-grid", dest="z_grid", metavar="A:B:STEP")
    ap.add_argument("--samples", type=int)
    ap.add_argument("--burn", type=int)
    ap.add_argument("--thin", type=int)
    ap.add_argument("--chains", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--format", choices=["csv", "json"])
    ap.add_argument("--quick", action="store_true", help="validate: skip the Monte Carlo checks")
    ap.add_argument("--inject-fault", dest="inject_fault", choices=["sign-flip"], help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        cfg = build_config(args)
        if cfg.command == "validate":
            results = run_battery(quick=cfg.quick, inject_fault=cfg.inject_fault, report=lambda r: print(r.line(), flush=True))
            ok = all(r.passed for r in results)
            print(f"{sum(r.passed for r in results)}/{len(results)} checks passed")
            return EXIT_OK if ok else EXIT_VALIDATE
        if cfg.command == "sample":
            summary = cmd_sample(cfg)
            json.dump(summary, sys.stdout, indent=2)
            sys.stdout.write("\n")
            return EXIT_OK
        handler = {"exact": cmd_exact, "estimate": cmd_estimate, "rate-curve": cmd_rate_curve}[cfg.command]
        emit(handler(cfg), cfg)
        return EXIT_OK
    except (InputError, DomainError) as exc:
        print(f"cbe: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (QuadratureError, ConvergenceError, FloatingPointError, ArithmeticError) as exc:
        print(f"cbe: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"cbe: I/O error: {exc.filename or ''} {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
