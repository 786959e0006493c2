"""Command-line front end.

Subcommands ``predict``, ``find-threshold``, ``sweep``, ``verify`` and ``de``
write a table to stdout (or ``--out``) as CSV or JSON.  Progress goes to
stderr.  Exit codes: 0 success, 1 verification or bracket failure, 2 invalid
arguments or infeasible parameters.

Every random stream is ``child_rng(seed, command_id, ...)`` so output bytes
depend only on the arguments.  Wall-clock time is written to stderr and only
enters the JSON ``timing_ms`` field with ``--timing``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time

import numpy as np

from . import evolution, mcoracle, reference, theory
from .model import (
    BlockDiagonal,
    DesignDistribution,
    Dimensions,
    DomainError,
    ExplicitSpectrum,
    GaussianIID,
    Identity,
    NoiseSpec,
    ScaledIdentity,
    build_signal,
    spectrum_values,
)
from .recovery import (
    MP,
    NONORACLE,
    ORACLE,
    Exact,
    ThresholdSearchConfig,
    find_threshold,
    full_recovery_error_rate,
    snr_experiment,
)
from .rng import child_rng

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2

# first element of every stream key
CMD_IDS = {"predict": 1, "find-threshold": 2, "sweep": 3, "verify": 4, "de": 5}

PREDICT_MODES = ("oracle", "gaussian", "nonoracle", "nonoracle-closed", "nonoracle-singularity")

PREDICT_COLUMNS = ["mode", "n", "m", "p", "h", "tau_p", "tau_h", "shape_factor", "threshold", "regime", "formula"]
THRESHOLD_COLUMNS = [
    "status", "mean", "std", "per_repeat", "probes_used", "probes_per_repeat", "repeats", "trials",
    "lower", "upper", "epsilon", "message",
]
SWEEP_COLUMNS = ["variable", "value", "error_rate", "trials", "seed"]
VERIFY_COLUMNS = [
    "name", "mc_estimate", "mc_standard_error", "closed_form", "z_score", "pass", "criterion", "rel_error", "note",
]
DE_COLUMNS = ["iter", "mean_h", "recovery_probability", "drift"]

FORMULA_IDS = {
    "oracle": "oracle: snr = (4 ln n / m) / (1 - 2 F ln n)",
    "gaussian": "gaussian: snr = (4 ln n / m) / (1 - 6 F ln n)",
    "nonoracle": "nonoracle: root of 2 ln(h) Var - E^2",
    "nonoracle-closed": "nonoracle-closed: eta1 / eta2",
    "nonoracle-singularity": "nonoracle-singularity: eta2(tau_h) = 0",
}


class UsageError(Exception):
    """Invalid or infeasible arguments (exit 2)."""


# ------------------------------------------------------------------ parsing


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def parse_spectrum(text: str):
    if text == "scaled-identity":
        return ScaledIdentity()
    if text == "identity":
        return Identity()
    if text == "gaussian":
        return GaussianIID()
    if text == "block-diagonal":
        return BlockDiagonal()
    if text.startswith("explicit:"):
        try:
            vals = tuple(float(v) for v in text[len("explicit:"):].split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad explicit spectrum {text!r}") from None
        return ExplicitSpectrum(vals)
    raise argparse.ArgumentTypeError(
        f"unknown spectrum {text!r}; use scaled-identity, identity, gaussian, block-diagonal or explicit:l1,l2,..."
    )


def parse_grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:num`` (inclusive, evenly spaced)."""
    try:
        if ":" in text:
            a, b, k = text.split(":")
            return [float(v) for v in np.linspace(float(a), float(b), int(k))]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--h", type=int, help="number of permuted rows (default n)")
    p.add_argument("--tau-h", type=_float)
    p.add_argument("--tau-p", type=_float)
    p.add_argument("--snr", type=_float, help="signal-to-noise ratio; inf is noiseless")
    p.add_argument("--sigma", type=_float)
    p.add_argument("--spectrum", type=parse_spectrum, default=ScaledIdentity())
    p.add_argument("--design", choices=("gauss", "unif"), default="gauss")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--timing", action="store_true", help="record wall-clock time in JSON output")


def _solver_args(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=(ORACLE, NONORACLE), default=ORACLE)
    p.add_argument("--solver", choices=("exact", "mp"), default="exact")
    p.add_argument("--trials", type=int, default=100)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shufflereg", description="Shuffled linear regression experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="closed-form thresholds")
    _common(p)
    p.add_argument("--mode", choices=PREDICT_MODES, default="oracle")

    p = sub.add_parser("find-threshold", help="bisection search for the empirical snr threshold")
    _common(p)
    _solver_args(p)
    p.add_argument("--repeats", type=int, default=20)
    p.add_argument("--epsilon", type=_float, default=1e-3)
    p.add_argument("--lower", type=_float, default=0.05)
    p.add_argument("--upper", type=_float, default=1.0)
    p.add_argument("--error-threshold", type=_float, default=0.05)
    p.add_argument("--step-at", type=_float, help=argparse.SUPPRESS)  # deterministic step experiment

    p = sub.add_parser("sweep", help="error rate over a grid")
    _common(p)
    _solver_args(p)
    p.add_argument("--var", choices=("snr", "tau_h", "n"), required=True)
    p.add_argument("--grid", type=parse_grid, required=True, help="a,b,c or start:stop:num")

    p = sub.add_parser("verify", help="Monte-Carlo checks of the closed forms")
    _common(p)
    p.add_argument("--trials", type=int, default=200_000)
    p.add_argument(
        "--suite",
        choices=("default", "identities", "oracle", "tables", "nonoracle", "all"),
        default="default",
        help="default = identities + oracle + tables",
    )
    p.add_argument("--z-max", type=_float, default=4.0)
    p.add_argument("--corrupt-trace", type=_float, default=1.0, help=argparse.SUPPRESS)

    p = sub.add_parser("de", help="population dynamics of the message distribution")
    _common(p)
    p.add_argument("--mode", choices=(ORACLE, NONORACLE), default=ORACLE)
    p.add_argument("--population", type=int, default=10_000)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--probes", type=int, default=100_000)
    p.add_argument("--recursion", choices=(evolution.FULL, evolution.BRW), default=evolution.FULL)
    p.add_argument("--drift", action="store_true", help="add the empirical drift of the edge gap")
    return parser


# --------------------------------------------------------------- resolution


def _need(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n for n in missing))


def _check_positive(args, *names):
    for name in names:
        v = getattr(args, name.replace("-", "_"), None)
        if v is not None and not v > 0:
            raise UsageError(f"--{name} must be positive, got {v}")


def resolve_dims(args, n: int | None = None) -> Dimensions:
    """Dimensions from ``--n/--m/--p/--h`` with ``--tau-p/--tau-h`` as fallbacks.

    ``p`` defaults to ``m`` and ``h`` to ``n`` (full shuffle).
    """
    n = args.n if n is None else n
    if n is None or args.m is None:
        raise UsageError("--n and --m are required")
    p = args.p
    if p is None:
        p = max(1, round(args.tau_p * n)) if args.tau_p is not None else args.m
    h = args.h
    if h is None:
        h = round(args.tau_h * n) if args.tau_h is not None else n
    try:
        return Dimensions(n, args.m, p, h)
    except (DomainError, ValueError) as e:
        raise UsageError(str(e)) from None


def resolve_noise(args, default_snr: float | None = None) -> NoiseSpec:
    if args.snr is not None and args.sigma is not None:
        raise UsageError("give at most one of --snr and --sigma")
    if args.sigma is not None:
        return NoiseSpec(sigma=args.sigma)
    if args.snr is not None:
        return NoiseSpec(snr=args.snr)
    if default_snr is None:
        raise UsageError("one of --snr or --sigma is required")
    return NoiseSpec(snr=default_snr)


def resolve_solver(args):
    return Exact() if args.solver == "exact" else MP()


def spectrum_for(args, p: int, m: int) -> theory.Spectrum:
    spec = args.spectrum
    if isinstance(spec, GaussianIID):
        B = build_signal(spec, p, m, child_rng(args.seed, CMD_IDS[args.command], 0))
        return theory.Spectrum.from_matrix(B)
    if isinstance(spec, (ScaledIdentity, Identity, BlockDiagonal)) and p != m:
        raise UsageError(f"{type(spec).__name__} spectrum needs p == m, got p={p}, m={m}")
    return theory.Spectrum(spectrum_values(spec, p, m))


# ------------------------------------------------------------------ output


def _cell(v):
    if isinstance(v, np.generic):
        v = v.item()
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else ("inf" if v > 0 else "-inf"))
    if isinstance(v, (list, tuple)):
        return ";".join(_cell(x) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    return v


def render(rows: list[dict], columns: list[str], fmt: str, config: dict, seed: int, timing_ms) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r.get(c)) for c in columns])
        return buf.getvalue()
    doc = {
        "config": _jsonable(config),
        "results": [_jsonable({c: r.get(c) for c in columns}) for r in rows],
        "timing_ms": timing_ms,
        "seed": seed,
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _config_dict(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in ("out", "format", "timing", "step_at", "corrupt_trace"):
            continue
        if not isinstance(v, (int, float, str, bool, list, type(None))):
            v = repr(v)
        out[k] = v
    return out


def progress(msg: str):
    print(msg, file=sys.stderr, flush=True)


# ---------------------------------------------------------------- commands


def cmd_predict(args) -> tuple[int, list[dict]]:
    mode = args.mode
    row = {"mode": mode, "formula": FORMULA_IDS[mode], "regime": "ok"}
    if mode in ("oracle", "gaussian"):
        _need(args, "n", "m")
        p = args.p if args.p is not None else args.m
        spec = spectrum_for(args, p, args.m)
        F = spec.shape_factor
        fn = theory.oracle_snr_threshold if mode == "oracle" else theory.oracle_snr_threshold_gaussian
        row.update(n=args.n, m=args.m, p=p, shape_factor=F)
        try:
            row["threshold"] = fn(args.n, args.m, F)
        except theory.NoFiniteThreshold as e:
            raise UsageError(str(e)) from None
    elif mode == "nonoracle":
        dims = resolve_dims(args)
        if dims.h < 2:
            raise UsageError("nonoracle prediction needs h >= 2 permuted rows")
        spec = spectrum_for(args, dims.p, dims.m)
        t = theory.nonoracle_snr_threshold(dims.n, dims.m, dims.p, dims.h, spec)
        row.update(
            n=dims.n, m=dims.m, p=dims.p, h=dims.h, tau_p=dims.tau_p, tau_h=dims.tau_h,
            shape_factor=spec.shape_factor, threshold=math.inf if t is None else t,
            regime="ok" if t is not None else "no-crossing",
        )
    elif mode == "nonoracle-closed":
        _need(args, "n", "tau-p", "tau-h")
        try:
            cf = theory.nonoracle_snr_closed_form(args.n, args.tau_p, args.tau_h)
        except ValueError as e:
            raise UsageError(str(e)) from None
        row.update(n=args.n, tau_p=args.tau_p, tau_h=args.tau_h, threshold=cf.snr, regime=cf.regime)
    else:
        _need(args, "n", "tau-p")
        try:
            t = theory.tau_h_singularity(args.n, args.tau_p)
        except ValueError as e:
            raise UsageError(str(e)) from None
        row.update(n=args.n, tau_p=args.tau_p, tau_h=t, threshold=t, regime="ok" if t is not None else "none")
    return EXIT_OK, [row]


def _threshold_config(args) -> ThresholdSearchConfig:
    try:
        return ThresholdSearchConfig(
            args.lower, args.upper, args.epsilon, args.trials, args.error_threshold, args.repeats
        )
    except ValueError as e:
        raise UsageError(str(e)) from None


def cmd_find_threshold(args) -> tuple[int, list[dict]]:
    cfg = _threshold_config(args)
    cid = CMD_IDS["find-threshold"]
    if args.step_at is not None:
        step = args.step_at

        def experiment(snr, key):
            return 0.0 if snr >= step else 1.0

    else:
        dims = resolve_dims(args)
        if isinstance(args.spectrum, (ScaledIdentity, Identity, BlockDiagonal)) and dims.p != dims.m:
            raise UsageError("this spectrum needs p == m")
        inner = snr_experiment(
            dims, args.spectrum, DesignDistribution(args.design), args.mode, resolve_solver(args),
            args.trials, args.seed, args.threads,
        )

        def experiment(snr, key):
            err = inner(snr, (cid,) + tuple(key))
            progress(f"repeat {key[0]} probe {key[1]}: snr={snr:.6g} error_rate={err:.3f}")
            return err

    est = find_threshold(cfg, experiment)
    row = {
        "status": "ok" if est.ok else "bracket_failure",
        "mean": est.mean,
        "std": est.std,
        "per_repeat": est.per_repeat,
        "probes_used": est.probes_used,
        "probes_per_repeat": est.probes_per_repeat,
        "repeats": cfg.repeats,
        "trials": cfg.trials_per_probe,
        "lower": cfg.lower,
        "upper": cfg.upper,
        "epsilon": cfg.epsilon,
        "message": est.bracket_error,
    }
    if not est.ok:
        progress(f"bracket failure: {est.bracket_error}")
    return (EXIT_OK if est.ok else EXIT_FAILED), [row]


def cmd_sweep(args) -> tuple[int, list[dict]]:
    if not args.grid:
        raise UsageError("--grid is empty")
    cid = CMD_IDS["sweep"]
    solver = resolve_solver(args)
    design = DesignDistribution(args.design)
    rows = []
    for k, value in enumerate(args.grid):
        if args.var == "snr":
            if not value > 0:
                raise UsageError(f"snr grid values must be positive, got {value}")
            dims = resolve_dims(args)
            noise = NoiseSpec(snr=value)
        elif args.var == "tau_h":
            if not 0 < value <= 1:
                raise UsageError(f"tau_h grid values must lie in (0, 1], got {value}")
            _need(args, "n")
            h = max(2, round(value * args.n))
            dims = resolve_dims(argparse.Namespace(**{**vars(args), "h": h}))
            noise = resolve_noise(args, math.inf)
        else:
            n = int(round(value))
            dims = resolve_dims(args, n)
            noise = resolve_noise(args, math.inf)
        if isinstance(args.spectrum, (ScaledIdentity, Identity, BlockDiagonal)) and dims.p != dims.m:
            raise UsageError("this spectrum needs p == m")
        err = full_recovery_error_rate(
            dims, args.spectrum, noise, design, args.mode, solver, args.trials, args.seed, (cid, k), args.threads
        )
        progress(f"{args.var}={value:g}: error_rate={err:.3f}")
        rows.append({"variable": args.var, "value": value, "error_rate": err, "trials": args.trials, "seed": args.seed})
    return EXIT_OK, rows


def _report_row(r: mcoracle.MomentCheckReport, note: str | None = None) -> dict:
    d = r.as_dict()
    d["note"] = note
    return d


def cmd_verify(args) -> tuple[int, list[dict]]:
    if args.trials < 1000:
        raise UsageError("--trials must be at least 1000")
    cid = CMD_IDS["verify"]
    suite = args.suite
    parts = {
        "default": ("identities", "oracle", "tables"),
        "all": ("identities", "oracle", "tables", "nonoracle"),
    }.get(suite, (suite,))
    rows = []
    if "identities" in parts:
        ps = [args.p] if args.p is not None else [2, 5, 10]
        for p in ps:
            if p < 1:
                raise UsageError("--p must be positive")
            rng = child_rng(args.seed, cid, 0, p)
            reps = mcoracle.gaussian_identity_suite(p, None, args.trials, rng, z_max=args.z_max, corrupt=args.corrupt_trace)
            reps += mcoracle.norm_power_checks(p, args.trials, rng, z_max=args.z_max)
            rows += [_report_row(r, f"p={p}") for r in reps]
            progress(f"identities p={p} done")
    if "oracle" in parts:
        for k in range(2):
            rng = child_rng(args.seed, cid, 1, k)
            spec = theory.Spectrum(rng.uniform(0.5, 1.5, size=5 + 5 * k))
            sigma = float(rng.uniform(0.5, 1.5))
            reps = mcoracle.oracle_moment_check(spec, sigma, max(args.trials // 2, 1000), rng, z_max=args.z_max)
            rows += [_report_row(r, f"spectrum {k} rank={spec.rank} sigma={sigma:.4g}") for r in reps]
        progress("oracle moments done")
    if "tables" in parts:
        reps = reference.table_checks()
        rows += [_report_row(r, reference.TABLE2_NOTE if r.name.startswith("table2") else None) for r in reps]
    if "nonoracle" in parts:
        rng = child_rng(args.seed, cid, 3)
        n = args.n if args.n is not None else 300
        m = args.m if args.m is not None else 10
        p = args.p if args.p is not None else n // 10
        h = args.h if args.h is not None else n // 2
        sigma = args.sigma if args.sigma is not None else 1.0
        trials = min(args.trials, 20_000)
        reps = mcoracle.xi_term_moments_mc(n, m, p, h, mcoracle.identity_spectrum_signal(m), sigma, trials, rng)
        rows += [_report_row(r, f"n={n} m={m} p={p} h={h} sigma={sigma:g}") for r in reps]
        progress("non-oracle moments done")
    ok = all(r["pass"] for r in rows)
    return (EXIT_OK if ok else EXIT_FAILED), rows


def cmd_de(args) -> tuple[int, list[dict]]:
    if args.population < 1 or args.iters < 0 or args.probes < 1:
        raise UsageError("--population and --probes must be positive and --iters non-negative")
    if args.population < 1000:
        progress(f"warning: population {args.population} is below 1000; estimates will be coarse")
    cid = CMD_IDS["de"]
    _need(args, "n", "m")
    if args.mode == ORACLE:
        p = args.p if args.p is not None else args.m
        spec = spectrum_for(args, p, args.m)
        noise = resolve_noise(args)
        sigma = spec.sigma_for_snr(args.m, noise.snr) if noise.sigma is None else noise.sigma
        sampler = evolution.OracleEdges(spec, sigma)
    else:
        dims = resolve_dims(args)
        noise = resolve_noise(args)
        B = build_signal(args.spectrum, dims.p, dims.m, child_rng(args.seed, cid, 0))
        sigma = noise.resolve_sigma(B, dims.m)
        sampler = evolution.NonOracleEmpirical(dims, args.spectrum, sigma, DesignDistribution(args.design))
    drift = None
    if args.drift:
        xi = sampler.sample_xi(args.probes, child_rng(args.seed, cid, 1))
        drift = evolution.empirical_drift(xi, args.n)
    pop = evolution.Population.zeros(args.population)
    rows = []

    def emit(t, pop):
        prob = evolution.recovery_probability(pop, sampler, args.probes, child_rng(args.seed, cid, 3, t))
        rows.append({"iter": t, "mean_h": pop.mean(), "recovery_probability": prob, "drift": drift})
        progress(f"iter {t}: mean_h={pop.mean():.6g} recovery_probability={prob:.4f}")

    emit(0, pop)
    for t in range(1, args.iters + 1):
        pop = evolution.de_step(pop, sampler, args.n, child_rng(args.seed, cid, 2, t), args.recursion)
        emit(t, pop)
    return EXIT_OK, rows


COMMANDS = {
    "predict": (cmd_predict, PREDICT_COLUMNS),
    "find-threshold": (cmd_find_threshold, THRESHOLD_COLUMNS),
    "sweep": (cmd_sweep, SWEEP_COLUMNS),
    "verify": (cmd_verify, VERIFY_COLUMNS),
    "de": (cmd_de, DE_COLUMNS),
}


def validate(args):
    if args.seed < 0 or args.seed >= 2**64:
        raise UsageError("--seed must be a 64-bit unsigned integer")
    if args.threads < 1:
        raise UsageError("--threads must be positive")
    _check_positive(args, "n", "m", "p", "tau-p", "tau-h")
    if args.sigma is not None and args.sigma < 0:
        raise UsageError("--sigma must be non-negative")
    if args.snr is not None and not args.snr > 0:
        raise UsageError("--snr must be positive")
    for name in ("trials", "repeats"):
        v = getattr(args, name, None)
        if v is not None and v < 1:
            raise UsageError(f"--{name} must be positive")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    fn, columns = COMMANDS[args.command]
    start = time.perf_counter()
    try:
        validate(args)
        status, rows = fn(args)
    except (UsageError, ValueError, theory.NoFiniteThreshold) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    elapsed = (time.perf_counter() - start) * 1000
    progress(f"{args.command} finished in {elapsed:.0f} ms")
    text = render(rows, columns, args.format, _config_dict(args), args.seed, round(elapsed, 3) if args.timing else None)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
