"""Reproducible command-line front end.

One subcommand per experiment; JSON config in, CSV artifacts plus a JSON
summary out.  Exit codes: 0 success, 1 an expectation gate failed, 2
usage or configuration error.  All randomness flows from ``--seed``
(derived streams are keyed by purpose), so a config reruns to
byte-identical artifacts.  ``MEMLOSS_THREADS`` caps the worker pool used
for independent per-k jobs.

Expectation gates (``--expect-slope``/``--tol`` and friends) live here,
not in the library, so library results stay assertion-free.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import csvio
from . import sequences as seqs
from .coupling import (
    build_model,
    check_stail_bound,
    family_from_tables,
    make_constants,
    s_tail_dp,
    s_tail_mc,
    synthetic_poly_family,
)
from .errors import ConfigError, FormatError, MemlossError
from .maps import cui, grossmann_horner, lsv, pikovsky, state_interval
from .partitions import (
    TailTable,
    default_fit_window,
    fit_power_law,
    mc_zscores,
    return_time_tail,
    return_time_tail_mc,
)
from .sequences import check_frequency, load_sequence, param_at, theta_profile
from .transfer import make_density, memory_loss_curve, mixing_mass, evolve

_FAMILIES = {"lsv": lsv, "cui": cui, "pikovsky": pikovsky, "gh": grossmann_horner}


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MEMLOSS_THREADS", "1")))
    except ValueError:
        return 1


def _sequence_from_args(args) -> seqs.ParamSequence:
    if getattr(args, "config", None):
        return load_sequence(args.config)
    if not getattr(args, "family", None):
        raise ConfigError("either --config or --family is required")
    fam = args.family
    if fam == "lsv":
        return seqs.constant(lsv(args.gamma))
    if fam == "cui":
        if args.beta is None:
            raise ConfigError("--beta is required for the cui family")
        return seqs.constant(cui(args.gamma, args.beta))
    if fam == "pikovsky":
        return seqs.constant(pikovsky(args.gamma))
    return seqs.constant(grossmann_horner())


def _write_summary(path: str, summary: dict) -> None:
    text = json.dumps(summary, sort_keys=True, indent=2) + "\n"
    csvio._atomic_write(path, text)


def _fit_metrics(values: np.ndarray, fit_lo, fit_hi) -> dict:
    table = TailTable(values=values, label="mc")
    n_avail = len(values) - 1
    lo, hi = default_fit_window(n_avail)
    if fit_lo is not None:
        lo = fit_lo
    if fit_hi is not None:
        hi = fit_hi
    fit = fit_power_law(table, lo, hi)
    return {
        "fit_lo": int(lo),
        "fit_hi": int(hi),
        "slope": fit.slope,
        "intercept": fit.intercept,
        "r_squared": fit.r_squared,
    }


def _gate(summary: dict, name: str, ok: bool, detail: dict) -> None:
    summary.setdefault("gates", []).append({"name": name, "pass": bool(ok), **detail})


def _summary_pass(summary: dict) -> bool:
    return all(g["pass"] for g in summary.get("gates", []))


# -- subcommand implementations -------------------------------------------------------


def _cmd_tails(args) -> int:
    seq = _sequence_from_args(args)
    base = {"mk": "m_k", "lebesgue": "lebesgue"}[args.base]
    ks = [int(x) for x in str(args.k).split(",")]
    out_paths = {}

    def job(k: int):
        exact = return_time_tail(seq, k, args.n_max, base=base)
        mc = None
        if args.mc_samples:
            mc = return_time_tail_mc(seq, k, args.n_max, args.mc_samples, args.seed, base=base)
        return k, exact, mc

    workers = min(_threads(), len(ks))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, ks))
    else:
        results = [job(k) for k in ks]
    summary = {"command": "tails", "base": args.base, "n_max": args.n_max, "k": ks}
    for k, exact, mc in sorted(results):
        path = os.path.join(args.out, f"tails_k{k}_{args.base}.csv")
        csvio.write_tail_csv(path, exact)
        out_paths[k] = path
        _, cols = csvio.read_csv(path)
        metrics = _fit_metrics(cols["value"], args.fit_lo, args.fit_hi)
        summary[f"k{k}"] = metrics
        if mc is not None:
            mc_path = os.path.join(args.out, f"tails_k{k}_{args.base}_mc.csv")
            csvio.write_tail_csv(mc_path, mc)
            z = mc_zscores(exact, mc)
            summary[f"k{k}"]["max_mc_z"] = float(np.nanmax(np.abs(z)))
        if args.expect_slope is not None:
            ok = abs(metrics["slope"] - args.expect_slope) <= args.tol
            _gate(summary, f"slope_k{k}", ok, {"expected": args.expect_slope, "tol": args.tol, "actual": metrics["slope"]})
    summary["artifacts"] = [os.path.basename(out_paths[k]) for k in ks]
    summary["pass"] = _summary_pass(summary)
    _write_summary(os.path.join(args.out, "tails_summary.json"), summary)
    return 0 if summary["pass"] else 1


def _cmd_memloss(args) -> int:
    seq = _sequence_from_args(args)
    lo, hi = state_interval(param_at(seq, 1))
    f = make_density("holder", args.grid, (lo, hi), profile=1)
    if args.pair == "holder-holder":
        g = make_density("holder", args.grid, (lo, hi), profile=2)
    else:
        g = make_density("cone", args.grid, (lo, hi), beta=args.cone_beta)
    curve = memory_loss_curve(seq, f, g, args.n_max)
    path = os.path.join(args.out, "memloss.csv")
    csvio.write_columns(path, "memloss", [np.arange(len(curve.values), dtype=float), curve.values])
    _, cols = csvio.read_csv(path)
    summary = {
        "command": "memloss",
        "pair": args.pair,
        "grid": args.grid,
        "n_max": args.n_max,
        "artifacts": [os.path.basename(path)],
    }
    summary["metrics"] = _fit_metrics(cols["tv"], args.fit_lo, args.fit_hi)
    if args.expect_slope is not None:
        ok = abs(summary["metrics"]["slope"] - args.expect_slope) <= args.tol
        _gate(summary, "slope", ok, {"expected": args.expect_slope, "tol": args.tol, "actual": summary["metrics"]["slope"]})
    summary["pass"] = _summary_pass(summary)
    _write_summary(os.path.join(args.out, "memloss_summary.json"), summary)
    return 0 if summary["pass"] else 1


def _cmd_mixing(args) -> int:
    seq = _sequence_from_args(args)
    table = mixing_mass(seq, args.k, args.n_max, n_cells=args.grid)
    path = os.path.join(args.out, "mixing.csv")
    csvio.write_columns(path, "mixing", [np.arange(len(table.values), dtype=float), table.values])
    _, cols = csvio.read_csv(path)
    floor = float(np.min(cols["mass"][2:])) if len(cols["mass"]) > 2 else float("nan")
    summary = {
        "command": "mixing",
        "k": args.k,
        "n_max": args.n_max,
        "grid": args.grid,
        "metrics": {"floor_from_2": floor, "max": float(np.max(cols["mass"])), "worst_snap": table.notes["worst_snap"]},
        "artifacts": [os.path.basename(path)],
    }
    if args.expect_floor is not None:
        _gate(summary, "floor", floor >= args.expect_floor, {"expected": args.expect_floor, "actual": floor})
    _gate(summary, "bounded_by_one", bool(np.max(cols["mass"]) <= 1.0 + 1e-8), {"actual": float(np.max(cols["mass"]))})
    summary["pass"] = _summary_pass(summary)
    _write_summary(os.path.join(args.out, "mixing_summary.json"), summary)
    return 0 if summary["pass"] else 1


def _cmd_evolve(args) -> int:
    seq = _sequence_from_args(args)
    lo, hi = state_interval(param_at(seq, 1))
    f = make_density(args.density, args.grid, (lo, hi), profile=args.profile, beta=args.cone_beta)
    out = evolve(seq, f, args.steps)
    path = os.path.join(args.out, "density.csv")
    csvio.write_columns(path, "density", [out.midpoints(), out.values])
    summary = {
        "command": "evolve",
        "steps": args.steps,
        "grid": args.grid,
        "metrics": {"mass": out.mass, "sup": float(np.max(out.values))},
        "artifacts": [os.path.basename(path)],
    }
    _gate(summary, "mass_conserved", abs(out.mass - 1.0) <= 1e-8, {"actual": out.mass})
    summary["pass"] = _summary_pass(summary)
    _write_summary(os.path.join(args.out, "evolve_summary.json"), summary)
    return 0 if summary["pass"] else 1


def _cmd_frequency(args) -> int:
    seq = _sequence_from_args(args)
    window = check_frequency(seq, args.threshold, args.n_max)
    prof = theta_profile(seq, args.threshold, window.a, args.n_max)
    good = np.cumsum(seqs.gammas(seq, 1, args.n_max) <= args.threshold) / np.arange(1, args.n_max + 1)
    path = os.path.join(args.out, "frequency.csv")
    csvio.write_columns(path, "frequency", [np.arange(1, args.n_max + 1, dtype=float), good])
    summary = {
        "command": "frequency",
        "threshold": args.threshold,
        "n_max": args.n_max,
        "metrics": {
            "a": window.a,
            "kappa": window.kappa,
            "N": window.N,
            "theta_sup_tail_last": float(prof.values[-1]),
        },
        "artifacts": [os.path.basename(path)],
    }
    if args.expect_a is not None:
        ok = abs(window.a - args.expect_a) <= args.tol
        _gate(summary, "a", ok, {"expected": args.expect_a, "tol": args.tol, "actual": window.a})
    summary["pass"] = _summary_pass(summary)
    _write_summary(os.path.join(args.out, "frequency_summary.json"), summary)
    return 0 if summary["pass"] else 1


_MODEL_KEYS = {
    "theta", "n0", "K", "lambda", "diam", "delta0",
    "beta", "beta_prime", "C_beta", "C_beta_prime", "Theta", "tails", "k", "horizon",
}


def _load_model_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    except OSError as e:
        raise ConfigError(str(e)) from None
    if not isinstance(cfg, dict):
        raise ConfigError("model config must be a JSON object")
    unknown = set(cfg) - _MODEL_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in model config: {sorted(unknown)}")
    return cfg


def _model_from_config(cfg: dict, horizon: int):
    constants = make_constants(
        theta=cfg.get("theta", 0.25),
        n0=cfg.get("n0", 1),
        K=cfg.get("K", 0.5),
        lam=cfg.get("lambda", 2.0),
        diam_x=cfg.get("diam", 1.0),
        delta0=cfg.get("delta0", 0.5),
    )
    beta = cfg.get("beta", 2.0)
    beta_prime = cfg.get("beta_prime", beta)
    spec = cfg.get("tails", f"synthetic:poly:{beta}")
    if spec.startswith("synthetic:poly:"):
        b = float(spec.split(":")[2])
        fam = synthetic_poly_family(
            b, beta_prime=beta_prime, k=cfg.get("k", 1),
            n_rows=horizon + 10, depth=2 * horizon + 20,
        )
    elif spec.startswith("file:"):
        kind, cols = csvio.read_csv(spec[5:])
        if kind != "tails":
            raise ConfigError(f"{spec}: expected a tails CSV")
        vals = cols["value"]
        table = TailTable(values=np.minimum.accumulate(np.minimum(vals, 1.0)), label="r")
        fam = family_from_tables(
            cfg.get("k", 1), table, table,
            beta=beta, beta_prime=beta_prime,
            c_beta=cfg.get("C_beta", 1.0), c_beta_prime=cfg.get("C_beta_prime", 1.0),
            theta=cfg.get("Theta", 0.0),
        )
    else:
        raise ConfigError(f"unknown tails spec {spec!r}")
    return build_model(fam, constants, horizon), beta_prime


def _cmd_coupling(args) -> int:
    cfg = _load_model_config(args.model) if args.model else {}
    if args.theta is not None:
        cfg["theta"] = args.theta
    if args.n0 is not None:
        cfg["n0"] = args.n0
    horizon = cfg.get("horizon", args.n_max + 2)
    if horizon < args.n_max:
        raise ConfigError(f"horizon {horizon} below n_max {args.n_max}")
    model, beta_prime = _model_from_config(cfg, horizon)
    dp = s_tail_dp(model, args.n_max)
    mc = s_tail_mc(model, args.n_max, args.samples, args.seed)
    theta_star = float(np.max(model.family.theta_seq, initial=0.0))
    report = check_stail_bound(dp, beta_prime, theta_star, model.family.k)
    ratios = np.concatenate([[np.nan], report.ratios])
    path = os.path.join(args.out, "coupling.csv")
    n = np.arange(len(dp.values), dtype=float)
    csvio.write_columns(path, "coupling", [n, dp.values, mc.values, mc.stderr, ratios])
    z = mc_zscores(dp, mc)
    summary = {
        "command": "coupling",
        "n_max": args.n_max,
        "samples": args.samples,
        "metrics": {
            "sup_ratio": report.sup_ratio,
            "argmax_n": report.argmax_n,
            "beta_prime": beta_prime,
            "max_mc_z": float(np.nanmax(np.abs(z))),
            "dp_remainder": dp.notes["remainder"],
        },
        "artifacts": [os.path.basename(path)],
    }
    _gate(summary, "dp_mc_agree", summary["metrics"]["max_mc_z"] <= 4.0, {"actual": summary["metrics"]["max_mc_z"]})
    if args.check_plateau:
        _gate(summary, "plateau", report.plateau(), {"argmax_n": report.argmax_n, "n_max": args.n_max})
    summary["pass"] = _summary_pass(summary)
    _write_summary(os.path.join(args.out, "coupling_summary.json"), summary)
    return 0 if summary["pass"] else 1


def _cmd_summarize(args) -> int:
    out = {}
    for path in args.paths:
        kind, cols = csvio.read_csv(path)
        entry = {"kind": kind}
        if kind == "tails":
            entry.update(_fit_metrics(cols["value"], args.fit_lo, args.fit_hi))
        elif kind == "memloss":
            entry.update(_fit_metrics(cols["tv"], args.fit_lo, args.fit_hi))
        elif kind == "mixing":
            entry["floor_from_2"] = float(np.min(cols["mass"][2:]))
            entry["max"] = float(np.max(cols["mass"]))
        elif kind == "coupling":
            entry["max_ratio"] = float(np.nanmax(cols["ratio"]))
            entry["argmax_n"] = int(np.nanargmax(cols["ratio"]))
        elif kind == "frequency":
            entry["last_value"] = float(cols["value"][-1])
        out[path] = entry
    text = json.dumps(out, sort_keys=True, indent=2)
    print(text)
    if args.out_json:
        csvio._atomic_write(args.out_json, text + "\n")
    return 0


# -- parser ------------------------------------------------------------------------------


def _add_sequence_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--family", choices=sorted(_FAMILIES), help="stationary family")
    p.add_argument("--gamma", type=float, default=0.5, help="intermittency parameter")
    p.add_argument("--beta", type=float, default=None, help="cui right-branch exponent")
    p.add_argument("--config", help="sequence config JSON (overrides --family)")


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fit-lo", type=int, default=None)
    p.add_argument("--fit-hi", type=int, default=None)
    p.add_argument("--expect-slope", type=float, default=None)
    p.add_argument("--tol", type=float, default=0.4)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="memloss", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tails", help="exact return-time tails (optionally with an MC cross-check)")
    _add_sequence_flags(p)
    _add_fit_flags(p)
    p.add_argument("--k", default="1", help="base index, or comma list for parallel jobs")
    p.add_argument("--n-max", type=int, default=1000)
    p.add_argument("--base", choices=["mk", "lebesgue"], default="mk")
    p.add_argument("--mc-samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_tails)

    p = sub.add_parser("memloss", help="total-variation memory loss between two seed densities")
    _add_sequence_flags(p)
    _add_fit_flags(p)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--grid", type=int, default=2**15)
    p.add_argument("--pair", choices=["holder-holder", "holder-cone"], default="holder-holder")
    p.add_argument("--cone-beta", type=float, default=0.5)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_memloss)

    p = sub.add_parser("mixing", help="pushforward mass on the moving reference set")
    _add_sequence_flags(p)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--n-max", type=int, default=200)
    p.add_argument("--grid", type=int, default=2**12)
    p.add_argument("--expect-floor", type=float, default=None)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_mixing)

    p = sub.add_parser("evolve", help="evolve a seed density and dump it")
    _add_sequence_flags(p)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--grid", type=int, default=2**12)
    p.add_argument("--density", choices=["uniform", "holder", "cone"], default="holder")
    p.add_argument("--profile", type=int, default=1)
    p.add_argument("--cone-beta", type=float, default=0.5)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_evolve)

    p = sub.add_parser("frequency", help="good-map frequency window and deviation profile")
    _add_sequence_flags(p)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--n-max", type=int, default=10_000)
    p.add_argument("--expect-a", type=float, default=None)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_frequency)

    p = sub.add_parser("coupling", help="exact and Monte Carlo tails of the coupled random sum")
    p.add_argument("--model", help="model config JSON")
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--n0", type=int, default=None)
    p.add_argument("--n-max", type=int, default=300)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--check-plateau", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(func=_cmd_coupling)

    p = sub.add_parser("summarize", help="recompute metrics from CSV artifacts alone")
    p.add_argument("paths", nargs="+")
    p.add_argument("--fit-lo", type=int, default=None)
    p.add_argument("--fit-hi", type=int, default=None)
    p.add_argument("--out-json", default=None)
    p.set_defaults(func=_cmd_summarize)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else 2
    try:
        return args.func(args)
    except (ConfigError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except MemlossError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main(argv=None) -> int:
    return run_cli(argv)
