"""Command-line entry point: ``fedsupport <subcommand> [flags]``.

Exit codes: 0 success, 1 configuration error, 2 infeasible lambda window,
3 I/O or protocol error, 4 round failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .aggregate import RecoveryReport, read_support_file, score_against, write_report_csv, write_support_file
from .errors import ConfigurationError, InfeasibleWindowError, ProtocolError, RoundFailedError
from .experiments import SweepSpec, default_c_grid, run_clients_sweep, run_samples_sweep
from .fednet import TIMEOUT_ENV, RoundConfig, parse_address, run_client_process, serve_round, simulate_round
from .lasso import centralized_support
from .synthdata import (
    Family,
    GroundTruth,
    Regime,
    load_client_csv,
    make_ground_truth,
    make_profiles,
    read_manifest,
    sample_client_dataset,
    save_client_csv,
    write_manifest,
)
from .window import (
    AdversaryConfig,
    Behavior,
    DeltaPolicy,
    LambdaWindow,
    choose_lambda,
    min_samples,
    window_correlated,
    window_independent,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INFEASIBLE = 2
EXIT_IO = 3
EXIT_ROUND = 4

DEFAULT_TIMEOUT = 10.0


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage problems are configuration errors (exit 1), not argparse's exit 2
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- output


class Output:
    """Writes the resolved-config header, then text or CSV records."""

    def __init__(self, fmt: str, stream=None):
        self.fmt = fmt
        self.stream = stream or sys.stdout

    def header(self, command: str, config: dict):
        self.stream.write(f"# fedsupport {__version__} {command}\n")
        for k, v in config.items():
            self.stream.write(f"# {k} = {v}\n")

    def record(self, pairs: dict):
        if self.fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(pairs.keys())
            w.writerow(pairs.values())
            self.stream.write(buf.getvalue())
        else:
            width = max(len(k) for k in pairs)
            for k, v in pairs.items():
                self.stream.write(f"{k.ljust(width)}  {v}\n")

    def line(self, text: str):
        self.stream.write(text + "\n")


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, (set, frozenset)):
        return " ".join(str(j + 1) for j in sorted(v)) or "-"
    return str(v)


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _out_dir(args) -> Path:
    path = Path(args.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


# ---------------------------------------------------------------- instances


def _add_instance_flags(p):
    g = p.add_argument_group("instance")
    g.add_argument("--manifest", help="load ground truth and profiles from a manifest file")
    g.add_argument("--d", type=int, default=200, help="dimension (default 200)")
    g.add_argument("--s", type=int, default=3, help="support size (default 3)")
    g.add_argument("--w-star", help="explicit comma-separated w* (overrides --d/--s)")
    g.add_argument("--g", type=int, default=11, help="number of clients (default 11)")
    g.add_argument("--n", type=int, default=500, help="samples per client (default 500)")
    g.add_argument("--regime", choices=[r.value for r in Regime], default="independent")
    g.add_argument("--rho", type=_float_list, default=[1.0], help="rho, or lo,hi range (default 1)")
    g.add_argument("--eta", type=_float_list, default=[0.5], help="eta, or lo,hi range (default 0.5)")
    g.add_argument("--signs", choices=["random", "positive"], default="positive")
    g.add_argument("--magnitude", type=_float_list, default=[0.5, 1.5], help="lo,hi of |w*_j| (default 0.5,1.5)")
    g.add_argument("--families", default=",".join(f.value for f in Family), help="comma-separated families")


def _range(values: list[float], name: str) -> tuple[float, float]:
    if len(values) == 1:
        return values[0], values[0]
    if len(values) == 2:
        return values[0], values[1]
    raise ConfigurationError(f"--{name} takes one value or lo,hi")


def _build_instance(args):
    if args.manifest:
        gt, profiles, _ = read_manifest(args.manifest)
        return gt, profiles
    if args.w_star:
        gt = GroundTruth.from_vector(_float_list(args.w_star))
    else:
        gt = make_ground_truth(args.d, args.s, _range(args.magnitude, "magnitude"), seed=args.seed, signs=args.signs)
    profiles = make_profiles(
        gt,
        args.g,
        args.n,
        regime=args.regime,
        rho_range=_range(args.rho, "rho"),
        eta_range=_range(args.eta, "eta"),
        families=[Family(f) for f in args.families.split(",")],
        master_seed=args.seed,
    )
    return gt, profiles


def _add_delta_flags(p):
    p.add_argument("--delta", type=float, default=None, help="delta value, or K for the scaled modes")
    p.add_argument(
        "--delta-mode",
        choices=["raw", "independent_scaled", "correlated_scaled"],
        default="raw",
        help="how --delta is interpreted (default raw)",
    )


def _policy(args, regime: Regime) -> DeltaPolicy:
    value = args.delta
    if value is None:
        value = 0.01 if regime is Regime.INDEPENDENT else 0.001
    return DeltaPolicy(args.delta_mode, value)


def _window(gt, profiles, policy) -> LambdaWindow:
    regimes = {p.covariance.regime for p in profiles}
    if regimes == {Regime.INDEPENDENT}:
        return window_independent(gt, profiles, policy)
    return window_correlated(gt, profiles, policy)


def _instance_regime(profiles) -> Regime:
    return Regime.INDEPENDENT if all(p.covariance.regime is Regime.INDEPENDENT for p in profiles) else Regime.CORRELATED


# ---------------------------------------------------------------- commands


def cmd_gen(args, out: Output) -> int:
    gt, profiles = _build_instance(args)
    root = _out_dir(args)
    out.header("gen", {"d": gt.d, "s": gt.s, "g": len(profiles), "regime": args.regime, "seed": args.seed, "out_dir": root})
    for p in profiles:
        save_client_csv(sample_client_dataset(gt, p), root)
    write_manifest(root / "manifest.txt", gt, profiles, args.seed)
    write_support_file(gt.support, root / "support_true.txt")
    out.record({"clients": len(profiles), "manifest": root / "manifest.txt", "support": _fmt(gt.support)})
    return EXIT_OK


def cmd_lambda(args, out: Output) -> int:
    gt, profiles = _build_instance(args)
    regime = _instance_regime(profiles)
    policy = _policy(args, regime)
    delta = policy.resolve(gt.s, regime)
    window = _window(gt, profiles, policy)
    out.header(
        "lambda",
        {"d": gt.d, "s": gt.s, "g": len(profiles), "regime": regime.value, "delta_mode": policy.mode, "delta_arg": policy.value, "beta": args.beta},
    )
    lo_client, lo_coord = window.lo_binding
    hi_client, hi_coord = window.hi_binding
    pairs = {
        "lambda_lo": _fmt(window.lo),
        "lambda_hi": _fmt(window.hi),
        "feasible": str(window.feasible).lower(),
        "lo_binding_client": lo_client,
        "lo_binding_coord": "-" if lo_coord is None else lo_coord + 1,
        "hi_binding_client": hi_client,
        "hi_binding_coord": "-" if hi_coord is None else hi_coord + 1,
        "delta": _fmt(delta),
        "min_samples": min_samples(gt.s, policy, args.beta, regime),
    }
    if window.feasible:
        pairs["midpoint"] = _fmt(choose_lambda(window, "midpoint"))
    if args.kv:
        for k, v in pairs.items():
            out.line(f"{k}={v}")
    else:
        out.record(pairs)
    return EXIT_OK if window.feasible else EXIT_INFEASIBLE


def _round_config(args, g: int) -> RoundConfig:
    return RoundConfig(
        expected_clients=g,
        timeout=_timeout(args),
        adversary=AdversaryConfig(args.beta, Behavior(args.behavior)),
        straggler_fraction=args.stragglers,
        failure_fraction=args.failures,
    )


def _report_pairs(report: RecoveryReport, truth=None) -> dict:
    pairs = {"g_used": report.g_used, "support": _fmt(report.support), "support_size": len(report.support)}
    if truth is not None:
        pairs["exact"] = str(report.exact(truth)).lower()
    if report.recall is not None:
        pairs.update(recall=_fmt(report.recall), precision=_fmt(report.precision), f1=_fmt(report.f1))
    return pairs


def cmd_simulate(args, out: Output) -> int:
    gt, profiles = _build_instance(args)
    regime = _instance_regime(profiles)
    if args.lam is None:
        lam = choose_lambda(_window(gt, profiles, _policy(args, regime)), "midpoint")
    else:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            lam = choose_lambda(_window(gt, profiles, _policy(args, regime)), args.lam)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    cfg = _round_config(args, len(profiles))
    out.header(
        "simulate",
        {"d": gt.d, "s": gt.s, "g": len(profiles), "regime": regime.value, "lambda": _fmt(lam), "beta": args.beta, "behavior": args.behavior, "seed": args.seed},
    )
    report = score_against(simulate_round(gt, profiles, lam, cfg, args.seed), gt.support)
    root = _out_dir(args)
    write_report_csv(report, root / "report.csv")
    write_support_file(report.support, root / "support.txt")
    out.record(_report_pairs(report, gt.support))
    return EXIT_OK


def _timeout(args) -> float:
    if getattr(args, "timeout", None) is not None:
        return args.timeout
    env = os.environ.get(TIMEOUT_ENV)
    if env:
        try:
            return float(env)
        except ValueError:
            raise ConfigurationError(f"{TIMEOUT_ENV}={env!r} is not a number") from None
    return DEFAULT_TIMEOUT


def cmd_serve(args, out: Output) -> int:
    parse_address(args.bind)
    cfg = _round_config(args, args.expect)
    out.header("serve", {"bind": args.bind, "expect": args.expect, "timeout": cfg.timeout, "d": args.dim or "from first vote"})
    sys.stdout.flush()

    def ready(address):
        out.line(f"listening {address[0]}:{address[1]}")
        out.stream.flush()

    report = serve_round(cfg, args.bind, d=args.dim, on_ready=ready)
    if args.truth:
        report = score_against(report, read_support_file(args.truth))
    root = _out_dir(args)
    write_report_csv(report, root / "report.csv")
    write_support_file(report.support, root / "support.txt")
    out.record(_report_pairs(report))
    return EXIT_OK


def cmd_client(args, out: Output) -> int:
    out.header("client", {"server": args.server, "data": args.data, "lambda": args.lam, "id": args.id, "retries": args.retries})
    status = run_client_process(args.server, args.data, args.lam, args.id, retries=args.retries, timeout=_timeout(args))
    out.record({"status": status.name.lower()})
    return EXIT_OK


def _pooled(paths: list[str]) -> tuple[np.ndarray, np.ndarray]:
    files = []
    for p in paths:
        p = Path(p)
        files.extend(sorted(p.glob("client_*.csv")) if p.is_dir() else [p])
    if not files:
        raise OSError(f"no CSV files found in {paths}")
    parts = [load_client_csv(f) for f in files]
    return np.vstack([x for x, _ in parts]), np.concatenate([y for _, y in parts])


def cmd_lasso(args, out: Output) -> int:
    X, y = _pooled(args.data)
    out.header("lasso", {"rows": X.shape[0], "d": X.shape[1], "penalty": args.penalty, "tol": args.tol, "max_sweeps": args.max_sweeps, "standardize": args.standardize})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        res = centralized_support(X, y, args.penalty, args.tol, args.max_sweeps, args.standardize)
    write_support_file(res.support, _out_dir(args) / "support_lasso.txt")
    out.record({"support": _fmt(res.support), "support_size": len(res.support), "converged": str(res.converged).lower(), "sweeps": res.sweeps})
    return EXIT_OK


def cmd_sweep(args, out: Output) -> int:
    grid = default_c_grid(*args.c_grid) if args.c_grid else None
    spec = SweepSpec(
        mode=args.mode,
        d_values=args.d_values,
        s_values=args.s_values,
        c_grid=grid,
        runs=args.runs,
        regime=Regime(args.regime),
        master_seed=args.seed,
        workers=args.workers,
    )
    out.header(
        "sweep",
        {"mode": spec.mode, "d": args.d_values, "s": args.s_values, "C": list(spec.c_grid), "runs": spec.runs, "regime": spec.regime.value, "n_rule": spec.n_rule, "seed": spec.master_seed},
    )
    result = run_samples_sweep(spec) if spec.mode == "samples" else run_clients_sweep(spec)
    text = result.to_csv(_out_dir(args) / f"sweep_{spec.mode}.csv")
    if args.format == "csv":
        out.stream.write(text)
    else:
        for row in result.rows:
            out.line(f"d={row.d:<5} s={row.s:<3} C={row.C:+.2f} g={row.g:<4} n={row.n_per_client:<6} rate={row.recovery_rate:.3f}")
    return EXIT_OK


def cmd_score(args, out: Output) -> int:
    found = read_support_file(args.support)
    ref = read_support_file(args.reference)
    out.header("score", {"support": args.support, "reference": args.reference})
    report = score_against(RecoveryReport(support=found, fractions=np.zeros(0), g_used=0), ref)
    pairs = {"overlap": len(found & ref), "support_size": len(found), "reference_size": len(ref)}
    pairs.update(recall=_fmt(report.recall), precision=_fmt(report.precision), f1=_fmt(report.f1))
    out.record(pairs)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_round_flags(p):
    p.add_argument("--beta", type=float, default=0.0, help="rogue fraction (default 0)")
    p.add_argument("--behavior", choices=[b.value for b in Behavior], default="complement")
    p.add_argument("--stragglers", type=float, default=0.0, help="straggler fraction (default 0)")
    p.add_argument("--failures", type=float, default=0.0, help="failed-client fraction (default 0)")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    common.add_argument("--out-dir", default=".", help="directory for output files (default .)")
    common.add_argument("--format", choices=["text", "csv"], default="text", help="stdout format (default text)")

    parser = _Parser(prog="fedsupport", description="Federated sparse support recovery toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", parents=[common], help="write ground truth and client CSVs")
    _add_instance_flags(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("lambda", parents=[common], help="feasible lambda window and sample bound")
    _add_instance_flags(p)
    _add_delta_flags(p)
    p.add_argument("--beta", type=float, default=0.0, help="rogue fraction for min_samples (default 0)")
    p.add_argument("--kv", action="store_true", help="print key=value lines")
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("simulate", parents=[common], help="one in-process round")
    _add_instance_flags(p)
    _add_delta_flags(p)
    _add_round_flags(p)
    p.add_argument("--lambda", dest="lam", type=float, default=None, help="manual lambda (default: window midpoint)")
    p.set_defaults(func=cmd_simulate, timeout=None)

    p = sub.add_parser("serve", parents=[common], help="collect one round of votes over TCP")
    p.add_argument("--bind", required=True, help="HOST:PORT to listen on")
    p.add_argument("--expect", type=int, required=True, help="number of votes to wait for")
    p.add_argument("--timeout", type=float, default=None, help=f"seconds before deciding (env {TIMEOUT_ENV}, default {DEFAULT_TIMEOUT:g})")
    p.add_argument("--dim", type=int, default=None, help="expected d (default: taken from the first vote)")
    p.add_argument("--truth", help="support file to score the result against")
    _add_round_flags(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("client", parents=[common], help="send one vote to a server")
    p.add_argument("--server", required=True, help="HOST:PORT of the server")
    p.add_argument("--data", required=True, help="client CSV with header y,x1,...,xd")
    p.add_argument("--lambda", dest="lam", type=float, required=True, help="threshold lambda")
    p.add_argument("--id", type=int, required=True, help="client id")
    p.add_argument("--retries", type=int, default=3, help="resend attempts (default 3)")
    p.add_argument("--timeout", type=float, default=None, help=f"socket timeout in seconds (env {TIMEOUT_ENV})")
    p.set_defaults(func=cmd_client)

    p = sub.add_parser("lasso", parents=[common], help="pooled lasso support")
    p.add_argument("--data", nargs="+", required=True, help="CSV files or directories of client_*.csv")
    p.add_argument("--penalty", type=float, required=True, help="l1 penalty")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-sweeps", type=int, default=10000)
    p.add_argument("--standardize", action="store_true", help="scale columns to unit second moment")
    p.set_defaults(func=cmd_lasso)

    p = sub.add_parser("sweep", parents=[common], help="phase-transition sweep to CSV")
    p.add_argument("--mode", choices=["samples", "clients"], required=True)
    p.add_argument("--d", dest="d_values", type=_int_list, required=True, help="comma-separated dimensions")
    p.add_argument("--s", dest="s_values", type=_int_list, required=True, help="comma-separated support sizes")
    p.add_argument("--c-grid", type=float, nargs=3, metavar=("LO", "HI", "STEP"), help="C grid (default per mode)")
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--regime", choices=[r.value for r in Regime], default="correlated")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("score", parents=[common], help="recall/precision/F1 of two support files")
    p.add_argument("support", help="estimated support file")
    p.add_argument("reference", help="reference support file")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, Output(args.format))
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleWindowError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RoundFailedError as exc:
        print(f"round failed: {exc}", file=sys.stderr)
        return EXIT_ROUND
    except (OSError, ProtocolError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
