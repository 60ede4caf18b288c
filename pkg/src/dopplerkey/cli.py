"""Command-line front end.

Exit codes:
    0  success
    2  usage error (unknown subcommand or flag)
    3  configuration error
    4  numerical failure (quadrature did not converge)
    5  I/O failure (unreadable config, unwritable output)
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from . import harness
from .analytic import NumericalFailure
from .config import ConfigError, ScenarioConfig, load_config

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4
EXIT_IO = 5

OUT_ENV = "DOPPLERKEY_OUT"
DEFAULT_OUT = "results"

SUBCOMMANDS = ("key-rate", "npsds-pdf", "estimator", "mse", "kdr", "timing", "all")


@dataclass(frozen=True)
class Invocation:
    subcommand: str
    config: Path | None
    out: Path
    seed: int | None = None
    trials: int | None = None
    workers: int = 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dopplerkey",
        description="Doppler-shift key generation experiments; writes CSV tables and JSON sidecars.",
    )
    p.add_argument("subcommand", choices=SUBCOMMANDS, help="experiment to run ('all' runs every one)")
    p.add_argument("--config", type=Path, default=None, help="TOML scenario file (defaults: reference campaign)")
    p.add_argument(
        "--out",
        type=Path,
        default=None,
        help=f"output directory (default: ${OUT_ENV} or ./{DEFAULT_OUT})",
    )
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--trials", type=int, default=None, help="override trials and key durations")
    p.add_argument("--workers", type=int, default=1, help="worker processes for Monte Carlo chunks")
    return p


def parse_args(argv: list[str]) -> Invocation:
    """Parse and validate; usage errors exit with status 2 via argparse."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.seed is not None and not 0 <= ns.seed < 2**64:
        parser.error("--seed must fit in 64 unsigned bits")
    if ns.trials is not None and ns.trials < 1:
        parser.error("--trials must be positive")
    if ns.workers < 1:
        parser.error("--workers must be positive")
    out = ns.out if ns.out is not None else Path(os.environ.get(OUT_ENV, DEFAULT_OUT))
    return Invocation(ns.subcommand, ns.config, out, ns.seed, ns.trials, ns.workers)


def _scenario(inv: Invocation) -> ScenarioConfig:
    cfg = load_config(inv.config)
    changes = {}
    if inv.seed is not None:
        changes["master_seed"] = inv.seed
    if inv.trials is not None:
        changes["trials"] = inv.trials
        changes["n_durations"] = inv.trials
    return replace(cfg, **changes) if changes else cfg


def _experiments(cfg: ScenarioConfig, inv: Invocation):
    w = inv.workers
    table = {
        "key-rate": lambda: harness.exp_key_rate_surface(cfg),
        "npsds-pdf": lambda: harness.exp_npsds_pdf(cfg, workers=w),
        "estimator": lambda: harness.exp_estimator_hist(cfg, workers=w),
        "mse": lambda: harness.exp_mse(cfg, workers=w),
        "kdr": lambda: harness.exp_kdr(cfg, workers=w),
        "timing": lambda: harness.exp_appendix_timing(cfg),
    }
    names = [s for s in SUBCOMMANDS if s != "all"] if inv.subcommand == "all" else [inv.subcommand]
    return [(name, table[name]) for name in names]


def _headline(result: harness.ExperimentResult) -> str:
    s = result.summary
    if result.name == "kdr":
        return f"max |sim - theory| symbol {s['max_abs_gap_symbol']:.4f}, index {s['max_abs_gap_index']:.4f}"
    if result.name == "npsds_pdf":
        return "KS " + ", ".join(f"kappa={k}: {v['ks']:.4f}" for k, v in s.items())
    if result.name == "estimator_hist":
        return "KS(ab) " + ", ".join(f"N={k}: {v['ks_truncated_normal_ab']:.4f}" for k, v in s.items())
    if result.name == "mse":
        last = result.rows[-1]
        return f"N={last[0]}: mse_ab {last[1]:.4g} (theory {last[5]:.4g}), mse_ae {last[3]:.4g}"
    if result.name == "appendix_timing":
        return (
            f"bound at {s['reference_distance_m']:.3g} m: {s['reference_bound']:.1f} m/s^2 "
            f"(printed {s['printed_bound']:.0f}, inconsistent={s['printed_bound_inconsistent']})"
        )
    if result.name == "key_rate_surface":
        return f"rate {s['min_rate_nats']:.3f}..{s['max_rate_nats']:.3f} nats"
    return ""


def run(inv: Invocation) -> int:
    try:
        cfg = _scenario(inv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO

    for name, job in _experiments(cfg, inv):
        try:
            result = job()
        except NumericalFailure as exc:
            print(f"{name}: numerical failure: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL
        except ConfigError as exc:
            print(f"{name}: config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            csv_path, _ = result.write(inv.out)
        except OSError as exc:
            print(f"{name}: cannot write output: {exc}", file=sys.stderr)
            return EXIT_IO
        runtime = result.metadata.get("runtime_s", 0.0)
        print(f"{name}: {len(result.rows)} rows -> {csv_path} ({runtime:.1f} s) {_headline(result)}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    return run(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
