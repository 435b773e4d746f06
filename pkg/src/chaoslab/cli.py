"""Command-line entry point.

Exit codes: 0 when every check passes, 1 when any check fails, 2 for a bad
configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import (ConfigError, ExperimentConfig, ExperimentError, resolve_threads, run,
                          write_record)
from .vlasov import save_density

SUBCOMMANDS = {
    "simulate": "simulate",
    "chaos-study": "chaos_study",
    "expmoment": "expmoment",
    "combinatorics-verify": "combinatorics_verify",
    "cancellation-verify": "cancellation_verify",
    "vlasov-run": "vlasov_run",
    "weakstrong": "weakstrong",
}

HELP = {
    "simulate": "run the N-particle system and record observables",
    "chaos-study": "particle marginals against the Vlasov grid solution, per N",
    "expmoment": "Monte-Carlo exponential moment of R_N against the closed-form bound",
    "combinatorics-verify": "brute-force counts against closed forms and bounds",
    "cancellation-verify": "quadrature and Monte-Carlo checks of the cancellation identities",
    "vlasov-run": "evolve the Vlasov equation on a grid with solver diagnostics",
    "weakstrong": "relative entropy between two grid solutions over time",
}

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chaoslab", description="Mean-field particle and Vlasov experiments with CSV and PNG output.",
        epilog="Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", type=Path, help="output directory")
        p.add_argument("--threads", type=int, help="worker threads (fallback: CHAOSLAB_THREADS)")
        p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args) -> ExperimentConfig:
    kind = SUBCOMMANDS[args.command]
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    if data.get("kind", kind).replace("-", "_") != kind:
        raise ConfigError(f"config kind {data['kind']!r} does not match subcommand {args.command!r}")
    data["kind"] = kind
    if args.seed is not None:
        data["seed"] = args.seed
    if args.out is not None:
        data["out"] = str(args.out)
    return ExperimentConfig.from_dict(data)


def summarize(rec) -> str:
    lines = [f"{rec.config.kind}: {'PASS' if rec.passed else 'FAIL'} "
             f"(hash {rec.config_hash[:12]}, {rec.wall_time:.1f} s)"]
    lines += [f"  note: {n}" for n in rec.notes]
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        threads = resolve_threads(args.threads, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rec = run(cfg, threads)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExperimentError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = Path(cfg.out or f"runs/{cfg.kind}-{rec.config_hash[:12]}")
    paths = write_record(rec, out)
    if "density" in rec.artifacts:
        paths.append(save_density(rec.artifacts["density"], out / "density_final.csv"))
    if not args.no_figures:
        from .plotting import render
        paths += render(rec, out)
    print(summarize(rec))
    for p in paths:
        print(f"  wrote {p}")
    return EXIT_OK if rec.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
