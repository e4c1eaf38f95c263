"""Command line entry point: ``qmemlab run | selftest | sweep``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import harness
from .bounds import DEFAULT_C_EXPONENT, asymptotic_sweep
from .harness import ConfigError, ExperimentConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmemlab", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="trade-off check for every outcome at every N")
    run.add_argument("--config", help="JSON experiment config; flags override its fields")
    run.add_argument("--n", help="message lengths, e.g. 2..5 or 2,3,4")
    run.add_argument("--m", type=int, help="fixed memory size M")
    run.add_argument("--q", type=float, help="memory rate, M = floor(qN)")
    run.add_argument("--strategy", help="e.g. measure_all:Z, keep_first:measure=breidbart, "
                                        "keep_subset:keep=0+2, custom:file=s.json")
    run.add_argument("--lx", type=int)
    run.add_argument("--lz", type=int)
    run.add_argument("--px", type=float)
    run.add_argument("--pz", type=float)
    run.add_argument("--families", help="JSON decoder families (list) for custom strategies")
    run.add_argument("--c-exp", type=float, dest="c_exponent")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="CSV output path (stdout if omitted)")

    st = sub.add_parser("selftest", help="run all invariant suites")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--inject-fault", choices=["channel"], help=argparse.SUPPRESS)

    sw = sub.add_parser("sweep", help="worst-outcome trade-off against 1 + C0 2^(-eps N)")
    sw.add_argument("--q", type=float, required=True)
    sw.add_argument("--px", type=float, required=True)
    sw.add_argument("--pz", type=float, required=True)
    sw.add_argument("--n-min", type=int, required=True)
    sw.add_argument("--n-max", type=int, required=True)
    sw.add_argument("--measure", default="Z", help="basis for measured qubits (Z, X, breidbart)")
    sw.add_argument("--c-exp", type=float, dest="c_exponent", default=DEFAULT_C_EXPONENT)
    sw.add_argument("--out", help="CSV output path (stdout if omitted)")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    doc = {}
    if args.config:
        doc = ExperimentConfig.load(args.config)
        doc = {f.name: getattr(doc, f.name) for f in dataclasses.fields(doc)}
    overrides = {
        "n_range": args.n and harness.parse_n_range(args.n),
        "m": args.m, "q": args.q,
        "strategy": args.strategy and harness.parse_strategy(args.strategy),
        "l_x": args.lx, "l_z": args.lz, "p_x": args.px, "p_z": args.pz,
        "families": args.families, "c_exponent": args.c_exponent,
        "seed": args.seed, "out": args.out,
    }
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if args.px is not None or args.pz is not None:
        if args.lx is None:
            doc["l_x"] = None
        if args.lz is None:
            doc["l_z"] = None
    if "n_range" not in doc:
        raise ConfigError("need --config or --n")
    doc["n_range"] = tuple(doc["n_range"])
    try:
        return ExperimentConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_run(args) -> int:
    try:
        config = _config_from_args(args)
    except ConfigError as exc:
        print(f"qmemlab: invalid config: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    result = harness.run(config)
    if result.exit_code != harness.EXIT_CONFIG and not config.out and result.rows:
        sys.stdout.write(harness.rows_to_csv(result.rows))
    print(f"qmemlab: {result.message}", file=sys.stderr)
    return result.exit_code


def _cmd_selftest(args) -> int:
    results = harness.selftest(args.seed, args.inject_fault)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<14} {r.detail}")
    return 0 if all(r.passed for r in results) else 1


def _cmd_sweep(args) -> int:
    if args.n_min < 1 or args.n_max < args.n_min:
        print("qmemlab: need 1 <= n-min <= n-max", file=sys.stderr)
        return harness.EXIT_CONFIG
    if 2**args.n_max > harness.max_alice_dim():
        print(f"qmemlab: N={args.n_max} exceeds the dimension guard", file=sys.stderr)
        return harness.EXIT_CONFIG
    try:
        points = asymptotic_sweep(harness.default_sweep_family(args.q, args.measure),
                                  args.q, args.px, args.pz,
                                  range(args.n_min, args.n_max + 1), args.c_exponent)
    except ValueError as exc:
        print(f"qmemlab: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    text = harness.sweep_to_csv(points)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if all(p.holds for p in points) else harness.EXIT_VIOLATION


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "selftest": _cmd_selftest, "sweep": _cmd_sweep}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
