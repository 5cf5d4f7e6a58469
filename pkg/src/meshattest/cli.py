"""Command-line front end: run scenario files, validate them, attack them.

Exit codes: 0 success, 1 runtime or invariant failure, 2 configuration error.
Metrics are emitted as long-format CSV (scenario, seed, metric, time, value),
to stdout unless ``--out`` is given.
"""

from __future__ import annotations

import argparse
import sys

from .netsim.config import ConfigError
from .netsim.metrics import write_csv
from .netsim.sim import InvariantViolation, Simulation
from .scenarios import load_config
from .security import STRATEGIES, run_attack, run_negative_control


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="meshattest",
        description="Heartbeat-based absence detection and scalable mesh attestation simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario config and emit metrics CSV")
    run.add_argument("config", help="path to a scenario JSON file")
    run.add_argument("--seed", type=int, default=0, help="first RNG seed (default 0)")
    run.add_argument("--seeds", type=int, default=1,
                     help="number of consecutive seeds to run (default 1)")
    run.add_argument("--out", help="write CSV here instead of stdout")
    run.add_argument("--trace", help="write the event trace to this file")
    run.add_argument("--null-crypto", action="store_true",
                     help="force the structural crypto backend")

    secatt = sub.add_parser(
        "secatt", help="run a scripted capture-attack strategy and report soundness")
    secatt.add_argument("--strategy", required=True,
                        choices=list(STRATEGIES) + ["negative-control"])
    secatt.add_argument("--n", type=int, default=8, help="network size")
    secatt.add_argument("--c", type=int, default=1, help="number of captured devices")
    secatt.add_argument("--s", type=int, default=32,
                        help="statistical security bits (dynamic forgery)")
    secatt.add_argument("--seed", type=int, default=0)
    secatt.add_argument("--runs", type=int, default=1)

    validate = sub.add_parser("validate", help="check a scenario config file")
    validate.add_argument("config", help="path to a scenario JSON file")
    return parser


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        if args.null_crypto:
            cfg.crypto = "null"
        if args.trace:
            cfg.record_trace = True
        cfg.validate()
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    rows = []
    traces = []
    try:
        for seed in range(args.seed, args.seed + args.seeds):
            sim = Simulation(cfg, seed)
            metrics = sim.run()
            rows.extend(metrics.to_rows(cfg.name, seed))
            if args.trace and sim.trace is not None:
                traces.append((seed, sim.trace))
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fp:
            write_csv(rows, fp)
    else:
        write_csv(rows, sys.stdout)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fp:
            for seed, lines in traces:
                for line in lines:
                    fp.write(f"{seed} {line}\n")
    return 0


def cmd_secatt(args) -> int:
    failures = 0
    for i in range(args.runs):
        seed = args.seed + i
        if args.strategy == "negative-control":
            result = run_negative_control(n=args.n, seed=seed)
            # here the attack succeeding is the expected outcome
            ok = result.all_ones and result.compromised_reacquired
            label = "attack-succeeded" if ok else "attack-failed"
        else:
            result = run_attack(args.strategy, args.n, args.c, seed)
            ok = result.sound()
            label = "sound" if ok else "VIOLATION"
        print(f"{args.strategy} n={result.n} c={result.c} seed={seed}: {label} "
              f"verdict={result.verdict}")
        if not ok:
            failures += 1
    print(f"{args.runs - failures}/{args.runs} runs passed")
    return 0 if failures == 0 else 1


def cmd_validate(args) -> int:
    try:
        load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    print("ok")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "secatt":
            return cmd_secatt(args)
        return cmd_validate(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
