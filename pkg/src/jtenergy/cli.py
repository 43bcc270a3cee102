"""Command-line entry point: ``jtenergy {run,validate,demo}``.

Failures print a single line ``error: <field-or-kind>: <message>`` on
stderr and exit non-zero.  Log verbosity comes from ``JTENERGY_LOG_LEVEL``
(default ``WARNING``).
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

import numpy as np
import yaml

from .coupling import energy, fixed_point_load
from .harness import (DIVERGED, ERROR, ConfigError, aggregate, config_from_dict, config_to_dict,
                      load_config, run_scenario, write_results)
from .model import Association, InvalidInstanceError, NetworkInstance, generate_instance
from .optimizer import AoloOptions, PoloOptions, palo


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")


def _names(text):
    return tuple(v.strip() for v in text.split(",") if v.strip())


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"error: usage: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="jtenergy", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def overrides(p):
        p.add_argument("--config", required=True, help="YAML scenario file")
        p.add_argument("--seeds", type=_ints, help="comma-separated seed list")
        p.add_argument("--demands", type=_floats, help="comma-separated demands in bit/s")
        p.add_argument("--algos", type=_names, help="subset of nonjt,aolo,palo,polo_fixed")
        p.add_argument("--epsilon", type=float, help="POLO power tolerance (W)")
        p.add_argument("--tau", type=int, help="AOLO probe rounds")
        p.add_argument("--threads", type=int, help="worker processes")

    run = sub.add_parser("run", help="run a scenario sweep and write result files")
    overrides(run)
    run.add_argument("--out", required=True, help="output directory")
    val = sub.add_parser("validate", help="check a config and print it resolved")
    overrides(val)
    sub.add_parser("demo", help="PALO on a built-in 2-cell/2-UE network")
    return parser


def _resolve(args):
    cfg = load_config(args.config)
    exp = {}
    if args.seeds is not None:
        exp["seeds"] = args.seeds
    if args.demands is not None:
        exp["demands_bps"] = args.demands
    if args.algos is not None:
        exp["algorithms"] = args.algos
    if args.threads is not None:
        exp["threads"] = args.threads
    data = config_to_dict(cfg)
    data["experiment"].update({k: list(v) if isinstance(v, tuple) else v for k, v in exp.items()})
    if args.epsilon is not None:
        data["polo"]["epsilon"] = args.epsilon
    if args.tau is not None:
        data["aolo"]["tau"] = args.tau
    return config_from_dict(data)


def demo_instance():
    """Two cells, two UEs, interference-limited; PALO adds one JT link after scaling power."""
    gain = np.array([[1e-9, 6.6e-10], [2.4e-10, 1e-9]])
    inst = NetworkInstance(gain=gain, noise_power=2.4e-15, ru_bandwidth=180e3, ru_count=25,
                           demand_min=np.full(2, 7e6), power_max=np.ones(2))
    return inst, Association(np.eye(2, dtype=np.uint8)), np.ones(2)


def cmd_demo(out=None) -> int:
    out = out or sys.stdout
    inst, assoc, p = demo_instance()
    rep = fixed_point_load(inst, assoc, p)
    # powers end up in the microwatt range, so the bisection tolerance must be finer
    p2, a2, x2, trace = palo(inst, assoc, p, rep.load, PoloOptions(epsilon=1e-12), AoloOptions())
    print(f"round 0: energy {trace.initial_energy:.9g}", file=out)
    for i, r in enumerate(trace.rounds, 1):
        print(f"round {i}: energy {r.energy:.9g} (after POLO {r.energy_after_polo:.9g}, "
              f"beta {r.beta:.6f}, links added {r.links_added})", file=out)
    print(f"final power {np.array2string(p2, precision=6)} load "
          f"{np.array2string(x2, precision=6)} jt_links {a2.jt_links}", file=out)
    return 0


def cmd_validate(args) -> int:
    cfg = _resolve(args)
    for seed in cfg.seeds:
        for demand in cfg.demands_bps:
            generate_instance(replace(cfg.topology, rng_seed=seed), cfg.physical, demand)
    print(yaml.safe_dump(config_to_dict(cfg), sort_keys=True), end="")
    return 0


def cmd_run(args) -> int:
    cfg = _resolve(args)
    records = run_scenario(cfg)
    summary = aggregate(records)
    paths = write_results(records, summary, args.out, cfg)
    bad = [r for r in records if r.status in (ERROR, DIVERGED)]
    infeasible = sum(r.status == "infeasible" for r in records)
    print(f"wrote {paths['records']} ({len(records)} records, {infeasible} infeasible, "
          f"{len(bad)} failed)")
    if bad:
        r = bad[0]
        print(f"error: run: {len(bad)} runs failed, first seed={r.seed} demand={r.demand_bps:g} "
              f"algo={r.algo} status={r.status}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("JTENERGY_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "demo":
            return cmd_demo()
        if args.command == "validate":
            return cmd_validate(args)
        return cmd_run(args)
    except ConfigError as exc:
        print(f"error: {exc.field}: {str(exc).split(': ', 1)[-1]}", file=sys.stderr)
        return 2
    except InvalidInstanceError as exc:
        print(f"error: instance: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: io: {exc.strerror or exc} ({exc.filename})", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort single-line report
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
