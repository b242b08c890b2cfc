"""Command-line front end for the simulation harness.

Two subcommands:

* ``irssec simulate`` runs a seeded Monte-Carlo sweep for one solver family
  and writes detail/aggregate CSVs.
* ``irssec trace`` writes the per-iteration objective of a single
  realization, for convergence plots.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .channel import ScenarioConfig
from .harness import (
    ExperimentSpec,
    MODE_SWEEP_VARS,
    MODES,
    run_experiment,
    run_trace,
)
from .linalg import InputError

# used when --sweep is omitted: a single point at a representative value
DEFAULT_GRID_POINT = {"robust": 0.0, "no-csi": 30.0}


def parse_sweep(text, mode):
    """Parse ``var=start:step:stop`` into an inclusive grid tuple."""
    var, sep, rng = text.partition("=")
    expected = MODE_SWEEP_VARS[mode]
    if not sep or var != expected:
        raise InputError(
            f"mode {mode!r} sweeps {expected!r}; write --sweep "
            f"{expected}=start:step:stop")
    parts = rng.split(":")
    if len(parts) != 3:
        raise InputError(f"bad sweep range {rng!r}; expected start:step:stop")
    try:
        start, step, stop = (float(p) for p in parts)
    except ValueError as exc:
        raise InputError(f"bad sweep range {rng!r}: {exc}") from None
    if step <= 0:
        raise InputError("sweep step must be positive")
    if stop < start:
        raise InputError("sweep stop must not be below start")
    grid = []
    k = 0
    while True:
        value = start + k * step
        if value > stop + 1e-9 * step:
            break
        grid.append(value)
        k += 1
    return tuple(grid)


def load_scenario(path):
    """Build a ScenarioConfig from a JSON file of field overrides."""
    if path is None:
        return ScenarioConfig()
    with open(path) as fh:
        data = json.load(fh)
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(data) - known
    if unknown:
        raise InputError(
            f"unknown scenario keys {sorted(unknown)}; valid keys: "
            f"{sorted(known)}")
    if "positions" in data:
        data["positions"] = {
            k: (None if v is None else tuple(v))
            for k, v in data["positions"].items()
        }
    return ScenarioConfig(**data)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="irssec",
        description="Secrecy-rate simulations for an IRS-assisted "
                    "cognitive-radio downlink")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte-Carlo sweep")
    sim.add_argument("--mode", required=True, choices=MODES)
    sim.add_argument("--config", help="JSON file of scenario overrides")
    sim.add_argument("--sweep", help="var=start:step:stop (P_T in dBm, "
                                     "T in dB, eps as raw radius)")
    sim.add_argument("--realizations", type=int, default=50)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default=".", help="output directory")
    sim.add_argument("--jobs", type=int, default=1,
                     help="worker threads; results are identical for any value")
    sim.add_argument("--trials", type=int, default=10,
                     help="random-phase baseline draws per realization")
    sim.add_argument("--no-baselines", action="store_true",
                     help="skip the no-irs/random-phase curves (full-csi mode)")
    sim.add_argument("--strict", action="store_true",
                     help="exit nonzero when any realization is flagged")

    trc = sub.add_parser("trace", help="write one convergence trace")
    trc.add_argument("--mode", required=True, choices=MODES)
    trc.add_argument("--config", help="JSON file of scenario overrides")
    trc.add_argument("--seed", type=int, default=0)
    trc.add_argument("--index", type=int, default=0,
                     help="realization index within the seed stream")
    trc.add_argument("--out", default=".", help="output directory")
    trc.add_argument("--tau", type=float,
                     help="worst-case eavesdropper power level (robust mode)")
    trc.add_argument("--eps", type=float, default=0.0,
                     help="raw error radius (robust mode)")
    trc.add_argument("--target", type=float, default=30.0,
                     help="Bob SNR target in dB (no-csi mode)")
    return parser


def _simulate(args):
    scenario = load_scenario(args.config)
    if args.sweep:
        grid = parse_sweep(args.sweep, args.mode)
    elif args.mode == "full-csi":
        grid = (scenario.P_T,)
    else:
        grid = (DEFAULT_GRID_POINT[args.mode],)
    spec = ExperimentSpec(
        mode=args.mode, scenario=scenario, grid=grid,
        realizations=args.realizations, master_seed=args.seed,
        baselines=not args.no_baselines, random_phase_trials=args.trials,
        out_dir=args.out,
    )
    detail, aggregate, failures = run_experiment(spec, jobs=args.jobs)
    print(f"detail:    {detail}")
    print(f"aggregate: {aggregate}")
    if failures:
        print(f"{failures} flagged realization(s)")
        if args.strict:
            return 2
    return 0


def _trace(args):
    scenario = load_scenario(args.config)
    path = run_trace(
        args.mode, scenario, master_seed=args.seed, index=args.index,
        tau=args.tau, eps_raw=args.eps, target_dB=args.target,
        out_dir=args.out,
    )
    print(f"trace: {path}")
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _simulate(args)
        return _trace(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
