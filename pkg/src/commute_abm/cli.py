"""``commute-abm`` command: run base, fare-free or paired scenarios and write CSVs."""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import CONFIG_ENV_VAR, ConfigError, load_config
from .engine import AuditWriter, RunState, TraceWriter, compare_scenarios, run_experiment, run_paired
from .metrics import write_results
from .population import write_population_csv
from .network import write_edge_list

SCENARIOS = ("base", "fare-free", "both")


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive: {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="commute-abm",
        description="Simulate commuter mode choice under the base case and/or fare-free transit.",
    )
    p.add_argument("--config", help=f"JSON config file (default: ${CONFIG_ENV_VAR}, else built-in defaults)")
    p.add_argument("--scenario", choices=SCENARIOS, default="both")
    p.add_argument("--seed", type=_seed, help="override the master RNG seed")
    p.add_argument("--replications", type=_positive, help="override the number of replications")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--emit-plots", action="store_true", help="also write shares.png and indicators.png")
    p.add_argument("--trace", action="store_true",
                   help="write per-tick positions and per-agent decisions of replication 0")
    p.add_argument("--dump-population", action="store_true",
                   help="write the synthetic population and network of replication 0")
    p.add_argument("--threads", type=_positive, default=os.cpu_count() or 1,
                   help="worker processes for replications (default: all cores)")
    return p


def _debug_outputs(cfg, scenarios, out: Path, trace: bool, dump: bool):
    if dump:
        state = RunState.create(cfg, 0)
        write_population_csv(state.population, out / "population.csv")
        write_edge_list(state.network, out / "network.csv")
    if trace:
        for name in scenarios:
            sc = cfg.with_policy(name == "fare-free")
            suffix = f"_{name}" if len(scenarios) > 1 else ""
            with open(out / f"trace{suffix}.csv", "w", newline="") as tf, \
                    open(out / f"decisions{suffix}.csv", "w", newline="") as af:
                state = RunState.create(sc, 0)
                tw, aw = TraceWriter(tf), AuditWriter(af)
                for _ in range(sc.horizon_years):
                    state.step(trace=tw, audit=aw)


def run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, rng_seed=args.seed)
    if args.replications is not None:
        cfg = replace(cfg, replications=args.replications)
    out = Path(args.out)

    if args.scenario == "both":
        base, policy = run_paired(cfg, args.threads)
        series, comparison = [base, policy], compare_scenarios(base, policy)
        names = ["base", "fare-free"]
    else:
        fare_free = args.scenario == "fare-free"
        series = [run_experiment(cfg.with_policy(fare_free), args.scenario, args.threads)]
        comparison, names = None, [args.scenario]

    written = write_results(series, comparison, out, plots=args.emit_plots)
    if args.trace or args.dump_population:
        try:
            _debug_outputs(cfg, names, out, args.trace, args.dump_population)
        except OSError as exc:
            raise OSError(f"cannot write debug output to {out}: {exc}") from exc
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except (ConfigError, ValueError, TypeError) as exc:
        print(f"commute-abm: config error: {exc}".replace("\n", " "), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"commute-abm: I/O error: {exc}".replace("\n", " "), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
