"""Replication and experiment orchestration.

One replication builds a fresh population and social network, then loops
over decision periods (years): simulate one peak hour, draw the year's
accidents, record indicators, and let every agent decide its next mode.
Replications are independent and may run in a process pool; results are
always reduced in replication-id order.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import rng as rngmod
from .config import MODES, ScenarioConfig, apply_policy
from .decision import STRATEGIES, DecisionRecord, decide
from .metrics import IndicatorRow, IndicatorSeries, compare, indicator_row
from .network import SocialNetwork, build_network
from .population import Population, synthesize_population
from .traffic import TripLog, sample_accidents, simulate_peak_hour


@dataclass
class RunState:
    replication_id: int
    config: ScenarioConfig
    population: Population
    network: SocialNetwork
    streams: dict[str, np.random.Generator]
    period: int = 0
    rows: list[IndicatorRow] = field(default_factory=list)
    last_log: TripLog | None = None

    @classmethod
    def create(cls, config: ScenarioConfig, replication_id: int,
               population: Population | None = None,
               network: SocialNetwork | None = None) -> "RunState":
        streams = rngmod.streams(config.rng_seed, replication_id)
        if population is None:
            population = synthesize_population(config, streams["population"])
        if network is None:
            network = build_network(population, config.network_params, streams["network"])
        return cls(replication_id, config, population, network, streams)

    def step(self, trace: Callable | None = None,
             audit: Callable[[int, DecisionRecord], None] | None = None) -> IndicatorRow:
        """Simulate one decision period and advance to the next."""
        cfg, pop, t = self.config, self.population, self.period
        params = apply_policy(cfg, t)
        hook = None
        if trace is not None:
            hook = lambda tick, ids, xy, speed: trace(t, tick, ids, xy, speed)
        log = simulate_peak_hour(pop.home, pop.work, pop.mode, params, cfg.traffic,
                                 cfg.ticks_per_period, trace=hook)
        log.had_accident = sample_accidents(pop.mode, params, self.streams["traffic"])
        row = indicator_row(t, log, log.had_accident, cfg.population_scale)
        self.rows.append(row)
        self.last_log = log
        record = decide(pop, self.network, log, cfg, params)
        if audit is not None:
            audit(t, record)
        self.period += 1
        return row


def run_replication(config: ScenarioConfig, replication_id: int, *, trace=None, audit=None,
                    population: Population | None = None,
                    network: SocialNetwork | None = None) -> list[IndicatorRow]:
    """Indicator rows for each of ``config.horizon_years`` periods.

    Deterministic in ``(config.rng_seed, replication_id)``.  ``trace`` is
    called as ``trace(period, tick, agent_ids, xy, speed)`` after each tick;
    ``audit`` as ``audit(period, DecisionRecord)`` after each decision step.
    Neither touches any random stream.
    """
    state = RunState.create(config, replication_id, population, network)
    for _ in range(config.horizon_years):
        state.step(trace=trace, audit=audit)
    return state.rows


def _replicate(args):
    config, rep = args
    return run_replication(config, rep)


def run_experiment(config: ScenarioConfig, scenario: str | None = None,
                   threads: int = 1) -> IndicatorSeries:
    """Run ``config.replications`` replications and aggregate them.

    ``threads`` > 1 spreads replications over worker processes; the result
    is identical to a serial run.
    """
    if config.replications < 2:
        raise ValueError("confidence intervals need at least 2 replications")
    if scenario is None:
        scenario = "fare-free" if config.policy.fare_free_transit else "base"
    jobs = [(config, r) for r in range(config.replications)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_replicate, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        rows = [_replicate(j) for j in jobs]
    return IndicatorSeries.from_rows(scenario, rows)


def run_paired(config: ScenarioConfig, threads: int = 1) -> tuple[IndicatorSeries, IndicatorSeries]:
    """Base case and fare-free policy with common random numbers."""
    base = run_experiment(config.with_policy(False), "base", threads)
    policy = run_experiment(config.with_policy(True), "fare-free", threads)
    return base, policy


def compare_scenarios(base: IndicatorSeries, policy: IndicatorSeries):
    """Per-period, per-indicator differences (policy minus base) and percent changes."""
    return compare(base, policy)


class TraceWriter:
    """Per-tick positions and speeds as ``period,tick,agent,x,y,speed`` rows."""

    def __init__(self, fh):
        self.w = csv.writer(fh, lineterminator="\n")
        self.w.writerow(["period", "tick", "agent", "x", "y", "speed"])

    def __call__(self, period, tick, ids, xy, speed):
        for i, (x, y), v in zip(ids.tolist(), xy.tolist(), speed.tolist()):
            self.w.writerow([period, tick, i, x, y, repr(v)])


class AuditWriter:
    """Decision audit rows ``period,agent,strategy,S,U,prev_mode,new_mode``."""

    def __init__(self, fh):
        self.w = csv.writer(fh, lineterminator="\n")
        self.w.writerow(["period", "agent", "strategy", "S", "U", "prev_mode", "new_mode"])

    def __call__(self, period, rec: DecisionRecord):
        for i in range(len(rec.strategy)):
            self.w.writerow([period, i, STRATEGIES[rec.strategy[i]], repr(float(rec.satisfaction[i])),
                             repr(float(rec.uncertainty[i])), MODES[rec.prev_mode[i]],
                             MODES[rec.new_mode[i]]])
