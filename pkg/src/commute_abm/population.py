"""Synthetic commuter population.

The population is stored column-wise (one numpy array per attribute) so the
tick loop and the decision step can work on all agents at once; individual
agents are available as :class:`Agent` snapshots via ``population[i]``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import INCOME_LEVELS, MODES, ScenarioConfig, ThresholdParams, TrafficParams


@dataclass
class Agent:
    id: int
    sex: str
    age: int
    income_level: int
    home_patch: tuple[int, int]
    workplace_patch: tuple[int, int]
    current_mode: str
    periods_used: dict[str, int]
    periods_elapsed: int
    satisfaction_threshold: dict[str, float]
    uncertainty_threshold: dict[str, float]
    last_satisfaction: float
    owned_vehicles: set[str]


def apportion(shares, n: int) -> np.ndarray:
    """Split ``n`` items by ``shares`` with the largest-remainder method.

    Ties among equal remainders go to the earlier entry.

    >>> apportion([0.20, 0.43, 0.37], 1200).tolist()
    [240, 516, 444]
    """
    shares = np.asarray(shares, dtype=float)
    exact = shares * n
    counts = np.floor(exact).astype(int)
    short = n - counts.sum()
    if short > 0:
        order = np.argsort(-(exact - counts), kind="stable")
        counts[order[:short]] += 1
    return counts


def draw_thresholds(n: int, params: dict[str, ThresholdParams], rng: np.random.Generator):
    """Per-agent, per-mode satisfaction and uncertainty thresholds, shape (n, 3) each."""
    s_mu = np.array([params[m].satisfaction_mean for m in MODES])
    s_sd = np.array([params[m].satisfaction_sd for m in MODES])
    u_mu = np.array([params[m].uncertainty_mean for m in MODES])
    u_sd = np.array([params[m].uncertainty_sd for m in MODES])
    s = np.clip(s_mu + s_sd * rng.standard_normal((n, len(MODES))), 0.0, 1.0)
    u = np.clip(u_mu + u_sd * rng.standard_normal((n, len(MODES))), 0.0, 1.0)
    return s, u


def assign_thresholds(agent: Agent, params: dict[str, ThresholdParams], rng: np.random.Generator) -> Agent:
    s, u = draw_thresholds(1, params, rng)
    agent.satisfaction_threshold = {m: float(s[0, k]) for k, m in enumerate(MODES)}
    agent.uncertainty_threshold = {m: float(u[0, k]) for k, m in enumerate(MODES)}
    return agent


def neighborhood_layout(tp: TrafficParams):
    """Neighborhood blocks of the grid.

    Returns ``(cbd, residential)``: the central block and the remaining blocks
    in row-major order, each as ``(bx, by)`` block coordinates.
    """
    nbx, nby = tp.width // tp.neighborhood_size, tp.height // tp.neighborhood_size
    cbd = (nbx // 2, nby // 2)
    residential = [(bx, by) for by in range(nby) for bx in range(nbx) if (bx, by) != cbd]
    return cbd, residential


class Population:
    """Column store of all agents in one replication.

    Attributes are numpy arrays of length ``n`` (or shape ``(n, 3)`` for
    per-mode quantities, columns in :data:`MODES` order).  ``mode`` holds
    mode indices.
    """

    def __init__(self, *, sex, age, income, neighborhood, home, work, mode,
                 s_thresh, u_thresh, owned=None):
        self.n = len(mode)
        self.sex = np.asarray(sex)
        self.age = np.asarray(age, dtype=int)
        self.income = np.asarray(income, dtype=int)
        self.neighborhood = np.asarray(neighborhood, dtype=int)
        self.home = np.asarray(home, dtype=int).reshape(self.n, 2)
        self.work = np.asarray(work, dtype=int).reshape(self.n, 2)
        self.mode = np.asarray(mode, dtype=int)
        self.initial_mode = self.mode.copy()
        self.s_thresh = np.asarray(s_thresh, dtype=float).reshape(self.n, len(MODES))
        self.u_thresh = np.asarray(u_thresh, dtype=float).reshape(self.n, len(MODES))
        if owned is None:
            owned = np.zeros((self.n, len(MODES)), dtype=bool)
            owned[np.arange(self.n), self.mode] = True
        self.owned = np.asarray(owned, dtype=bool)
        self.used = np.zeros((self.n, len(MODES)), dtype=int)
        self.elapsed = np.zeros(self.n, dtype=int)
        self.last_satisfaction = np.full(self.n, np.nan)

    def __len__(self):
        return self.n

    def __getitem__(self, i: int) -> Agent:
        return Agent(
            id=int(i),
            sex=str(self.sex[i]),
            age=int(self.age[i]),
            income_level=int(self.income[i]),
            home_patch=(int(self.home[i, 0]), int(self.home[i, 1])),
            workplace_patch=(int(self.work[i, 0]), int(self.work[i, 1])),
            current_mode=MODES[self.mode[i]],
            periods_used={m: int(self.used[i, k]) for k, m in enumerate(MODES)},
            periods_elapsed=int(self.elapsed[i]),
            satisfaction_threshold={m: float(self.s_thresh[i, k]) for k, m in enumerate(MODES)},
            uncertainty_threshold={m: float(self.u_thresh[i, k]) for k, m in enumerate(MODES)},
            last_satisfaction=float(self.last_satisfaction[i]),
            owned_vehicles={m for k, m in enumerate(MODES) if self.owned[i, k]},
        )

    def __iter__(self):
        return (self[i] for i in range(self.n))

    @property
    def route_patches(self) -> np.ndarray:
        return np.abs(self.work - self.home).sum(axis=1)

    def record_period(self):
        """Count the period just travelled in every agent's mode history."""
        self.used[np.arange(self.n), self.mode] += 1
        self.elapsed += 1

    def mode_counts(self) -> np.ndarray:
        return np.bincount(self.mode, minlength=len(MODES))


def _initial_modes(income, mode_counts, config: ScenarioConfig, rng) -> np.ndarray:
    """Shuffle the apportioned modes so vehicles go to agents who can afford them.

    Modes are handed out from the most expensive vehicle down; each goes to a
    random subset of the agents whose income cap covers it, spilling over to
    the rest only when too few can.
    """
    d = config.decision
    cap = d.affordability_multiplier * np.array([d.income_proxy[l] for l in income])
    price = np.array([config.mode_params[m].acquisition_cost for m in MODES]) / d.vehicle_lifetime_years
    mode = np.full(len(income), -1)
    for k in np.argsort(-price, kind="stable"):
        free = np.flatnonzero(mode < 0)
        order = rng.permutation(free)
        ok = cap[order] >= price[k]
        ranked = np.concatenate([order[ok], order[~ok]])
        mode[ranked[:mode_counts[k]]] = k
    return mode


def synthesize_population(config: ScenarioConfig, rng: np.random.Generator) -> Population:
    """Create ``config.n_agents`` commuters.

    Income levels and initial modes are apportioned exactly by largest
    remainder; initial vehicles go to agents who can afford them.  Income
    levels occupy contiguous runs of residential neighborhoods (row-major), so
    each neighborhood houses a single level.  Everyone works in the central
    business-district block.
    """
    n = config.n_agents
    tp = config.traffic
    ns = tp.neighborhood_size

    income_counts = apportion([config.income_level_shares[l] for l in INCOME_LEVELS], n)
    income = np.repeat(np.array(INCOME_LEVELS), income_counts)

    mode_counts = apportion([config.initial_mode_shares[m] for m in MODES], n)
    mode = _initial_modes(income, mode_counts, config, rng)

    cbd, residential = neighborhood_layout(tp)
    block_counts = apportion(income_counts / n, len(residential))
    # a level with agents needs at least one neighborhood
    for k in range(len(INCOME_LEVELS)):
        if income_counts[k] > 0 and block_counts[k] == 0:
            block_counts[np.argmax(block_counts)] -= 1
            block_counts[k] = 1
    edges = np.concatenate([[0], np.cumsum(block_counts)])

    neighborhood = np.empty(n, dtype=int)
    start = 0
    for k, cnt in enumerate(income_counts):
        lo, hi = edges[k], edges[k + 1]
        neighborhood[start:start + cnt] = rng.integers(lo, hi, size=cnt) if cnt else []
        start += cnt
    blocks = np.array(residential)[neighborhood]
    home = blocks * ns + rng.integers(0, ns, size=(n, 2))
    work = np.array(cbd) * ns + rng.integers(0, ns, size=(n, 2))

    sex = rng.choice(np.array(["F", "M"]), size=n)
    age = rng.integers(18, 66, size=n)
    s_thresh, u_thresh = draw_thresholds(n, config.threshold_params, rng)

    return Population(
        sex=sex, age=age, income=income, neighborhood=neighborhood, home=home,
        work=work, mode=mode, s_thresh=s_thresh, u_thresh=u_thresh,
    )


def write_population_csv(pop: Population, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "sex", "age", "income_level", "home_x", "home_y", "initial_mode"])
        for i in range(pop.n):
            w.writerow([i, pop.sex[i], pop.age[i], pop.income[i],
                        pop.home[i, 0], pop.home[i, 1], MODES[pop.initial_mode[i]]])
