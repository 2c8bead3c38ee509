"""CONSUMAT mode choice.

After each peak hour a commuter scores the trip (weighted sum of seven
normalized attributes), works out how uncertain it is about its mode from
its own history and its peers' choices, and compares both against personal
thresholds:

    ==================  ===================  =====================
                        uncertainty < U*     uncertainty >= U*
    ==================  ===================  =====================
    satisfaction >= S*  repeat               imitate
    satisfaction <  S*  deliberate           inquire
    ==================  ===================  =====================

Deliberation maximizes expected utility over every affordable mode; inquiry
does the same over the modes the agent's neighbors use (plus its own).
Scalar helpers mirror the vectorized functions used by the engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import SimpleNamespace
from typing import Mapping

import numpy as np

from .config import ATTRIBUTES, MODES, DecisionParams, ModeParams, ScenarioConfig
from .network import SocialNetwork, peer_mode_counts

STRATEGIES = ("repeat", "imitate", "deliberate", "inquire")
REPEAT, IMITATE, DELIBERATE, INQUIRE = range(4)

_WEIGHT_TOL = 1e-9


@dataclass(frozen=True)
class AttributeVector:
    acquisition_cost: float
    operating_cost: float
    road_safety: float
    personal_security: float
    comfort: float
    commute_time: float
    pollution: float

    def __post_init__(self):
        for name in ATTRIBUTES:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, a) for a in ATTRIBUTES])


@dataclass(frozen=True)
class DecisionOutcome:
    strategy: str
    chosen_mode: str
    satisfaction: float
    uncertainty: float


@dataclass(frozen=True)
class SystemState:
    """What agents know about each mode from the last peak hour.

    ``speed_kmh`` is the mean speed of each mode's riders; modes nobody used
    fall back to their free-flow speed.
    """

    speed_kmh: np.ndarray

    @classmethod
    def from_trips(cls, log, mode_params: Mapping[str, ModeParams]) -> "SystemState":
        with np.errstate(invalid="ignore", divide="ignore"):
            v = log.km_traveled / (log.travel_time_min / 60.0)
        speeds = np.array([mode_params[m].free_flow_speed for m in MODES], dtype=float)
        for k in range(len(MODES)):
            sel = (log.mode == k) & (log.travel_time_min > 0)
            if sel.any():
                speeds[k] = v[sel].mean()
        return cls(speed_kmh=speeds)


def normalize(raw, anchor: tuple[float, float]):
    """Map raw values to [0, 1]: 1 at ``best``, 0 at ``worst``, clipped."""
    best, worst = anchor
    return np.clip((worst - np.asarray(raw, dtype=float)) / (worst - best), 0.0, 1.0)


def normalize_weights(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    return w / w.sum(axis=-1, keepdims=True)


def _check_weights(w: np.ndarray):
    if np.any(w < 0) or np.any(np.abs(w.sum(axis=-1) - 1.0) > _WEIGHT_TOL):
        raise ValueError("weights must be non-negative and sum to 1")


def satisfaction(values, weights):
    """Weighted sum of attribute values, ``S = sum_i V_i W_i``.

    Works on a single vector or row-wise on stacked arrays (weights broadcast).
    """
    if isinstance(values, AttributeVector):
        values = values.as_array()
    v = np.asarray(values, dtype=float)
    w = np.asarray(weights, dtype=float)
    _check_weights(w)
    s = (v * w).sum(axis=-1)
    return float(s) if np.ndim(s) == 0 else s


def uncertainty(alpha: float, times_frac, peers_frac):
    """``alpha (1 - own share of periods on the mode) + (1 - alpha)(1 - peer share)``."""
    u = alpha * (1.0 - np.asarray(times_frac, dtype=float)) + (1.0 - alpha) * (
        1.0 - np.asarray(peers_frac, dtype=float))
    return float(u) if np.ndim(u) == 0 else u


def strategy_codes(S, U, s_thresh, u_thresh) -> np.ndarray:
    satisfied = np.asarray(S) >= np.asarray(s_thresh)
    uncertain = np.asarray(U) >= np.asarray(u_thresh)
    return np.where(satisfied, np.where(uncertain, IMITATE, REPEAT),
                    np.where(uncertain, INQUIRE, DELIBERATE))


def select_strategy(S: float, U: float, s_thresh: float, u_thresh: float) -> str:
    return STRATEGIES[int(strategy_codes(S, U, s_thresh, u_thresh))]


# --- attribute values ----------------------------------------------------

def _mode_table(mode_params: Mapping[str, ModeParams], d: DecisionParams):
    mp = [mode_params[m] for m in MODES]
    return {
        "amortized": np.array([p.acquisition_cost for p in mp]) / d.vehicle_lifetime_years,
        "per_km": np.array([p.operating_cost_per_km + (d.fuel_price / p.fuel_efficiency
                                                       if p.fuel_efficiency > 0 else 0.0) for p in mp]),
        "fare": np.array([p.fare_per_trip for p in mp]),
        "safety": np.array([p.road_safety_score for p in mp]),
        "security": np.array([p.personal_security_score for p in mp]),
        "comfort": np.array([p.comfort_score for p in mp]),
        "emission": np.array([p.emission_per_rider_km for p in mp]),
    }


def affordable_modes(pop, mode_params: Mapping[str, ModeParams], d: DecisionParams) -> np.ndarray:
    """(n, 3) mask: modes already owned, or whose yearly amortized price fits the income cap."""
    amort = _mode_table(mode_params, d)["amortized"]
    cap = d.affordability_multiplier * np.array([d.income_proxy[l] for l in pop.income])
    return pop.owned | (amort[None, :] <= cap[:, None])


def experienced_attributes(pop, log, mode_params: Mapping[str, ModeParams], d: DecisionParams) -> np.ndarray:
    """Attribute values (n, 7) of the trip each agent just made."""
    t = _mode_table(mode_params, d)
    m = log.mode
    n = len(m)
    with np.errstate(invalid="ignore", divide="ignore"):
        speed = np.where(log.travel_time_min > 0, log.km_traveled / (log.travel_time_min / 60.0), np.nan)
        minutes = np.where(log.route_km > 0, log.route_km / speed * 60.0, 0.0)
    acquisition = np.where(pop.owned[np.arange(n), m], 1.0, normalize(t["amortized"][m], d.acquisition_anchor))
    cost = log.route_km * t["per_km"][m] + t["fare"][m]
    safety = t["safety"][m]
    if log.had_accident is not None:
        safety = np.where(log.had_accident, 0.0, safety)
    return np.column_stack([
        acquisition,
        normalize(cost, d.operating_anchor),
        safety,
        t["security"][m],
        t["comfort"][m],
        normalize(minutes, d.commute_time_anchor),
        normalize(t["emission"][m], d.pollution_anchor),
    ])


def forecast_attributes(pop, route_km: np.ndarray, state: SystemState,
                        mode_params: Mapping[str, ModeParams], d: DecisionParams) -> np.ndarray:
    """Expected attribute values (n, 3, 7) of every mode for every agent.

    Travel time comes from the agent's own route length at the mode's average
    speed last period; everything else from the mode's parameters.
    """
    t = _mode_table(mode_params, d)
    n = len(route_km)
    out = np.empty((n, len(MODES), len(ATTRIBUTES)))
    out[:, :, 0] = np.where(pop.owned, 1.0, normalize(t["amortized"], d.acquisition_anchor)[None, :])
    out[:, :, 1] = normalize(route_km[:, None] * t["per_km"][None, :] + t["fare"][None, :], d.operating_anchor)
    out[:, :, 2] = t["safety"]
    out[:, :, 3] = t["security"]
    out[:, :, 4] = t["comfort"]
    out[:, :, 5] = normalize(route_km[:, None] / state.speed_kmh[None, :] * 60.0, d.commute_time_anchor)
    out[:, :, 6] = normalize(t["emission"], d.pollution_anchor)[None, :]
    return out


def expected_utilities(pop, route_km, state, mode_params, d: DecisionParams, weights: np.ndarray) -> np.ndarray:
    """(n, 3) utilities; ``weights`` is the (3 income levels, 7) table."""
    attrs = forecast_attributes(pop, route_km, state, mode_params, d)
    w = weights[pop.income - 1]
    return (attrs * w[:, None, :]).sum(axis=-1)


# --- strategy execution --------------------------------------------------

def choose_modes(current: np.ndarray, codes: np.ndarray, peer_counts: np.ndarray,
                 utilities: np.ndarray, affordable: np.ndarray) -> np.ndarray:
    """Vectorized strategy execution; ties go to the earlier mode.

    An agent never moves to a mode outside ``affordable``: deliberation and
    inquiry skip such modes, imitation of one falls back to the current mode.
    """
    n = len(current)
    rows = np.arange(n)
    is_current = np.zeros_like(affordable)
    is_current[rows, current] = True

    has_peers = peer_counts.sum(axis=1) > 0
    imitated = np.argmax(peer_counts, axis=1)
    imitated = np.where(has_peers & (affordable | is_current)[rows, imitated], imitated, current)

    deliberate_ok = affordable | is_current
    inquire_ok = ((peer_counts > 0) & affordable) | is_current
    deliberated = np.argmax(np.where(deliberate_ok, utilities, -np.inf), axis=1)
    inquired = np.argmax(np.where(inquire_ok, utilities, -np.inf), axis=1)

    choice = np.select([codes == REPEAT, codes == IMITATE, codes == DELIBERATE],
                       [current, imitated, deliberated], inquired)
    return choice.astype(int)


def execute_strategy(agent, strategy: str, net: SocialNetwork, agents,
                     expected_utilities: Mapping[str, float]) -> str:
    """Mode an agent picks under ``strategy``.

    ``expected_utilities`` lists only the modes the agent can afford; the
    current mode is always a candidate.
    """
    from .network import _modes_array, most_common_peer_mode

    current = agent.current_mode
    if strategy == "repeat":
        return current
    if strategy == "imitate":
        if not len(net.neighbors(agent.id)):
            return current
        peer_mode = most_common_peer_mode(net, agent, agents)
        return peer_mode if peer_mode in expected_utilities or peer_mode == current else current
    if strategy == "deliberate":
        candidates = set(expected_utilities) | {current}
    elif strategy == "inquire":
        used = {MODES[k] for k in _modes_array(agents)[net.neighbors(agent.id)]}
        candidates = (used & set(expected_utilities)) | {current}
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    utils = dict(expected_utilities)
    ranked = [m for m in MODES if m in candidates]
    return max(ranked, key=lambda m: (utils.get(m, -np.inf), -MODES.index(m)))


def expected_utility(agent, mode: str, state: SystemState, config: ScenarioConfig,
                     mode_params: Mapping[str, ModeParams] | None = None) -> float:
    """Forecast satisfaction of ``mode`` for one agent."""
    mode_params = config.mode_params if mode_params is None else mode_params
    k = MODES.index(mode)
    owned = np.zeros((1, len(MODES)), dtype=bool)
    for m in agent.owned_vehicles:
        owned[0, MODES.index(m)] = True
    route = np.array([(abs(agent.workplace_patch[0] - agent.home_patch[0])
                       + abs(agent.workplace_patch[1] - agent.home_patch[1])) * config.traffic.patch_km])
    one = SimpleNamespace(owned=owned, income=np.array([agent.income_level]))
    u = expected_utilities(one, route, state, mode_params, config.decision, config.weight_matrix())
    return float(u[0, k])


@dataclass
class DecisionRecord:
    strategy: np.ndarray
    satisfaction: np.ndarray
    uncertainty: np.ndarray
    prev_mode: np.ndarray
    new_mode: np.ndarray


def decide(pop, net: SocialNetwork, log, config: ScenarioConfig,
           mode_params: Mapping[str, ModeParams]) -> DecisionRecord:
    """Synchronous end-of-period decision for every agent; updates ``pop`` in place.

    ``log`` is the trip log of the period just simulated and ``mode_params``
    the parameters in effect during it.  All agents decide on the same
    snapshot of their neighbors' modes.
    """
    d = config.decision
    weights = config.weight_matrix()
    rows = np.arange(pop.n)
    current = pop.mode.copy()

    pop.record_period()
    S = satisfaction(experienced_attributes(pop, log, mode_params, d), weights[pop.income - 1])
    pop.last_satisfaction = S

    counts = peer_mode_counts(net, current)
    degree = counts.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        peers_frac = np.where(degree > 0, counts[rows, current] / degree, 0.0)
    times_frac = pop.used[rows, current] / pop.elapsed
    U = uncertainty(config.alpha, times_frac, peers_frac)

    codes = strategy_codes(S, U, pop.s_thresh[rows, current], pop.u_thresh[rows, current])
    state = SystemState.from_trips(log, mode_params)
    utils = expected_utilities(pop, log.route_km, state, mode_params, d, weights)
    afford = affordable_modes(pop, mode_params, d)
    new = choose_modes(current, codes, counts, utils, afford)

    pop.owned[rows, new] = True
    pop.mode = new
    return DecisionRecord(strategy=codes, satisfaction=S, uncertainty=U, prev_mode=current, new_mode=new)
