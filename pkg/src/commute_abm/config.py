"""Experiment parameterization.

A :class:`ScenarioConfig` bundles everything one experiment needs: population
size and scale, calibration tables for the three transport modes, network
growth parameters, attribute weights, threshold distributions, traffic
coefficients and the policy switch.  Values are loaded from a JSON document
whose sections mirror the dataclasses below; anything omitted takes the
default.

Monetary values (vehicle prices, per-km costs, fares, income proxies) are
calibration placeholders in abstract units, tuned so that the base case
drifts from transit toward cars while fare-free transit slows that drift.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

MODES = ("motorcycle", "car", "transit")
MOTORCYCLE, CAR, TRANSIT = range(3)
ATTRIBUTES = (
    "acquisition_cost",
    "operating_cost",
    "road_safety",
    "personal_security",
    "comfort",
    "commute_time",
    "pollution",
)
INCOME_LEVELS = (1, 2, 3)

CONFIG_ENV_VAR = "COMMUTE_ABM_CONFIG"

_SUM_TOL = 1e-9


class ConfigError(ValueError):
    """Raised when a configuration file is malformed or violates an invariant."""


@dataclass(frozen=True)
class ModeParams:
    """Technical and perceived characteristics of one transport mode.

    ``emission_factor`` and ``car_equivalent`` describe the vehicle; they are
    shared among ``occupancy`` riders (a bus carries many passengers, a car
    or motorcycle one commuter).  Transit has no purchase price and charges
    ``fare_per_trip`` instead of a per-km cost.
    """

    acquisition_cost: float
    operating_cost_per_km: float
    free_flow_speed: float
    emission_factor: float
    fuel_efficiency: float
    accident_probability: float
    comfort_score: float
    personal_security_score: float
    road_safety_score: float
    car_equivalent: float
    fare_per_trip: float = 0.0
    occupancy: float = 1.0

    @property
    def emission_per_rider_km(self) -> float:
        return self.emission_factor / self.occupancy

    @property
    def pce_per_rider(self) -> float:
        return self.car_equivalent / self.occupancy

    def trip_cost(self, km: float, fuel_price: float) -> float:
        """Out-of-pocket cost of one trip of ``km`` kilometres."""
        fuel = fuel_price / self.fuel_efficiency if self.fuel_efficiency > 0 else 0.0
        return km * (self.operating_cost_per_km + fuel) + self.fare_per_trip


def _default_modes() -> dict[str, ModeParams]:
    return {
        "motorcycle": ModeParams(
            acquisition_cost=8.0,
            operating_cost_per_km=0.05,
            free_flow_speed=20.0,
            emission_factor=126.0,
            fuel_efficiency=120.0,
            accident_probability=0.2,
            comfort_score=0.3,
            personal_security_score=0.55,
            road_safety_score=0.3,
            car_equivalent=0.5,
        ),
        "car": ModeParams(
            acquisition_cost=60.0,
            operating_cost_per_km=0.15,
            free_flow_speed=18.0,
            emission_factor=204.0,
            fuel_efficiency=50.0,
            accident_probability=0.02,
            comfort_score=0.9,
            personal_security_score=0.85,
            road_safety_score=0.8,
            car_equivalent=1.0,
        ),
        "transit": ModeParams(
            acquisition_cost=0.0,
            operating_cost_per_km=0.0,
            free_flow_speed=16.0,
            emission_factor=900.0,
            fuel_efficiency=0.0,
            accident_probability=0.005,
            comfort_score=0.25,
            personal_security_score=0.15,
            road_safety_score=0.9,
            car_equivalent=3.0,
            fare_per_trip=2.7,
            occupancy=40.0,
        ),
    }


@dataclass(frozen=True)
class NetworkParams:
    m0: int = 5
    m: int = 3
    homophily_multiplier: float = 3.0


@dataclass(frozen=True)
class PolicySpec:
    fare_free_transit: bool = False
    activation_period: int = 0


@dataclass(frozen=True)
class ThresholdParams:
    """Normal distributions of one mode's satisfaction and uncertainty thresholds."""

    satisfaction_mean: float = 0.6
    satisfaction_sd: float = 0.1
    uncertainty_mean: float = 0.5
    uncertainty_sd: float = 0.1


def _default_thresholds() -> dict[str, ThresholdParams]:
    return {
        "motorcycle": ThresholdParams(0.55, 0.08, 0.45, 0.1),
        "car": ThresholdParams(0.6, 0.08, 0.45, 0.1),
        "transit": ThresholdParams(0.65, 0.06, 0.45, 0.1),
    }


def _default_weights() -> dict[int, dict[str, float]]:
    # Low income weights costs highest; high income weights comfort and security.
    return {
        1: dict(zip(ATTRIBUTES, (0.30, 0.22, 0.08, 0.12, 0.08, 0.16, 0.04))),
        2: dict(zip(ATTRIBUTES, (0.14, 0.16, 0.10, 0.18, 0.16, 0.18, 0.08))),
        3: dict(zip(ATTRIBUTES, (0.06, 0.06, 0.12, 0.24, 0.24, 0.20, 0.08))),
    }


@dataclass(frozen=True)
class TrafficParams:
    """Grid geometry and speed-decay coefficients for the peak-hour loop.

    The city is a ``width`` x ``height`` patch grid split into square
    neighborhoods of ``neighborhood_size`` patches; the central neighborhood
    is the business district every commuter drives to.
    """

    width: int = 21
    height: int = 21
    neighborhood_size: int = 3
    patch_km: float = 0.86
    tick_minutes: float = 2.0
    decay: float = 0.15
    reference_density: float = 5.0
    speed_floor: float = 0.2
    radius: int = 1


@dataclass(frozen=True)
class DecisionParams:
    """Normalization anchors and affordability rules for the decision model.

    Each anchor pair maps a raw quantity onto [0, 1] with 1 at ``best`` and 0
    at ``worst`` (clipped outside).
    """

    vehicle_lifetime_years: float = 5.0
    fuel_price: float = 15.0
    income_proxy: Mapping[int, float] = field(
        default_factory=lambda: {1: 10.0, 2: 28.0, 3: 80.0}
    )
    affordability_multiplier: float = 0.45
    acquisition_anchor: tuple[float, float] = (0.0, 15.0)
    operating_anchor: tuple[float, float] = (0.0, 15.0)
    commute_time_anchor: tuple[float, float] = (10.0, 120.0)
    pollution_anchor: tuple[float, float] = (0.0, 250.0)


@dataclass(frozen=True)
class ScenarioConfig:
    population_scale: float = 1000.0
    n_agents: int = 1200
    horizon_years: int = 10
    ticks_per_period: int = 30
    replications: int = 100
    rng_seed: int = 20240520
    initial_mode_shares: Mapping[str, float] = field(
        default_factory=lambda: {"motorcycle": 0.20, "car": 0.43, "transit": 0.37}
    )
    income_level_shares: Mapping[int, float] = field(
        default_factory=lambda: {1: 0.34, 2: 0.42, 3: 0.24}
    )
    alpha: float = 0.48
    attribute_weights: Mapping[int, Mapping[str, float]] = field(
        default_factory=_default_weights
    )
    threshold_params: Mapping[str, ThresholdParams] = field(
        default_factory=_default_thresholds
    )
    mode_params: Mapping[str, ModeParams] = field(default_factory=_default_modes)
    network_params: NetworkParams = field(default_factory=NetworkParams)
    policy: PolicySpec = field(default_factory=PolicySpec)
    traffic: TrafficParams = field(default_factory=TrafficParams)
    decision: DecisionParams = field(default_factory=DecisionParams)

    def __post_init__(self):
        validate(self)

    def with_policy(self, fare_free_transit: bool, activation_period: int | None = None):
        """Copy of this config with the fare policy switched on or off."""
        period = self.policy.activation_period if activation_period is None else activation_period
        return replace(self, policy=PolicySpec(fare_free_transit, period))

    def weight_matrix(self):
        """Weights as a (3, n_attributes) array indexed by income level - 1."""
        import numpy as np

        return np.array(
            [[self.attribute_weights[lvl][a] for a in ATTRIBUTES] for lvl in INCOME_LEVELS]
        )


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _check_shares(shares: Mapping, keys, name: str):
    _check(set(shares) == set(keys), f"{name} must have exactly the keys {list(keys)}")
    _check(all(v >= 0 for v in shares.values()), f"{name} must be non-negative")
    _check(abs(sum(shares.values()) - 1.0) <= _SUM_TOL, f"{name}: shares must sum to 1")


def _unit(x: float) -> bool:
    return 0.0 <= x <= 1.0


def validate(cfg: ScenarioConfig) -> None:
    """Raise :class:`ConfigError` naming the first violated invariant."""
    _check(cfg.population_scale > 0, "population_scale must be positive")
    _check(cfg.n_agents >= cfg.network_params.m0 + 1, "n_agents must be at least m0 + 1")
    _check(cfg.horizon_years >= 1, "horizon_years must be at least 1")
    _check(cfg.ticks_per_period >= 1, "ticks_per_period must be at least 1")
    _check(cfg.replications >= 1, "replications must be at least 1")
    _check_shares(cfg.initial_mode_shares, MODES, "initial_mode_shares")
    _check_shares(cfg.income_level_shares, INCOME_LEVELS, "income_level_shares")
    _check(_unit(cfg.alpha), "alpha must lie in [0, 1]")

    _check(set(cfg.attribute_weights) == set(INCOME_LEVELS), "weights needed for each income level")
    for lvl, w in cfg.attribute_weights.items():
        _check(set(w) == set(ATTRIBUTES), f"weights for level {lvl} must cover {list(ATTRIBUTES)}")
        _check(all(v >= 0 for v in w.values()), f"weights for level {lvl} must be non-negative")
        _check(abs(sum(w.values()) - 1.0) <= _SUM_TOL, f"weights for level {lvl} must sum to 1")

    _check(set(cfg.threshold_params) == set(MODES), "thresholds needed for each mode")
    for mode, t in cfg.threshold_params.items():
        for name in ("satisfaction_mean", "satisfaction_sd", "uncertainty_mean", "uncertainty_sd"):
            _check(_unit(getattr(t, name)), f"thresholds.{mode}.{name} must lie in [0, 1]")

    _check(set(cfg.mode_params) == set(MODES), "mode parameters needed for each mode")
    for mode, p in cfg.mode_params.items():
        for f in fields(p):
            v = getattr(p, f.name)
            _check(math.isfinite(v) and v >= 0, f"modes.{mode}.{f.name} must be non-negative")
        for name in ("accident_probability", "comfort_score", "personal_security_score", "road_safety_score"):
            _check(_unit(getattr(p, name)), f"modes.{mode}.{name} must lie in [0, 1]")
        _check(p.free_flow_speed > 0, f"modes.{mode}.free_flow_speed must be positive")
        _check(p.occupancy >= 1, f"modes.{mode}.occupancy must be at least 1")

    net = cfg.network_params
    _check(1 <= net.m <= net.m0, "network: need 1 <= m <= m0")
    _check(net.homophily_multiplier >= 1, "network: homophily_multiplier must be >= 1")

    pol = cfg.policy
    _check(0 <= pol.activation_period < cfg.horizon_years, "policy.activation_period must be < horizon_years")

    tr = cfg.traffic
    _check(tr.width >= 1 and tr.height >= 1, "traffic grid must be non-empty")
    _check(tr.neighborhood_size >= 1, "traffic.neighborhood_size must be at least 1")
    nbx, nby = tr.width // tr.neighborhood_size, tr.height // tr.neighborhood_size
    _check(nbx * nby >= 2, "traffic grid needs a business district plus one residential neighborhood")
    _check(tr.patch_km > 0 and tr.tick_minutes > 0, "traffic: patch_km and tick_minutes must be positive")
    _check(0 < tr.speed_floor < 1, "traffic.speed_floor must lie in (0, 1)")
    _check(tr.decay >= 0 and tr.reference_density > 0 and tr.radius >= 0, "traffic: bad speed-decay coefficients")

    d = cfg.decision
    _check(d.vehicle_lifetime_years > 0, "decision.vehicle_lifetime_years must be positive")
    _check(set(d.income_proxy) == set(INCOME_LEVELS), "decision.income_proxy needed for each income level")
    for name in ("acquisition_anchor", "operating_anchor", "commute_time_anchor", "pollution_anchor"):
        best, worst = getattr(d, name)
        _check(best != worst, f"decision.{name}: best and worst must differ")


def apply_policy(config: ScenarioConfig, period: int) -> dict[str, ModeParams]:
    """Mode parameters in effect during ``period``.

    With the fare-free policy active the transit fare is zero; nothing else
    changes.
    """
    params = dict(config.mode_params)
    pol = config.policy
    if pol.fare_free_transit and period >= pol.activation_period:
        params["transit"] = replace(params["transit"], fare_per_trip=0.0)
    return params


# --- serialization -------------------------------------------------------

def to_dict(cfg: ScenarioConfig) -> dict[str, Any]:
    d = cfg.decision
    return {
        "simulation": {
            "population_scale": cfg.population_scale,
            "n_agents": cfg.n_agents,
            "horizon_years": cfg.horizon_years,
            "ticks_per_period": cfg.ticks_per_period,
            "replications": cfg.replications,
            "rng_seed": cfg.rng_seed,
        },
        "population": {
            "initial_mode_shares": dict(cfg.initial_mode_shares),
            "income_level_shares": {str(k): v for k, v in cfg.income_level_shares.items()},
        },
        "modes": {m: asdict(p) for m, p in cfg.mode_params.items()},
        "network": asdict(cfg.network_params),
        "weights": {str(k): dict(v) for k, v in cfg.attribute_weights.items()},
        "thresholds": {m: asdict(t) for m, t in cfg.threshold_params.items()},
        "policy": asdict(cfg.policy),
        "traffic": asdict(cfg.traffic),
        "decision": {
            "alpha": cfg.alpha,
            **{f.name: getattr(d, f.name) for f in fields(d) if f.name != "income_proxy"},
            "income_proxy": {str(k): v for k, v in d.income_proxy.items()},
        },
    }


def _levels(m: Mapping) -> dict[int, Any]:
    try:
        return {int(k): v for k, v in m.items()}
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"income level keys must be integers: {exc}") from None


def _known(section: str, data: Mapping, cls) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    _check(not unknown, f"{section}: unknown fields {sorted(unknown)}")
    return dict(data)


def from_dict(data: Mapping[str, Any]) -> ScenarioConfig:
    """Build a validated config from a parsed document, defaulting omitted fields."""
    _check(isinstance(data, Mapping), "config document must be a JSON object")
    sections = {"simulation", "population", "modes", "network", "weights", "thresholds", "policy", "traffic", "decision"}
    unknown = set(data) - sections
    _check(not unknown, f"unknown config sections {sorted(unknown)}")
    kw: dict[str, Any] = {
        f.name: f.default if f.default_factory is MISSING else f.default_factory()
        for f in fields(ScenarioConfig)
    }

    sim = data.get("simulation", {})
    allowed = {"population_scale", "n_agents", "horizon_years", "ticks_per_period", "replications", "rng_seed"}
    _check(set(sim) <= allowed, f"simulation: unknown fields {sorted(set(sim) - allowed)}")
    kw.update(sim)

    pop = data.get("population", {})
    _check(set(pop) <= {"initial_mode_shares", "income_level_shares"}, "population: unknown fields")
    if "initial_mode_shares" in pop:
        kw["initial_mode_shares"] = dict(pop["initial_mode_shares"])
    if "income_level_shares" in pop:
        kw["income_level_shares"] = _levels(pop["income_level_shares"])

    if "modes" in data:
        modes = dict(kw["mode_params"])
        for name, overrides in data["modes"].items():
            _check(name in MODES, f"modes: unknown mode {name!r}")
            modes[name] = replace(modes[name], **_known(f"modes.{name}", overrides, ModeParams))
        kw["mode_params"] = modes

    if "network" in data:
        kw["network_params"] = replace(kw["network_params"], **_known("network", data["network"], NetworkParams))

    if "weights" in data:
        weights = {k: dict(v) for k, v in kw["attribute_weights"].items()}
        for lvl, w in _levels(data["weights"]).items():
            _check(lvl in INCOME_LEVELS, f"weights: unknown income level {lvl}")
            weights[lvl] = dict(w)
        kw["attribute_weights"] = weights

    if "thresholds" in data:
        th = dict(kw["threshold_params"])
        for name, overrides in data["thresholds"].items():
            _check(name in MODES, f"thresholds: unknown mode {name!r}")
            th[name] = replace(th[name], **_known(f"thresholds.{name}", overrides, ThresholdParams))
        kw["threshold_params"] = th

    if "policy" in data:
        kw["policy"] = replace(kw["policy"], **_known("policy", data["policy"], PolicySpec))

    if "traffic" in data:
        kw["traffic"] = replace(kw["traffic"], **_known("traffic", data["traffic"], TrafficParams))

    if "decision" in data:
        dec = dict(data["decision"])
        if "alpha" in dec:
            kw["alpha"] = dec.pop("alpha")
        if "income_proxy" in dec:
            dec["income_proxy"] = _levels(dec["income_proxy"])
        for name in list(dec):
            if name.endswith("_anchor"):
                dec[name] = tuple(dec[name])
        kw["decision"] = replace(kw["decision"], **_known("decision", dec, DecisionParams))

    try:
        return ScenarioConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | os.PathLike | None = None) -> ScenarioConfig:
    """Load a JSON config file; an empty file yields the defaults.

    When ``path`` is None the ``COMMUTE_ABM_CONFIG`` environment variable is
    consulted, and failing that the defaults are returned.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
        if not path:
            return ScenarioConfig()
    text = Path(path).read_text()
    if not text.strip():
        return ScenarioConfig()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON: {exc}") from None
    return from_dict(data)


def write_config(cfg: ScenarioConfig, path: str | os.PathLike) -> None:
    Path(path).write_text(json.dumps(to_dict(cfg), indent=2) + "\n")
