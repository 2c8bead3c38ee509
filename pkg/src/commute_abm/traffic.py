"""Peak-hour traffic on a patch grid.

Each tick every commuter who has not yet arrived looks at the car-equivalents
around its patch (excluding its own), slows down logarithmically with that
density, and advances along an L-shaped route: first along x to the
workplace column, then along y.  Arrived commuters leave the grid.
Within a tick all agents move on the same occupancy snapshot, so the result
does not depend on processing order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .config import MODES, ModeParams, TrafficParams


@dataclass
class WorldGrid:
    width: int
    height: int
    occupancy: np.ndarray = None

    def __post_init__(self):
        if self.occupancy is None:
            self.occupancy = np.zeros((self.width, self.height))

    def place(self, xy: np.ndarray, pce: np.ndarray):
        """Reset occupancy to the given agents' car-equivalents."""
        flat = xy[:, 0] * self.height + xy[:, 1]
        self.occupancy = np.bincount(flat, weights=pce, minlength=self.width * self.height).reshape(
            self.width, self.height)


def box_sum(occupancy: np.ndarray, radius: int) -> np.ndarray:
    """Sum over the (2r+1) x (2r+1) window around every patch, truncated at edges."""
    w, h = occupancy.shape
    sat = np.zeros((w + 1, h + 1))
    sat[1:, 1:] = occupancy.cumsum(0).cumsum(1)
    x0 = np.clip(np.arange(w) - radius, 0, w)
    x1 = np.clip(np.arange(w) + radius + 1, 0, w)
    y0 = np.clip(np.arange(h) - radius, 0, h)
    y1 = np.clip(np.arange(h) + radius + 1, 0, h)
    return (sat[np.ix_(x1, y1)] - sat[np.ix_(x0, y1)]
            - sat[np.ix_(x1, y0)] + sat[np.ix_(x0, y0)])


def local_density(grid: WorldGrid, patch: tuple[int, int], radius: int) -> float:
    x, y = patch
    if not (0 <= x < grid.width and 0 <= y < grid.height):
        raise IndexError(f"patch {patch} outside a {grid.width}x{grid.height} grid")
    return float(grid.occupancy[max(0, x - radius):x + radius + 1,
                                max(0, y - radius):y + radius + 1].sum())


def effective_speed(free_flow, density, k: float, rho0: float, floor: float):
    """Speed under congestion: ``free_flow * max(floor, 1 - k ln(1 + density/rho0))``."""
    factor = np.maximum(floor, 1.0 - k * np.log1p(np.asarray(density) / rho0))
    out = free_flow * factor
    return float(out) if np.ndim(out) == 0 else out


def route_position(home: np.ndarray, work: np.ndarray, steps: np.ndarray) -> np.ndarray:
    """Patch reached after ``steps`` patch moves along the x-then-y route."""
    d = work - home
    adx = np.abs(d[:, 0])
    sx = np.minimum(steps, adx)
    sy = np.clip(steps - adx, 0, np.abs(d[:, 1]))
    return np.column_stack([home[:, 0] + np.sign(d[:, 0]) * sx,
                            home[:, 1] + np.sign(d[:, 1]) * sy])


@dataclass
class TripLog:
    """Per-agent results of one peak hour (arrays of length n)."""

    mode: np.ndarray
    route_km: np.ndarray
    km_traveled: np.ndarray
    travel_time_min: np.ndarray
    arrived: np.ndarray
    co2_g: np.ndarray = None
    had_accident: np.ndarray = None

    def __len__(self):
        return len(self.mode)


TraceHook = Callable[[int, np.ndarray, np.ndarray, np.ndarray], None]


@dataclass
class PeakHour:
    """Mutable state of one peak hour; advance it with :meth:`tick`."""

    home: np.ndarray
    work: np.ndarray
    mode: np.ndarray
    mode_params: Mapping[str, ModeParams]
    params: TrafficParams
    grid: WorldGrid = None
    tick_index: int = 0
    log: TripLog = field(init=False)

    def __post_init__(self):
        n = len(self.mode)
        mp = [self.mode_params[m] for m in MODES]
        self.free_flow = np.array([p.free_flow_speed for p in mp])[self.mode]
        self.pce = np.array([p.pce_per_rider for p in mp])[self.mode]
        self.route_km = np.abs(self.work - self.home).sum(axis=1) * self.params.patch_km
        self.progress = np.zeros(n)
        self.xy = self.home.copy()
        self.log = TripLog(
            mode=self.mode.copy(),
            route_km=self.route_km,
            km_traveled=np.zeros(n),
            travel_time_min=np.zeros(n),
            arrived=self.route_km <= 0,
        )
        self.speed = np.zeros(n)
        if self.grid is None:
            self.grid = WorldGrid(self.params.width, self.params.height)
        self._place()

    def _place(self):
        active = ~self.log.arrived
        self.grid.place(self.xy[active], self.pce[active])

    def en_route_pce(self) -> float:
        return float(self.pce[~self.log.arrived].sum())

    def tick(self) -> TripLog:
        tp = self.params
        log = self.log
        active = ~log.arrived
        idx = np.flatnonzero(active)
        if len(idx):
            box = box_sum(self.grid.occupancy, tp.radius)
            x, y = self.xy[idx, 0], self.xy[idx, 1]
            density = np.maximum(box[x, y] - self.pce[idx], 0.0)
            speed = effective_speed(self.free_flow[idx], density, tp.decay,
                                    tp.reference_density, tp.speed_floor)
            step = speed * tp.tick_minutes / 60.0
            remaining = self.route_km[idx] - self.progress[idx]
            arrive = step >= remaining
            dist = np.where(arrive, remaining, step)
            dt = np.where(arrive, remaining / speed * 60.0, tp.tick_minutes)

            self.progress[idx] += dist
            log.km_traveled[idx] += dist
            log.travel_time_min[idx] += dt
            log.arrived[idx] = arrive
            self.speed[:] = 0.0
            self.speed[idx] = speed

            steps = np.floor(self.progress[idx] / tp.patch_km + 1e-9).astype(int)
            self.xy[idx] = route_position(self.home[idx], self.work[idx], steps)
            self.xy[idx[arrive]] = self.work[idx[arrive]]
        self.tick_index += 1
        self._place()
        return log

    def finish(self, emission_per_rider_km: np.ndarray) -> TripLog:
        self.log.co2_g = emission_per_rider_km[self.mode] * self.log.km_traveled
        return self.log


def simulate_peak_hour(home, work, mode, mode_params: Mapping[str, ModeParams],
                       params: TrafficParams, ticks: int,
                       trace: TraceHook | None = None) -> TripLog:
    """Run ``ticks`` ticks and return the trip log.

    ``trace``, when given, is called after each tick with
    ``(tick, agent_ids, xy, speed)`` for the agents that moved during it.
    """
    ph = PeakHour(np.asarray(home), np.asarray(work), np.asarray(mode), mode_params, params)
    for t in range(ticks):
        moving = ~ph.log.arrived
        if not moving.any():
            break
        ph.tick()
        if trace is not None:
            ids = np.flatnonzero(moving)
            trace(t, ids, ph.xy[ids], ph.speed[ids])
    ef = np.array([mode_params[m].emission_per_rider_km for m in MODES])
    return ph.finish(ef)


def sample_accidents(modes: np.ndarray, mode_params: Mapping[str, ModeParams],
                     rng: np.random.Generator) -> np.ndarray:
    """Independent yearly accident flags; one uniform is drawn per agent regardless of mode."""
    p = np.array([mode_params[m].accident_probability for m in MODES])
    return rng.random(len(modes)) < p[np.asarray(modes)]
