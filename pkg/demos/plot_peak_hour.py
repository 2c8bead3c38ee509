"""
One peak hour on the grid
=========================

Commuters leave their neighborhoods at the same moment and head for the
central business district. Watch the average speed drop as traffic piles
up near the center.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from commute_abm import MODES, ScenarioConfig
from commute_abm.population import synthesize_population
from commute_abm.traffic import PeakHour

cfg = ScenarioConfig()
pop = synthesize_population(cfg, np.random.default_rng(0))
hour = PeakHour(pop.home, pop.work, pop.mode, cfg.mode_params, cfg.traffic)

speeds = {m: [] for m in MODES}
for _ in range(cfg.ticks_per_period):
    moving = ~hour.log.arrived
    hour.tick()
    for k, m in enumerate(MODES):
        sel = moving & (pop.mode == k)
        speeds[m].append(hour.speed[sel].mean() if sel.any() else np.nan)

# a second run gives an occupancy snapshot ten minutes in
fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
for m, v in speeds.items():
    ax0.plot(np.arange(len(v)) * cfg.traffic.tick_minutes, v, label=m)
ax0.set_xlabel("minutes into the peak hour")
ax0.set_ylabel("mean speed of travelling agents (km/h)")
ax0.legend()

hour2 = PeakHour(pop.home, pop.work, pop.mode, cfg.mode_params, cfg.traffic)
for _ in range(5):
    hour2.tick()
im = ax1.imshow(hour2.grid.occupancy.T, origin="lower", cmap="magma")
ax1.set_title("car-equivalents per patch after 10 minutes")
fig.colorbar(im, ax=ax1)
fig.tight_layout()
fig.savefig("peak_hour.png", dpi=120)

log = hour.log
print(f"arrived within the hour: {log.arrived.mean():.1%}")
print(f"mean trip: {log.route_km.mean():.1f} km")
