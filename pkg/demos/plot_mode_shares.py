"""
Base case versus fare-free transit
==================================

Run both scenarios on the same seeds and plot how commuters redistribute
across modes over ten years.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from commute_abm import ScenarioConfig, compare_scenarios, run_paired

# 20 replications keeps the demo quick; the full experiment uses 100
cfg = ScenarioConfig(replications=20)
base, policy = run_paired(cfg)

years = np.arange(cfg.horizon_years)
fig, ax = plt.subplots(figsize=(7, 4))
for mode, color in zip(("motorcycle", "car", "transit"), ("tab:orange", "tab:blue", "tab:green")):
    ax.plot(years, base.mean("mode_share", mode), "-", color=color, label=f"{mode}, base")
    ax.plot(years, policy.mean("mode_share", mode), "--", color=color, label=f"{mode}, fare-free")
    lo, hi = policy.ci("mode_share", mode)
    ax.fill_between(years, lo, hi, color=color, alpha=0.15)
ax.set_xlabel("year")
ax.set_ylabel("share of commuters")
ax.legend(fontsize="small", ncol=2)
fig.tight_layout()
fig.savefig("mode_shares.png", dpi=120)

# final-year differences, policy minus base
last = cfg.horizon_years - 1
for row in compare_scenarios(base, policy):
    if row.period == last and row.mode in ("all", "transit"):
        print(f"{row.indicator:>14} {row.mode:>8}: {row.base_mean:10.3f} -> {row.policy_mean:10.3f}")
