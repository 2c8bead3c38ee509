"""
Which strategy do commuters use?
================================

Every year each agent repeats, imitates, deliberates or inquires. The audit
hook records the choice, so we can count strategies and mode switches.
"""

import numpy as np

from commute_abm import MODES, ScenarioConfig, run_replication
from commute_abm.decision import STRATEGIES

cfg = ScenarioConfig().with_policy(True)
records = []
run_replication(cfg, 0, audit=lambda period, rec: records.append(rec))

print("year " + " ".join(f"{s:>10}" for s in STRATEGIES) + "   switched")
for year, rec in enumerate(records):
    counts = np.bincount(rec.strategy, minlength=len(STRATEGIES))
    switched = (rec.prev_mode != rec.new_mode).sum()
    print(f"{year:4d} " + " ".join(f"{c:10d}" for c in counts) + f" {switched:10d}")

# where did first-year switchers go?
first = records[0]
moved = first.prev_mode != first.new_mode
for a in range(len(MODES)):
    for b in range(len(MODES)):
        k = int(np.sum(moved & (first.prev_mode == a) & (first.new_mode == b)))
        if k:
            print(f"{MODES[a]:>10} -> {MODES[b]:<10} {k}")
