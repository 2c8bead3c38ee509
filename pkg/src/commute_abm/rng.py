"""Named, independent random streams per replication.

Each concern listed in :data:`CONCERNS` gets its own generator derived from
``(master seed, replication id, concern)``, so consuming more draws in one
never shifts another.  Two scenarios run with the same seed therefore see the
same agents and the same accident draws.
"""

from __future__ import annotations

import numpy as np

CONCERNS = ("population", "network", "traffic")


def stream(seed: int, replication_id: int, concern: str) -> np.random.Generator:
    key = CONCERNS.index(concern)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(replication_id, key))
    return np.random.default_rng(ss)


def streams(seed: int, replication_id: int) -> dict[str, np.random.Generator]:
    return {c: stream(seed, replication_id, c) for c in CONCERNS}
