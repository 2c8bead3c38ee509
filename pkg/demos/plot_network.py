"""
Who talks to whom
=================

Grow the commuters' social network and check the two things that matter for
imitation: a heavy-tailed degree distribution and a bias toward friends of
the same income level.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from commute_abm.config import NetworkParams
from commute_abm.network import build_network, degree_tail_exponent, homophily_fraction
from commute_abm.population import apportion

rng = np.random.default_rng(1)
n = 10_000
income = rng.permutation(np.repeat([1, 2, 3], apportion([0.34, 0.42, 0.24], n)))

fig, ax = plt.subplots(figsize=(6, 4))
for h in (1.0, 3.0):
    net = build_network(income, NetworkParams(homophily_multiplier=h), rng)
    deg = net.degree
    ks = np.unique(deg)
    ccdf = [(deg >= k).mean() for k in ks]
    ax.loglog(ks, ccdf, ".", label=f"homophily x{h:g}")
    same, chance = homophily_fraction(net, income)
    print(f"x{h:g}: tail exponent {degree_tail_exponent(deg):.2f}, "
          f"same-income edges {same:.2f} (chance {chance:.2f})")
ax.set_xlabel("degree k")
ax.set_ylabel("P(degree >= k)")
ax.legend()
fig.tight_layout()
fig.savefig("degree_ccdf.png", dpi=120)
