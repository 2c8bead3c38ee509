"""Scale-free social network with socioeconomic homophily.

Growth follows preferential attachment: after an initial clique of ``m0``
nodes, each new node links to ``m`` distinct earlier nodes, picked with
probability proportional to their degree, boosted by
``homophily_multiplier`` when the candidate shares the newcomer's income
level.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .config import MODES, NetworkParams


@dataclass(frozen=True)
class SocialNetwork:
    """Undirected simple graph in CSR form.

    ``indices[indptr[i]:indptr[i+1]]`` is the sorted neighbor list of node i.
    """

    indptr: np.ndarray
    indices: np.ndarray

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def matrix(self) -> sparse.csr_matrix:
        data = np.ones(len(self.indices), dtype=np.int64)
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def edges(self) -> np.ndarray:
        """Each undirected edge once as ``(src, dst)`` with ``src < dst``."""
        src = np.repeat(np.arange(self.n), self.degree)
        keep = src < self.indices
        return np.column_stack([src[keep], self.indices[keep]])

    def is_connected(self) -> bool:
        if self.n == 0:
            return True
        ncomp, _ = connected_components(self.matrix(), directed=False)
        return ncomp == 1

    @classmethod
    def from_edges(cls, n: int, edges) -> "SocialNetwork":
        edges = np.asarray(edges, dtype=int).reshape(-1, 2)
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.concatenate([[0], np.cumsum(np.bincount(src, minlength=n))])
        return cls(indptr=indptr, indices=dst)


def _income_array(agents) -> np.ndarray:
    if hasattr(agents, "income"):
        return np.asarray(agents.income)
    return np.array([a.income_level if hasattr(a, "income_level") else a for a in agents])


def build_network(agents, params: NetworkParams, rng: np.random.Generator) -> SocialNetwork:
    """Grow a homophilous preferential-attachment network over ``agents``.

    ``agents`` may be a :class:`~commute_abm.population.Population`, a list of
    agents, or a plain sequence of income levels.  Targets for each new node
    are redrawn until ``m`` distinct ones are found.
    """
    income = _income_array(agents)
    n = len(income)
    m0, m, h = params.m0, params.m, params.homophily_multiplier
    levels, group = np.unique(income, return_inverse=True)
    group = group.tolist()
    n_groups = len(levels)

    # endpoint lists: node j appears degree(j) times in the list of its group
    stubs: list[list[int]] = [[] for _ in range(n_groups)]
    edges: list[tuple[int, int]] = []
    for i in range(min(m0, n)):
        for j in range(i):
            edges.append((j, i))
            stubs[group[i]].append(i)
            stubs[group[j]].append(j)

    rand = rng.random
    for i in range(m0, n):
        g = group[i]
        sizes = [len(s) for s in stubs]
        weights = [h * s if k == g else float(s) for k, s in enumerate(sizes)]
        total = sum(weights)
        chosen: list[int] = []
        while len(chosen) < m:
            if total == 0:
                # degree-free start (m0 == 1): uniform over existing nodes
                j = int(rand() * i)
            else:
                u = rand() * total
                k = 0
                while k < n_groups - 1 and u >= weights[k]:
                    u -= weights[k]
                    k += 1
                lst = stubs[k]
                j = lst[min(int(rand() * len(lst)), len(lst) - 1)]
            if j not in chosen:
                chosen.append(j)
        for j in chosen:
            edges.append((j, i))
            stubs[group[j]].append(j)
            stubs[g].append(i)

    return SocialNetwork.from_edges(n, edges)


def peer_mode_counts(net: SocialNetwork, modes: np.ndarray) -> np.ndarray:
    """Number of each node's neighbors using each mode, shape (n, 3)."""
    onehot = np.zeros((net.n, len(MODES)), dtype=np.int64)
    onehot[np.arange(net.n), modes] = 1
    return np.asarray(net.matrix() @ onehot)


def _mode_index(mode) -> int:
    return MODES.index(mode) if isinstance(mode, str) else int(mode)


def _agent_index(agent) -> int:
    return int(agent.id) if hasattr(agent, "id") else int(agent)


def _modes_array(agents) -> np.ndarray:
    if hasattr(agents, "mode"):
        return np.asarray(agents.mode)
    return np.array([_mode_index(a.current_mode) if hasattr(a, "current_mode") else _mode_index(a)
                     for a in agents])


def peers_using_mode(net: SocialNetwork, agent, mode, agents) -> float:
    """Fraction of ``agent``'s neighbors whose current mode is ``mode``."""
    nb = net.neighbors(_agent_index(agent))
    modes = _modes_array(agents)
    return float(np.mean(modes[nb] == _mode_index(mode)))


def most_common_peer_mode(net: SocialNetwork, agent, agents) -> str:
    """Modal neighbor mode; ties go to the earlier mode in motorcycle, car, transit order."""
    nb = net.neighbors(_agent_index(agent))
    counts = np.bincount(_modes_array(agents)[nb], minlength=len(MODES))
    return MODES[int(np.argmax(counts))]


def homophily_fraction(net: SocialNetwork, income) -> tuple[float, float]:
    """Observed share of same-income edges and the share expected from group sizes alone.

    The baseline is the probability that two distinct agents drawn at random
    share an income level.
    """
    income = _income_array(income)
    e = net.edges()
    observed = float(np.mean(income[e[:, 0]] == income[e[:, 1]]))
    _, counts = np.unique(income, return_counts=True)
    n = len(income)
    baseline = float(np.sum(counts * (counts - 1)) / (n * (n - 1)))
    return observed, baseline


def degree_tail_exponent(degree, k_min: int | None = None) -> float:
    """Power-law exponent of the degree distribution's upper tail.

    Fits a straight line to the log-log complementary cumulative
    distribution over degrees ``>= k_min`` (default: twice the minimum
    degree) and returns ``1 - slope``.  Degrees with fewer than five nodes at
    or above them are dropped to keep the sparse extreme tail from dominating.
    """
    degree = np.asarray(degree)
    if k_min is None:
        k_min = 2 * int(degree.min())
    ks = np.unique(degree[degree >= k_min])
    ccdf = np.array([(degree >= k).sum() for k in ks], dtype=float)
    keep = ccdf >= 5
    ks, ccdf = ks[keep], ccdf[keep] / len(degree)
    if len(ks) < 3:
        raise ValueError("too few distinct tail degrees for a fit")
    slope, _ = np.polyfit(np.log(ks), np.log(ccdf), 1)
    return float(1.0 - slope)


def scale_diagnostics(income_by_scale: dict, params: NetworkParams, rng: np.random.Generator) -> list[dict]:
    """Degree-distribution statistics for networks built at several population sizes.

    ``income_by_scale`` maps a label (e.g. the number of agents) to the
    income levels of that population.  Nothing is asserted; the rows are for
    judging at which scale the network looks scale-free.
    """
    rows = []
    for label, income in income_by_scale.items():
        net = build_network(income, params, rng)
        deg = net.degree
        try:
            gamma = degree_tail_exponent(deg)
        except ValueError:
            gamma = float("nan")
        obs, base = homophily_fraction(net, income)
        rows.append({
            "scale": label, "n": net.n, "mean_degree": float(deg.mean()),
            "max_degree": int(deg.max()), "tail_exponent": gamma,
            "same_income_edges": obs, "same_income_baseline": base,
            "connected": net.is_connected(),
        })
    return rows


def write_edge_list(net: SocialNetwork, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst"])
        w.writerows(net.edges().tolist())
