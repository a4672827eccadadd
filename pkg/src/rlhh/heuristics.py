"""Low-level network reduction heuristics BE1, BE2, BE3, BN and BP.

Each heuristic maps a pricing network plus dual information to an edge mask.
Only edges between two customer/trip nodes are candidates for removal; edges
leaving the source or entering the sink are always kept.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .network import PricingNetwork

log = logging.getLogger(__name__)

ACTIONS = ("BE1", "BE2", "BE3", "BN", "BP")
SCHEDULES = {
    "BE1": (0.1, 0.3, 0.5, 0.7),
    "BE2": (0.1, 0.2, 0.3),
    "BE3": (0.3, 0.5, 0.7),     # multiples of |V|
    "BN": (0.9, 0.7, 0.3),
    "BP": (3, 5, 7, 9),
}


def _ceil(x: float) -> int:
    # 0.3 * 10 evaluates to 3.0000000000000004
    return math.ceil(round(x, 9))


def be1(net: PricingNetwork, duals, alpha: float) -> np.ndarray:
    """Drop edges whose original cost exceeds ``alpha * max(duals)``."""
    pi_max = float(np.max(duals))
    if pi_max <= 0:
        log.info("BE1: non-positive max dual %.3g, keeping every edge", pi_max)
        return np.ones(net.n_edges, dtype=bool)
    return ~net.inner | (net.costs <= alpha * pi_max)


def be2(net: PricingNetwork, cbar, alpha: float) -> np.ndarray:
    """Keep the ``ceil(alpha * |E|)`` prunable edges of lowest modified cost."""
    inner = np.flatnonzero(net.inner)
    keep = _ceil(alpha * len(inner))
    # edges are stored in (tail, head) order, so a stable sort breaks ties by it
    order = np.argsort(np.asarray(cbar)[inner], kind="stable")
    mask = ~net.inner.copy()
    mask[inner[order[:keep]]] = True
    return mask


def be3(net: PricingNetwork, cbar, n_keep: int) -> np.ndarray:
    """Keep, per node, the ``n_keep`` cheapest in-edges and out-edges."""
    if n_keep < 1:
        raise ValueError("N must be >= 1")
    cbar = np.asarray(cbar)
    mask = ~net.inner.copy()
    inner = np.flatnonzero(net.inner)
    for ends in (net.heads, net.tails):
        groups: dict[int, list[int]] = {}
        for e in inner:
            groups.setdefault(int(ends[e]), []).append(int(e))
        for edges in groups.values():
            edges.sort(key=lambda e: (cbar[e], net.tails[e], net.heads[e]))
            mask[edges[:n_keep]] = True
    return mask


def bn_probabilities(duals, beta: float) -> np.ndarray | None:
    duals = np.asarray(duals, dtype=float)
    lo, hi = duals.min(), duals.max()
    if hi == lo:
        return None
    return beta * (duals - lo) / (hi - lo)


def bn(net: PricingNetwork, duals, beta: float, rng: np.random.Generator) -> np.ndarray:
    """Remove each edge independently with probability equal to its head's
    dual scaled into ``[0, beta]``."""
    probs = bn_probabilities(duals, beta)
    if probs is None:
        log.info("BN: constant duals, keeping every edge")
        return np.ones(net.n_edges, dtype=bool)
    inner = np.flatnonzero(net.inner)
    p = probs[net.heads[inner] - 1]
    mask = np.ones(net.n_edges, dtype=bool)
    mask[inner] = rng.random(len(inner)) >= p
    return mask


def bp_normalize(cbar) -> np.ndarray:
    """Map modified costs into [0, 1], sending everything at or below the
    midpoint of their range to 0."""
    cbar = np.asarray(cbar, dtype=float)
    lo, hi = cbar.min(), cbar.max()
    if hi == lo:
        return np.zeros_like(cbar)
    return np.maximum(0.0, ((cbar - lo) - (hi - cbar)) / (hi - lo))


def k_shortest_paths(net: PricingNetwork, weights, k: int) -> list[tuple[float, list[int]]]:
    """Up to ``k`` loopless source-to-sink paths of least total weight, as
    (weight, edge list) pairs in non-decreasing weight order."""
    g = nx.DiGraph()
    g.add_nodes_from(range(net.n_nodes))
    for e, (i, j) in enumerate(zip(net.tails.tolist(), net.heads.tolist())):
        g.add_edge(i, j, weight=float(weights[e]), eid=e)
    out = []
    try:
        paths = nx.shortest_simple_paths(g, net.source, net.sink, weight="weight")
        for nodes in itertools.islice(paths, k):
            edges = [g[a][b]["eid"] for a, b in zip(nodes, nodes[1:])]
            out.append((float(sum(weights[e] for e in edges)), edges))
    except nx.NetworkXNoPath:
        pass
    return out


def bp(net: PricingNetwork, cbar, k: int) -> np.ndarray:
    """Keep only the edges on the ``k`` shortest paths of the normalized network."""
    if k < 1:
        raise ValueError("K must be >= 1")
    weights = bp_normalize(cbar)
    mask = ~net.inner.copy()
    for _, edges in k_shortest_paths(net, weights, k):
        mask[edges] = True
    return mask


def apply_heuristic(action: int | str, net: PricingNetwork, duals, cbar, value,
                    rng: np.random.Generator | None = None) -> np.ndarray:
    kind = ACTIONS[action] if isinstance(action, int) else action
    if kind == "BE1":
        return be1(net, duals, value)
    if kind == "BE2":
        return be2(net, cbar, value)
    if kind == "BE3":
        return be3(net, cbar, _ceil(value * net.n_nodes))
    if kind == "BN":
        return bn(net, duals, value, rng if rng is not None else np.random.default_rng(0))
    if kind == "BP":
        return bp(net, cbar, int(value))
    raise ValueError(f"unknown heuristic {kind!r}")


# --------------------------------------------------------------------------
# Parameter schedules
# --------------------------------------------------------------------------

EXHAUSTED = None


@dataclass
class HeuristicAction:
    """A heuristic together with its retry schedule.

    The cursor moves forward on every failure and persists across CG
    iterations; call ``reset`` at the start of an episode.
    """

    kind: str
    values: tuple
    cursor: int = 0

    @classmethod
    def of(cls, kind: str) -> "HeuristicAction":
        return cls(kind, SCHEDULES[kind])

    @property
    def index(self) -> int:
        return ACTIONS.index(self.kind)

    @property
    def exhausted(self) -> bool:
        return self.cursor >= len(self.values)

    def current(self):
        return EXHAUSTED if self.exhausted else self.values[self.cursor]

    def fail(self):
        if not self.exhausted:
            self.cursor += 1

    def reset(self):
        self.cursor = 0


def next_parameter(action: HeuristicAction, failed: bool = False):
    """Advance on a failure signal, then return the current value (or
    ``EXHAUSTED``)."""
    if failed:
        action.fail()
    return action.current()


def fresh_actions() -> list[HeuristicAction]:
    return [HeuristicAction.of(k) for k in ACTIONS]
