"""Pricing networks for VRPTW and BDSP.

Node numbering is shared by both problems: ``0`` is the source, ``1..n`` are
customers (trips) in instance order and ``n + 1`` is the sink. Covering row
``k`` of the master problem belongs to node ``k + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .instances import BdspInstance, Instance, VrptwInstance


@dataclass(frozen=True, eq=False)
class PricingNetwork:
    kind: str
    n: int                      # customers / trips
    tails: np.ndarray           # (E,) int
    heads: np.ndarray           # (E,) int
    costs: np.ndarray           # (E,) float
    consumption: np.ndarray     # (E, R) float
    resets: np.ndarray          # (E, R) bool: resource restarts from zero on this edge
    lower: np.ndarray           # (V, R) resource window lower bounds
    upper: np.ndarray           # (V, R) resource window upper bounds
    resources: tuple[str, ...]

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.n + 1

    @property
    def n_nodes(self) -> int:
        return self.n + 2

    @property
    def n_edges(self) -> int:
        return len(self.tails)

    @cached_property
    def inner(self) -> np.ndarray:
        """Edges between two customer/trip nodes; the only ones heuristics prune."""
        return (self.tails != self.source) & (self.heads != self.sink)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {(int(i), int(j)): e for e, (i, j) in enumerate(zip(self.tails, self.heads))}

    def full_view(self) -> "NetworkView":
        return NetworkView(self, np.ones(self.n_edges, dtype=bool))

    def view(self, mask) -> "NetworkView":
        return apply_mask(self, mask)


@dataclass(frozen=True, eq=False)
class NetworkView:
    """Read-only subset of a network's edges selected by a boolean mask."""

    network: PricingNetwork
    mask: np.ndarray

    @cached_property
    def edge_ids(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def n_edges(self) -> int:
        return len(self.edge_ids)

    @cached_property
    def out_edges(self) -> list[list[int]]:
        net = self.network
        out: list[list[int]] = [[] for _ in range(net.n_nodes)]
        for e in self.edge_ids:
            out[net.tails[e]].append(int(e))
        return out


def apply_mask(net: PricingNetwork, mask) -> NetworkView:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (net.n_edges,):
        raise ValueError(f"mask length {mask.shape} does not match {net.n_edges} edges")
    return NetworkView(net, mask.copy())


def _finish(kind, n, edges, lower, upper, resources) -> PricingNetwork:
    edges.sort(key=lambda e: (e[0], e[1]))
    n_res = len(resources)
    return PricingNetwork(
        kind=kind,
        n=n,
        tails=np.array([e[0] for e in edges], dtype=np.int64),
        heads=np.array([e[1] for e in edges], dtype=np.int64),
        costs=np.array([e[2] for e in edges], dtype=float),
        consumption=np.array([e[3] for e in edges], dtype=float).reshape(len(edges), n_res),
        resets=np.array([e[4] for e in edges], dtype=bool).reshape(len(edges), n_res),
        lower=np.asarray(lower, dtype=float),
        upper=np.asarray(upper, dtype=float),
        resources=resources,
    )


def build_vrptw_network(inst: VrptwInstance) -> PricingNetwork:
    """Resources are (time, load). Edge (i, j) between customers exists iff
    ``due_j - ready_i >= service_i + dist_ij``."""
    n = inst.n
    nodes = (inst.depot, *inst.customers)
    sink = n + 1

    def dist(a, b):
        return math.hypot(a.x - b.x, a.y - b.y)

    no_reset = (False, False)
    edges = []
    d = inst.depot
    for j in range(1, n + 1):
        c = nodes[j]
        t = dist(d, c)
        edges.append((0, j, t + inst.fixed_cost, (t, c.demand), no_reset))
        back = dist(c, d)
        edges.append((j, sink, back, (c.service + back, 0.0), no_reset))
    for i in range(1, n + 1):
        a = nodes[i]
        for j in range(1, n + 1):
            if i == j:
                continue
            b = nodes[j]
            t = dist(a, b)
            if b.due - a.ready >= a.service + t:
                edges.append((i, j, t, (a.service + t, b.demand), no_reset))

    lower = [[d.ready, 0.0]] + [[c.ready, 0.0] for c in inst.customers] + [[d.ready, 0.0]]
    upper = ([[d.due, inst.capacity]] + [[c.due, inst.capacity] for c in inst.customers]
             + [[d.due, inst.capacity]])
    return _finish("VRPTW", n, edges, lower, upper, ("time", "load"))


def build_bdsp_network(inst: BdspInstance) -> PricingNetwork:
    """Resources are (working, driving, continuous driving).

    Edge (i, j) exists iff trip j starts at least ``min_changeover`` after trip
    i ends; its cost is ``end_j - end_i``. Continuous driving restarts when the
    gap between trips is at least ``break_threshold``.
    """
    n = inst.n
    trips = inst.trips
    sink = n + 1
    edges = []
    for j in range(1, n + 1):
        tj = trips[j - 1]
        dur = float(tj.duration)
        edges.append((0, j, inst.fixed_cost + dur, (dur, dur, dur), (False, False, False)))
        edges.append((j, sink, 0.0, (0.0, 0.0, 0.0), (False, False, False)))
    for i in range(1, n + 1):
        ti = trips[i - 1]
        for j in range(1, n + 1):
            tj = trips[j - 1]
            gap = tj.start - ti.end
            if i != j and gap >= inst.min_changeover:
                dur = float(tj.duration)
                cost = float(tj.end - ti.end)
                reset = gap >= inst.break_threshold
                edges.append((i, j, cost, (cost, dur, dur), (False, False, reset)))

    lower = [[0.0, 0.0, 0.0]] * (n + 2)
    upper = [[inst.max_working, inst.max_driving, inst.max_continuous]] * (n + 2)
    return _finish("BDSP", n, edges, lower, upper, ("working", "driving", "continuous"))


def build_network(inst: Instance) -> PricingNetwork:
    if isinstance(inst, VrptwInstance):
        return build_vrptw_network(inst)
    if isinstance(inst, BdspInstance):
        return build_bdsp_network(inst)
    raise TypeError(f"unsupported instance type {type(inst).__name__}")


def modified_costs(net: PricingNetwork, duals) -> np.ndarray:
    """Edge cost minus the dual of the covering row owned by the edge's head."""
    duals = np.asarray(duals, dtype=float)
    if duals.shape != (net.n,):
        raise ValueError(f"expected {net.n} duals, got shape {duals.shape}")
    padded = np.concatenate(([0.0], duals, [0.0]))
    return net.costs - padded[net.heads]


def is_acyclic(net: PricingNetwork) -> bool:
    indeg = np.bincount(net.heads, minlength=net.n_nodes)
    out: list[list[int]] = [[] for _ in range(net.n_nodes)]
    for i, j in zip(net.tails, net.heads):
        out[i].append(int(j))
    stack = [v for v in range(net.n_nodes) if indeg[v] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    return seen == net.n_nodes
