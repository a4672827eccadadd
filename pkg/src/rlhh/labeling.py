"""Forward labeling for (E)SPPRC pricing, plus an exhaustive path enumerator
used as a test oracle."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .network import NetworkView, PricingNetwork

SPPRC = "spprc"
ESPPRC = "espprc"
NEG_EPS = 1e-6
DEFAULT_LABEL_BUDGET = 2_000_000
ENUMERATION_MAX_NODES = 14


@dataclass(frozen=True)
class Column:
    """A source-to-sink path priced as a master-problem variable."""

    nodes: tuple[int, ...]          # customer/trip nodes in visiting order
    edges: tuple[int, ...]          # edge indices into the network
    cost: float
    reduced_cost: float

    @property
    def cover(self) -> frozenset[int]:
        """Covering rows (0-based customer/trip index)."""
        return frozenset(v - 1 for v in self.nodes)

    def covering_vector(self, n: int) -> np.ndarray:
        a = np.zeros(n)
        a[[v - 1 for v in self.nodes]] = 1.0
        return a


@dataclass
class PricingResult:
    columns: list[Column] = field(default_factory=list)
    truncated: bool = False
    labels: int = 0

    def __bool__(self):
        return bool(self.columns)

    def __len__(self):
        return len(self.columns)

    def __iter__(self):
        return iter(self.columns)

    def __getitem__(self, i):
        return self.columns[i]


class Label:
    __slots__ = ("node", "cost", "res", "visited", "parent", "edge", "dead")

    def __init__(self, node, cost, res, visited, parent, edge):
        self.node = node
        self.cost = cost
        self.res = res
        self.visited = visited
        self.parent = parent
        self.edge = edge
        self.dead = False

    def __repr__(self):
        return f"Label(node={self.node}, cost={self.cost:.4g}, res={self.res})"


def dominance(a: Label, b: Label) -> bool:
    """True iff ``a`` dominates ``b``: no worse in cost, every resource and the
    visited set, and strictly better in at least one of them."""
    if a.node != b.node:
        raise ValueError("dominance is only defined for labels at the same node")
    if a.cost > b.cost or a.visited & ~b.visited:
        return False
    strict = a.cost < b.cost or a.visited != b.visited
    for x, y in zip(a.res, b.res):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


def _weakly_dominates(a: Label, b: Label) -> bool:
    if a.cost > b.cost or a.visited & ~b.visited:
        return False
    for x, y in zip(a.res, b.res):
        if x > y:
            return False
    return True


def _as_view(net) -> NetworkView:
    return net if isinstance(net, NetworkView) else net.full_view()


def _column_from_label(label: Label, costs: np.ndarray) -> Column:
    edges = []
    node_seq = []
    lab = label
    while lab.parent is not None:
        edges.append(lab.edge)
        node_seq.append(lab.node)
        lab = lab.parent
    edges.reverse()
    node_seq.reverse()
    true_cost = 0.0
    for e in edges:
        true_cost += float(costs[e])
    return Column(tuple(node_seq[:-1]), tuple(edges), true_cost, label.cost)


def solve_pricing(net, cbar, mode: str = ESPPRC, label_budget: int = DEFAULT_LABEL_BUDGET,
                  eps: float = NEG_EPS, max_columns: int | None = 1,
                  use_dominance: bool = True) -> PricingResult:
    """Negative reduced-cost columns on ``net`` (a network or masked view),
    cheapest first.

    Labels are expanded best-first by accumulated modified cost. Unless the
    label budget runs out, the first column is the optimum over the view.
    """
    if label_budget < 1:
        raise ValueError("label budget must be >= 1")
    view = _as_view(net)
    pn: PricingNetwork = view.network
    if view.n_edges == 0:
        return PricingResult()
    cbar = np.asarray(cbar, dtype=float)
    if cbar.shape != (pn.n_edges,):
        raise ValueError("modified cost vector does not match the network")

    elementary = mode == ESPPRC
    sink = pn.sink
    out = view.out_edges
    heads = pn.heads.tolist()
    cb = cbar.tolist()
    cons = pn.consumption.tolist()
    resets = pn.resets.tolist()
    lower = pn.lower.tolist()
    upper = pn.upper.tolist()
    n_res = len(pn.resources)
    any_reset = bool(pn.resets.any())

    root = Label(0, 0.0, tuple(lower[0]), 1 if elementary else 0, None, -1)
    alive: list[list[Label]] = [[] for _ in range(pn.n_nodes)]
    alive[0].append(root)
    heap = [(0.0, 0, 0, root)]
    counter = 1
    finished: list[Label] = []
    truncated = False

    while heap:
        _, _, _, lab = heapq.heappop(heap)
        if lab.dead:
            continue
        res = lab.res
        visited = lab.visited
        for e in out[lab.node]:
            j = heads[e]
            bit = 1 << j
            if elementary and visited & bit:
                continue
            lo = lower[j]
            up = upper[j]
            ce = cons[e]
            new_res = []
            ok = True
            if any_reset:
                re_ = resets[e]
                for r in range(n_res):
                    v = (0.0 if re_[r] else res[r]) + ce[r]
                    if v < lo[r]:
                        v = lo[r]
                    if v > up[r]:
                        ok = False
                        break
                    new_res.append(v)
            else:
                for r in range(n_res):
                    v = res[r] + ce[r]
                    if v < lo[r]:
                        v = lo[r]
                    if v > up[r]:
                        ok = False
                        break
                    new_res.append(v)
            if not ok:
                continue
            new = Label(j, lab.cost + cb[e], tuple(new_res), visited | bit if elementary else 0,
                        lab, e)
            counter += 1
            if j == sink:
                finished.append(new)
            else:
                bucket = alive[j]
                if use_dominance:
                    if any(_weakly_dominates(m, new) for m in bucket):
                        continue
                    keep = []
                    for m in bucket:
                        if _weakly_dominates(new, m):
                            m.dead = True
                        else:
                            keep.append(m)
                    keep.append(new)
                    alive[j] = keep
                else:
                    bucket.append(new)
                heapq.heappush(heap, (new.cost, j, counter, new))
            if counter >= label_budget:
                truncated = True
                break
        if truncated:
            break

    finished.sort(key=lambda lb: lb.cost)
    columns = []
    for lab in finished:
        if lab.cost >= -eps:
            break
        columns.append(_column_from_label(lab, pn.costs))
        if max_columns is not None and len(columns) >= max_columns:
            break
    return PricingResult(columns, truncated, counter)


def enumerate_all_columns(net, cbar, mode: str = ESPPRC) -> list[Column]:
    """Every resource-feasible source-to-sink path exactly once (elementary in
    ``espprc`` mode). Refuses networks with more than 14 nodes."""
    view = _as_view(net)
    pn = view.network
    if pn.n_nodes > ENUMERATION_MAX_NODES:
        raise ValueError(f"enumeration refused: {pn.n_nodes} nodes > {ENUMERATION_MAX_NODES}")
    cbar = np.asarray(cbar, dtype=float)
    out = view.out_edges
    n_res = len(pn.resources)
    lower, upper = pn.lower, pn.upper

    columns = []
    stack = [(0, tuple(lower[0]), (), 0.0, (0,))]
    while stack:
        node, res, edges, rc, path = stack.pop()
        for e in out[node]:
            j = int(pn.heads[e])
            if mode == ESPPRC and j in path:
                continue
            new_res = []
            for r in range(n_res):
                v = (0.0 if pn.resets[e, r] else res[r]) + pn.consumption[e, r]
                v = max(v, lower[j, r])
                if v > upper[j, r]:
                    break
                new_res.append(v)
            else:
                new_rc = rc + float(cbar[e])
                if j == pn.sink:
                    cost = 0.0
                    for f in edges + (e,):
                        cost += float(pn.costs[f])
                    columns.append(Column(path[1:], edges + (e,), cost, new_rc))
                else:
                    stack.append((j, tuple(new_res), edges + (e,), new_rc, path + (j,)))
    return columns


def replay_feasible(net: PricingNetwork, column: Column) -> bool:
    """Re-walk a column's edges checking connectivity and resource windows."""
    node = net.source
    res = net.lower[net.source].copy()
    for e in column.edges:
        if net.tails[e] != node:
            return False
        node = int(net.heads[e])
        res = np.where(net.resets[e], 0.0, res) + net.consumption[e]
        res = np.maximum(res, net.lower[node])
        if np.any(res > net.upper[node]):
            return False
    return node == net.sink
