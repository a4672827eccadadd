"""Restricted master problem in set-covering form.

    min  c^T x   s.t.  A x >= 1,  x >= 0

The LP relaxation is solved by a dense revised simplex warm-started from the
previous basis; the integer RMP by a depth-first branch-and-bound that fixes
columns to 0 or 1.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .instances import Instance
from .labeling import Column, replay_feasible
from .network import PricingNetwork, build_network

log = logging.getLogger(__name__)

FEAS_TOL = 1e-7
OPT_TOL = 1e-6
PIVOT_TOL = 1e-9
BLAND_AFTER = 500
FRACTIONAL_TOL = 1e-6


class SimplexError(RuntimeError):
    pass


class InfeasibleInstanceError(ValueError):
    pass


# --------------------------------------------------------------------------
# Column pool
# --------------------------------------------------------------------------

class ColumnPool:
    """Append-only column store with a duplicate filter on (cover, cost)."""

    def __init__(self, n_rows: int):
        self.n_rows = n_rows
        self.columns: list[Column] = []
        self._A = np.zeros((n_rows, 64))
        self._c: list[float] = []
        self._keys: set = set()

    def __len__(self):
        return len(self.columns)

    @property
    def A(self) -> np.ndarray:
        return self._A[:, : len(self.columns)]

    @property
    def costs(self) -> np.ndarray:
        return np.asarray(self._c, dtype=float)

    @staticmethod
    def key(col: Column):
        return (tuple(sorted(col.cover)), round(col.cost, 9))

    def add(self, col: Column) -> bool:
        rows = sorted(col.cover)
        if rows and (rows[0] < 0 or rows[-1] >= self.n_rows):
            raise ValueError("column covers rows outside the master problem")
        k = self.key(col)
        if k in self._keys:
            return False
        j = len(self.columns)
        if j == self._A.shape[1]:
            grown = np.zeros((self.n_rows, 2 * j))
            grown[:, :j] = self._A
            self._A = grown
        self._A[rows, j] = 1.0
        self._c.append(col.cost)
        self.columns.append(col)
        self._keys.add(k)
        return True


def add_column(pool: ColumnPool, col: Column) -> bool:
    return pool.add(col)


def singleton_column(net: PricingNetwork, v: int) -> Column:
    idx = net.edge_index
    e1, e2 = idx[(net.source, v)], idx[(v, net.sink)]
    cost = float(net.costs[e1]) + float(net.costs[e2])
    return Column((v,), (e1, e2), cost, cost)


def init_pool(inst: Instance, net: PricingNetwork | None = None) -> ColumnPool:
    """One single-customer (single-trip) route per covering row."""
    net = net or build_network(inst)
    pool = ColumnPool(net.n)
    for v in range(1, net.n + 1):
        col = singleton_column(net, v)
        if not replay_feasible(net, col):
            raise InfeasibleInstanceError(f"node {v} has no feasible singleton route")
        pool.add(col)
    return pool


# --------------------------------------------------------------------------
# Revised simplex
# --------------------------------------------------------------------------

@dataclass
class LpSolution:
    x: np.ndarray
    duals: np.ndarray
    objective: float
    basis: list[int]
    pivots: int


def _basis_matrix(A, basis, n_struct):
    m = A.shape[0]
    B = np.zeros((m, m))
    for pos, j in enumerate(basis):
        if j < n_struct:
            B[:, pos] = A[:, j]
        else:
            B[j - n_struct, pos] = -1.0
    return B


def covering_simplex(A: np.ndarray, c: np.ndarray, basis: list[int] | None = None,
                     max_pivots: int | None = None) -> LpSolution:
    """Solve ``min c x, A x >= 1, x >= 0`` starting from a primal feasible basis.

    Variables ``0..N-1`` are structural, ``N..N+m-1`` the surplus columns.
    ``basis`` must hold ``m`` indices whose basic solution is feasible.
    """
    m, N = A.shape
    c = np.asarray(c, dtype=float)
    if basis is None or len(basis) != m:
        raise ValueError("a feasible starting basis of size m is required")
    basis = list(basis)
    b = np.ones(m)
    max_pivots = max_pivots or 50 * (m + N) + 1000
    degenerate = 0
    bland = False

    for pivots in range(max_pivots + 1):
        lu = lu_factor(_basis_matrix(A, basis, N), check_finite=False)
        xB = lu_solve(lu, b, check_finite=False)
        cB = np.array([c[j] if j < N else 0.0 for j in basis])
        y = lu_solve(lu, cB, trans=1, check_finite=False)

        d = np.concatenate((c - A.T @ y, y))
        d[basis] = 0.0
        candidates = np.flatnonzero(d < -OPT_TOL)
        if candidates.size == 0:
            x = np.zeros(N)
            for pos, j in enumerate(basis):
                if j < N:
                    x[j] = max(xB[pos], 0.0)
            return LpSolution(x, np.maximum(y, 0.0), float(c @ x), basis, pivots)
        if pivots == max_pivots:
            break

        q = int(candidates[0]) if bland else int(candidates[np.argmin(d[candidates])])
        col = A[:, q] if q < N else -np.eye(m)[q - N]
        direction = lu_solve(lu, col, check_finite=False)
        rows = np.flatnonzero(direction > PIVOT_TOL)
        if rows.size == 0:
            raise SimplexError("LP unbounded; costs must be non-negative")
        ratios = np.maximum(xB[rows], 0.0) / direction[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-12]
        if bland:
            r = int(min(ties, key=lambda i: basis[i]))
        else:
            r = int(ties[np.argmax(direction[ties])])
        if best < 1e-12:
            degenerate += 1
            if degenerate > BLAND_AFTER and not bland:
                log.debug("switching to Bland's rule after %d degenerate pivots", degenerate)
                bland = True
        else:
            degenerate = 0
        basis[r] = q
    raise SimplexError(f"simplex did not converge within {max_pivots} pivots")


# --------------------------------------------------------------------------
# RMP state
# --------------------------------------------------------------------------

@dataclass
class RmpState:
    x: np.ndarray
    duals: np.ndarray
    objective: float
    basis: list[int]
    iteration: int = 0

    @property
    def fractional(self) -> np.ndarray:
        return self.x[(self.x > FRACTIONAL_TOL) & (self.x < 1 - FRACTIONAL_TOL)]


def solve_lp(pool: ColumnPool, previous: RmpState | None = None) -> RmpState:
    """Optimal basic solution of the covering LP over the pool.

    Warm-starts from ``previous``; otherwise from the singleton columns, which
    ``init_pool`` places first.
    """
    m = pool.n_rows
    if previous is not None:
        basis = [j if j < len(previous.x) else j - len(previous.x) + len(pool) for j in previous.basis]
        it = previous.iteration + 1
    else:
        basis = _identity_basis(pool)
        it = 0
    sol = covering_simplex(pool.A, pool.costs, basis)
    return RmpState(sol.x, sol.duals, sol.objective, sol.basis, it)


def _identity_basis(pool: ColumnPool) -> list[int]:
    m = pool.n_rows
    basis = [-1] * m
    for j, col in enumerate(pool.columns):
        if len(col.cover) == 1:
            (r,) = col.cover
            if basis[r] < 0:
                basis[r] = j
    if min(basis, default=0) < 0:
        raise ValueError("pool lacks singleton columns for a starting basis")
    return basis


def reduced_costs(pool: ColumnPool, duals: np.ndarray) -> np.ndarray:
    return pool.costs - pool.A.T @ duals


# --------------------------------------------------------------------------
# Integer RMP
# --------------------------------------------------------------------------

@dataclass
class IrmpResult:
    objective: float
    selected: list[int]
    optimal: bool
    nodes: int = 0
    lp_bound: float = float("nan")


def _subproblem_lp(A, c, rows, cols):
    """Covering LP restricted to ``rows`` x ``cols`` with big-M artificials.

    Returns (objective, x over ``cols``) or None if infeasible.
    """
    sub = A[np.ix_(rows, cols)]
    m = len(rows)
    big = 1.0 + float(np.abs(c[cols]).sum()) if len(cols) else 1.0
    A_ext = np.hstack((sub, np.eye(m)))
    c_ext = np.concatenate((c[cols], np.full(m, big)))
    sol = covering_simplex(A_ext, c_ext, list(range(len(cols), len(cols) + m)))
    if sol.x[len(cols):].max(initial=0.0) > FEAS_TOL:
        return None
    x = sol.x[: len(cols)]
    return float(c[cols] @ x), x


def solve_irmp(pool: ColumnPool, time_limit: float = 60.0, node_limit: int | None = None,
               restart_every: int = 10_000) -> IrmpResult:
    """Binary covering over the pool by LP-based branch-and-bound.

    Branches on the most fractional column, 1-branch first, depth-first with a
    best-bound reordering of the open list every ``restart_every`` nodes.
    """
    start = time.perf_counter()
    A, c = pool.A, pool.costs
    m, N = A.shape

    singletons = _identity_basis(pool)
    best_sel = sorted(set(singletons))
    best_obj = float(c[best_sel].sum())

    root_lp = solve_lp(pool).objective
    # (bound, fixed_one, fixed_zero)
    open_nodes: list[tuple[float, frozenset, frozenset]] = [(root_lp, frozenset(), frozenset())]
    nodes = 0
    exhausted = True
    while open_nodes:
        if time.perf_counter() - start > time_limit or (node_limit and nodes >= node_limit):
            exhausted = False
            break
        if nodes and nodes % restart_every == 0:
            open_nodes.sort(key=lambda t: -t[0])
        bound, ones, zeros = open_nodes.pop()
        nodes += 1
        if bound >= best_obj - 1e-9:
            continue
        fixed_cost = float(c[list(ones)].sum()) if ones else 0.0
        covered = A[:, list(ones)].sum(axis=1) > 0.5 if ones else np.zeros(m, dtype=bool)
        rows = np.flatnonzero(~covered)
        if rows.size == 0:
            if fixed_cost < best_obj - 1e-9:
                best_obj, best_sel = fixed_cost, sorted(ones)
            continue
        cols = [j for j in range(N)
                if j not in ones and j not in zeros and A[rows, j].any()]
        if not cols:
            continue
        res = _subproblem_lp(A, c, rows, np.asarray(cols))
        if res is None:
            continue
        lp_obj, x = res
        node_bound = fixed_cost + lp_obj
        if node_bound >= best_obj - 1e-9:
            continue
        frac = np.abs(x - np.round(x))
        if frac.max() <= FRACTIONAL_TOL:
            chosen = sorted(ones | {cols[k] for k in np.flatnonzero(x > 0.5)})
            best_obj, best_sel = float(c[chosen].sum()), chosen
            continue
        k = int(np.argmax(frac))
        j = cols[k]
        open_nodes.append((node_bound, ones, zeros | {j}))
        open_nodes.append((node_bound, ones | {j}, zeros))
    return IrmpResult(best_obj, best_sel, exhausted, nodes, root_lp)


# --------------------------------------------------------------------------
# Debug dump
# --------------------------------------------------------------------------

def write_lp(pool: ColumnPool, path: str | Path, integer: bool = False) -> Path:
    """CPLEX LP format dump of the current RMP."""
    path = Path(path)
    A, c = pool.A, pool.costs
    lines = ["\\ restricted master problem", "Minimize", " obj: " + " + ".join(
        f"{c[j]:.12g} x{j}" for j in range(len(c))), "Subject To"]
    for r in range(pool.n_rows):
        terms = " + ".join(f"x{j}" for j in np.flatnonzero(A[r] > 0.5))
        lines.append(f" cover{r}: {terms} >= 1")
    if integer:
        lines.append("Binary")
        lines += [f" x{j}" for j in range(len(c))]
    lines.append("End")
    path.write_text("\n".join(lines) + "\n")
    return path
