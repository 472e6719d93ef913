"""K-best ranked assignment (Murty's partitioning over the Hungarian solver).

Solves min-cost bipartite assignment where every row must be assigned to a
distinct column (n_rows <= n_cols) and enumerates the K cheapest distinct
assignments.  Forbidden arcs carry the FORBIDDEN sentinel cost; solutions
that would need one are infeasible and dropped.
"""

from __future__ import annotations

import heapq
import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

FORBIDDEN = 1e9


def _solve(cost: np.ndarray):
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].sum())
    assignment = np.full(cost.shape[0], -1, dtype=int)
    assignment[rows] = cols
    if np.any(cost[rows, cols] >= FORBIDDEN / 2):
        return None, None
    return total, assignment


def murty(cost: np.ndarray, k: int) -> list[tuple[float, np.ndarray]]:
    """Up to k cheapest assignments of rows to distinct columns, ascending.

    Returns (total_cost, assignment) pairs where assignment[r] is the
    column of row r.  Classic Murty partitioning: each emitted solution
    spawns subproblems that force its first i-1 arcs and forbid its i-th.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.shape[0] > cost.shape[1]:
        raise ValueError(f"need n_rows <= n_cols, got {cost.shape}")
    if k < 1:
        return []
    best_cost, best_assign = _solve(cost)
    if best_cost is None:
        return []
    counter = itertools.count()
    heap = [(best_cost, next(counter), cost, best_assign)]
    out: list[tuple[float, np.ndarray]] = []
    while heap and len(out) < k:
        total, _, problem, assignment = heapq.heappop(heap)
        out.append((total, assignment))
        for i in range(assignment.size):
            child = problem.copy()
            # force arcs decided so far, forbid the i-th arc of this solution
            for r in range(i):
                c = assignment[r]
                saved = child[r, c]
                child[r, :] = FORBIDDEN
                child[:, c] = FORBIDDEN
                child[r, c] = saved
            child[i, assignment[i]] = FORBIDDEN
            child_cost, child_assign = _solve(child)
            if child_cost is not None:
                heapq.heappush(heap, (child_cost, next(counter), child, child_assign))
    return out
