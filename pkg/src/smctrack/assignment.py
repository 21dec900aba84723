"""Rectangular Hungarian assignment with feasibility gating and a cost cap."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

#: Marks a pair that must never be matched.
INFEASIBLE = np.inf


@dataclass(frozen=True)
class AssignmentResult:
    matches: tuple[tuple[int, int], ...] = ()
    unmatched_rows: tuple[int, ...] = ()
    unmatched_cols: tuple[int, ...] = ()

    def total_cost(self, cost) -> float:
        cost = np.asarray(cost, dtype=np.float64)
        return float(sum(cost[r, c] for r, c in self.matches))

    def as_dict(self) -> dict[int, int]:
        return dict(self.matches)


def gate_cost(cost, max_cost: float = np.inf) -> np.ndarray:
    """Copy of ``cost`` with every pair above ``max_cost`` set INFEASIBLE."""
    gated = np.array(cost, dtype=np.float64, copy=True)
    if gated.size:
        gated[~np.isfinite(gated)] = INFEASIBLE
        gated[gated > max_cost] = INFEASIBLE
    return gated


def hungarian_solve(cost, max_cost: float = np.inf) -> AssignmentResult:
    """Optimal matching over the feasible pairs of a rectangular cost matrix.

    Pairs costing more than ``max_cost`` are made infeasible before solving.
    Among all matchings that use only feasible pairs, the solver returns one
    with the largest number of pairs and, among those, the least total cost.
    Rows and columns left without a feasible partner are reported unmatched.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        if cost.size:
            raise ValueError(f"cost matrix must be 2-D, got shape {cost.shape}")
        cost = cost.reshape(0, 0)
    gated = gate_cost(cost, max_cost)
    n_rows, n_cols = gated.shape
    feasible = np.isfinite(gated)
    if n_rows == 0 or n_cols == 0 or not feasible.any():
        return AssignmentResult((), tuple(range(n_rows)), tuple(range(n_cols)))

    transposed = n_rows > n_cols
    work = gated.T if transposed else gated
    work_feasible = feasible.T if transposed else feasible

    # Big-M stand-in for infeasible pairs: one infeasible pair must outweigh
    # any difference in feasible totals, so cardinality is maximized first.
    vals = work[work_feasible]
    lo = vals.min()
    shifted = np.where(work_feasible, work - lo, 0.0)
    big = (float(shifted.max()) + 1.0) * (work.shape[0] + 1)
    shifted[~work_feasible] = big

    col_of_row = _kernels.assign_rows(shifted)

    matches = []
    for r, c in enumerate(col_of_row):
        if c >= 0 and work_feasible[r, c]:
            matches.append((int(c), r) if transposed else (r, int(c)))
    matches.sort()
    matched_rows = {r for r, _ in matches}
    matched_cols = {c for _, c in matches}
    return AssignmentResult(
        tuple(matches),
        tuple(r for r in range(n_rows) if r not in matched_rows),
        tuple(c for c in range(n_cols) if c not in matched_cols),
    )
