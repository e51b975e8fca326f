"""Cardinality-bounded maximum edge weight clique solvers.

Three routes with one objective convention: the clique objective is the
double sum over ordered pairs of kept nodes (each undirected edge counted
twice); the single-count value is exactly half.

* ``exact_mewcp`` enumerates every subset and exists purely as a test
  oracle, hence the hard node cap.
* ``single_prune_closed_form`` exploits that pruning exactly one node is
  solved by excluding the node with the minimum total edge weight.
* ``ehgp`` generalizes that closed form greedily: repeatedly remove the
  node with the minimum edge-weight sum over the surviving set, updating
  the remaining sums incrementally in O(n) per removal (O(n^2) total).

Tie-breaking is always lowest index, so identical matrices yield identical
kept sets and traces on every run.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import BadCardinality, IndexOutOfRange, TooLarge, TooSmall
from .model import EdgeWeightMatrix

EXACT_NODE_CAP = 24
_ENUM_CHUNK = 65536


@dataclass(frozen=True)
class CliqueSolution:
    """Kept node set, double-sum objective, and (for greedy) removal trace."""

    kept: tuple[int, ...]
    objective: float
    removal_trace: tuple[tuple[int, float], ...] = ()


def edge_sum(m: EdgeWeightMatrix, active: Iterable[int], i: int) -> float:
    """Sum of edge weights from node ``i`` into the active set."""
    nodes = {int(a) for a in active}
    if i not in nodes:
        raise IndexOutOfRange(f"node {i} not in the active set")
    if not all(0 <= a < m.n for a in nodes):
        raise IndexOutOfRange(f"active set exceeds matrix size {m.n}")
    others = sorted(nodes - {i})
    if not others:
        return 0.0
    return float(m.weights[i, others].sum())


def exact_mewcp(m: EdgeWeightMatrix, keep: int) -> CliqueSolution:
    """Exhaustive oracle: best subset of exactly ``keep`` nodes.

    Ties break to the lexicographically smallest kept set (enumeration
    order is lexicographic and only strict improvements replace the
    incumbent).
    """
    n = m.n
    if n > EXACT_NODE_CAP:
        raise TooLarge(f"exhaustive solver capped at {EXACT_NODE_CAP} nodes, got {n}")
    if not (1 <= keep <= n):
        raise BadCardinality(f"keep must lie in [1, {n}], got {keep}")
    w = m.weights
    best_obj = -np.inf
    best: tuple[int, ...] = ()
    combos = itertools.combinations(range(n), keep)
    while True:
        chunk = list(itertools.islice(combos, _ENUM_CHUNK))
        if not chunk:
            break
        idx = np.asarray(chunk, dtype=np.intp)
        objectives = w[idx[:, :, None], idx[:, None, :]].sum(axis=(1, 2))
        j = int(np.argmax(objectives))
        if objectives[j] > best_obj:
            best_obj = float(objectives[j])
            best = chunk[j]
    return CliqueSolution(kept=tuple(best), objective=best_obj)


def single_prune_closed_form(m: EdgeWeightMatrix) -> int:
    """Node whose removal is optimal when pruning exactly one channel.

    This is the argmin of the total edge-weight sums; ties go to the
    lowest index.
    """
    if m.n < 2:
        raise TooSmall(f"need at least 2 nodes, got {m.n}")
    sums = m.weights.sum(axis=1)
    return int(np.argmin(sums))


def ehgp(m: EdgeWeightMatrix, num_to_prune: int,
         consistency_tol: float | None = None) -> CliqueSolution:
    """Greedy pruning: delete the minimum-sum node ``num_to_prune`` times.

    After deleting node k, every surviving sum is updated in place via
    s_i <- s_i - a_ik, so one removal costs O(n).  The removal trace
    records (k, s_k at removal) for every deleted node.

    ``consistency_tol``, when set, recomputes every surviving sum from
    scratch after each removal and raises if the maintained values drift
    beyond the tolerance; meant for verification runs, as it makes the
    solver O(n^3).
    """
    n = m.n
    if not (0 <= num_to_prune <= n - 1):
        raise BadCardinality(f"num_to_prune must lie in [0, {n - 1}], got {num_to_prune}")
    w = m.weights
    sums = w.sum(axis=1)
    active = np.ones(n, dtype=bool)
    trace: list[tuple[int, float]] = []
    for _ in range(num_to_prune):
        masked = np.where(active, sums, np.inf)
        k = int(np.argmin(masked))
        trace.append((k, float(sums[k])))
        active[k] = False
        sums = sums - w[:, k]
        if consistency_tol is not None:
            reference = w[:, active].sum(axis=1)
            drift = np.abs(sums[active] - reference[active])
            if drift.size and float(drift.max()) > consistency_tol:
                raise AssertionError(
                    f"maintained sums drifted {float(drift.max()):.3e} "
                    f"beyond tolerance {consistency_tol:.1e}"
                )
    kept = np.flatnonzero(active)
    objective = float(w[np.ix_(kept, kept)].sum())
    return CliqueSolution(
        kept=tuple(int(i) for i in kept),
        objective=objective,
        removal_trace=tuple(trace),
    )


def importance_trace(m: EdgeWeightMatrix) -> tuple[tuple[int, float], ...]:
    """Full removal ordering: run the greedy down to a single survivor.

    Earlier entries are less important; the final surviving channel has
    implicitly the highest importance.
    """
    if m.n < 2:
        raise TooSmall(f"need at least 2 nodes to trace, got {m.n}")
    return ehgp(m, m.n - 1).removal_trace
