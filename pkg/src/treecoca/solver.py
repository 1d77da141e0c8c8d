"""Recursive distributed dual coordinate ascent over a tree of workers.

Every non-leaf node runs the same synchronous loop: hand the current
``(alpha, w)`` snapshot to each child, collect the children's
``(delta_alpha, delta_w)``, and apply them scaled by ``1/K`` where K is the
node's own child count. Leaves run LocalSDCA. A star network is the depth-1
case.

Simulated time follows a synchronous model: children run in parallel, a
parent waits for its slowest child (child round time plus the round-trip
delay on that edge) and then spends ``t_cp`` aggregating.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from treecoca.local_sdca import local_sdca
from treecoca.losses import dual_objective, primal_objective
from treecoca.model import (
    ConvergenceTrace,
    DataPartition,
    Dataset,
    DualState,
    NodeKind,
    TraceRow,
    TreeTopology,
)

CONSISTENCY_TOL = 1e-9


class InconsistentInput(AssertionError):
    """``w`` handed to a node does not equal ``A alpha``."""


@dataclass(frozen=True)
class NodeUpdate:
    indices: np.ndarray
    delta_alpha: np.ndarray
    delta_w: np.ndarray
    elapsed: float


@dataclass
class RunResult:
    final_state: DualState
    trace: ConvergenceTrace


def leaf_rng(seed: int, leaf_id: int, call_index: int) -> np.random.Generator:
    """Independent stream for the ``call_index``-th LocalSDCA call at ``leaf_id``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, leaf_id, call_index])))


@dataclass
class _Run:
    topology: TreeTopology
    dataset: Dataset
    partition: DataPartition
    seed: int
    check: bool = False
    calls: dict[int, int] = field(default_factory=dict)
    offsets: dict[int, list[tuple[int, int]]] = field(default_factory=dict)
    indices: dict[int, np.ndarray] = field(default_factory=dict)

    def subtree_indices(self, node_id: int) -> np.ndarray:
        if node_id not in self.indices:
            node = self.topology[node_id]
            if node.is_leaf:
                self.indices[node_id] = self.partition[node_id]
            else:
                parts = [self.subtree_indices(c) for c in node.children]
                spans, start = [], 0
                for p in parts:
                    spans.append((start, start + p.size))
                    start += p.size
                self.offsets[node_id] = spans
                self.indices[node_id] = np.concatenate(parts)
        return self.indices[node_id]

    def verify(self, alpha: np.ndarray, w: np.ndarray, node_id: int) -> None:
        err = np.linalg.norm(w - self.dataset.primal_from_dual(alpha))
        if err > CONSISTENCY_TOL * (1.0 + np.linalg.norm(w)):
            raise InconsistentInput(f"node {node_id}: ||w - A alpha|| = {err:.3e}")

    def call(self, node_id: int, alpha: np.ndarray, w: np.ndarray) -> NodeUpdate:
        node = self.topology[node_id]
        if self.check:
            self.verify(alpha, w, node_id)
        if node.is_leaf:
            block = self.partition[node_id]
            k = self.calls.get(node_id, 0)
            self.calls[node_id] = k + 1
            upd = local_sdca(
                self.dataset, block, alpha[block], w, node.iterations,
                leaf_rng(self.seed, node_id, k), check=self.check,
            )
            return NodeUpdate(upd.indices, upd.delta_alpha, upd.delta_w, node.iterations * node.compute_time)

        idx = self.subtree_indices(node_id)
        alpha = alpha.copy()
        w = w.copy()
        delta_alpha = np.zeros(idx.size)
        delta_w = np.zeros(self.dataset.d)
        elapsed = 0.0
        for _ in range(node.iterations):
            step_w, round_time = self.aggregate(node_id, alpha, w, delta_alpha)
            w += step_w
            delta_w += step_w
            elapsed += round_time
        return NodeUpdate(idx, delta_alpha, delta_w, elapsed)

    def aggregate(
        self, node_id: int, alpha: np.ndarray, w: np.ndarray, delta_alpha: np.ndarray | None
    ) -> tuple[np.ndarray, float]:
        """One inner iteration at ``node_id``.

        Updates ``alpha`` (and ``delta_alpha`` when given) in place; returns
        the averaged ``w`` increment and the simulated duration.
        """
        node = self.topology[node_id]
        K = len(node.children)
        scale = 1.0 / K
        self.subtree_indices(node_id)
        # every child sees the same snapshot; updates are applied afterwards
        updates = [self.call(c, alpha, w) for c in node.children]
        total_w = np.zeros(self.dataset.d)
        slowest = 0.0
        for child, (lo, hi), upd in zip(node.children, self.offsets[node_id], updates):
            assert upd.indices.size == hi - lo
            step = scale * upd.delta_alpha
            alpha[upd.indices] += step
            if delta_alpha is not None:
                delta_alpha[lo:hi] += step
            total_w += upd.delta_w
            slowest = max(slowest, upd.elapsed + self.topology[child].delay)
        return scale * total_w, slowest + node.compute_time


def tree_dual_method(
    node: int,
    topology: TreeTopology,
    dataset: Dataset,
    partition: DataPartition,
    alpha: np.ndarray,
    w_in: np.ndarray,
    seed: int,
    *,
    calls: dict[int, int] | None = None,
    check: bool = False,
) -> NodeUpdate:
    """Run the subtree rooted at a non-root ``node`` once from ``(alpha, w_in)``.

    ``alpha`` is the full dual vector; only the subtree's coordinates are
    read. ``calls`` carries per-leaf call counters so repeated invocations
    draw fresh random streams; pass the same dict across calls.
    """
    if topology[node].kind is NodeKind.ROOT:
        raise ValueError("use run_root for the root node")
    run = _Run(topology, dataset, partition, seed, check, calls if calls is not None else {})
    return run.call(node, np.asarray(alpha, dtype=np.float64), np.asarray(w_in, dtype=np.float64))


def _row(dataset: Dataset, t: int, time: float, alpha: np.ndarray, w: np.ndarray) -> TraceRow:
    return TraceRow(t, time, dual_objective(dataset, alpha, w), primal_objective(dataset, w))


def run_root(
    topology: TreeTopology,
    dataset: Dataset,
    partition: DataPartition,
    R: int,
    seed: int,
    *,
    check: bool = False,
    stop_gap: float | None = None,
    on_round: Callable[[int, np.ndarray, np.ndarray], None] | None = None,
) -> RunResult:
    """Start from ``alpha = 0, w = 0`` and run R outer rounds at the root.

    One trace row is recorded after each round. With ``stop_gap`` the run ends
    early after the first round whose duality gap is at most ``stop_gap``, so
    the trace may hold fewer than R rows. ``on_round(t, alpha, w)`` sees the
    state after every round (read-only use).
    """
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if dataset.m != partition.m:
        raise ValueError("partition does not match the dataset size")
    partition.check_against(topology)
    run = _Run(topology, dataset, partition, seed, check)
    alpha = np.zeros(dataset.m)
    w = np.zeros(dataset.d)
    clock = 0.0
    trace = ConvergenceTrace(_row(dataset, 0, 0.0, alpha, w))
    for t in range(1, R + 1):
        step_w, round_time = run.aggregate(topology.root, alpha, w, None)
        w += step_w
        clock += round_time
        if check:
            run.verify(alpha, w, topology.root)
        row = _row(dataset, t, clock, alpha, w)
        trace.rows.append(row)
        if on_round is not None:
            on_round(t, alpha, w)
        if stop_gap is not None and row.gap <= stop_gap:
            break
    return RunResult(DualState(alpha, w, clock, seed), trace)


def simulated_round_time(node: int, topology: TreeTopology) -> float:
    """Simulated seconds for one call at ``node`` (one outer round at the root)."""
    n = topology[node]
    if n.is_leaf:
        return n.iterations * n.compute_time
    slowest = max(simulated_round_time(c, topology) + topology[c].delay for c in n.children)
    reps = 1 if n.kind is NodeKind.ROOT else n.iterations
    return reps * (slowest + n.compute_time)


def simulated_total_time(topology: TreeTopology, R: int | None = None) -> float:
    """Time for R root rounds (defaults to the root's own iteration count)."""
    rounds = topology[topology.root].iterations if R is None else R
    return rounds * simulated_round_time(topology.root, topology)
