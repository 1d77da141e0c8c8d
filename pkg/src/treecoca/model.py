"""Shared data types: datasets, tree topologies, data partitions, solver state.

Topology nodes get dense integer ids in declaration order. Everything that
has to be reproducible (partitioning, per-leaf random streams) keys off those
ids, so the declaration order of a topology is part of an experiment's
identity.
"""

from __future__ import annotations

import enum
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from treecoca.losses import LossSpec


class TopologyError(ValueError):
    """A topology description does not define a valid rooted tree."""


class CycleDetected(TopologyError):
    pass


class MultipleRoots(TopologyError):
    pass


class NegativeDelay(TopologyError):
    pass


class MissingIterationCount(TopologyError):
    pass


class PartitionError(ValueError):
    pass


class FewerIndicesThanLeaves(PartitionError):
    pass


class DimensionMismatch(ValueError):
    pass


# --------------------------------------------------------------------------
# Dataset

SCALE_SLACK = 1e-12


def column_scale(features: np.ndarray) -> float:
    """Factor the columns must be divided by so that every ``||x_i|| <= 1``.

    Data already inside the unit ball up to rounding is left alone, so scaled
    datasets survive a write/load round trip bit for bit.
    """
    norms = np.sqrt(np.einsum("ij,ij->j", features, features))
    largest = float(norms.max()) if norms.size else 0.0
    return largest if largest > 1.0 + SCALE_SLACK else 1.0


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-major training data for the regularized problem.

    ``features`` is d x m with one datum per column. Columns must already be
    scaled into the unit ball; use :meth:`from_raw` to apply the scaling pass.
    ``scale`` records the factor the raw columns were divided by.
    """

    features: np.ndarray
    labels: np.ndarray
    lam: float
    loss: LossSpec
    scale: float = 1.0
    sq_norms: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        X = np.asfortranarray(np.asarray(self.features, dtype=np.float64))
        y = np.ascontiguousarray(np.asarray(self.labels, dtype=np.float64))
        if X.ndim != 2:
            raise DimensionMismatch(f"features must be 2-D, got shape {X.shape}")
        d, m = X.shape
        if d < 1 or m < 1:
            raise DimensionMismatch(f"need d >= 1 and m >= 1, got d={d}, m={m}")
        if y.shape != (m,):
            raise DimensionMismatch(f"labels have shape {y.shape}, expected ({m},)")
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise ValueError(f"lambda must be a positive finite number, got {self.lam}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("features and labels must be finite")
        sq = np.einsum("ij,ij->j", X, X)
        if sq.max() > (1.0 + SCALE_SLACK) ** 2:
            raise ValueError(
                "columns must satisfy ||x_i|| <= 1; build the dataset with Dataset.from_raw"
            )
        if self.loss.kind.name == "SMOOTH_HINGE" and not np.all(np.abs(y) == 1.0):
            raise ValueError("smooth hinge loss needs labels in {-1, +1}")
        X.setflags(write=False)
        y.setflags(write=False)
        sq.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "sq_norms", sq)

    @classmethod
    def from_raw(cls, features, labels, lam: float, loss: LossSpec) -> Dataset:
        """Build a dataset, dividing all columns by ``max_i ||x_i||`` if that exceeds 1."""
        X = np.asarray(features, dtype=np.float64)
        scale = column_scale(X)
        if scale != 1.0:
            X = X / scale
        return cls(X, labels, lam, loss, scale=scale)

    @property
    def d(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    @property
    def lam_m(self) -> float:
        return self.lam * self.m

    def primal_from_dual(self, alpha: np.ndarray) -> np.ndarray:
        """``w(alpha) = A alpha`` with ``A_i = x_i / (lambda m)``."""
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.shape != (self.m,):
            raise DimensionMismatch(f"alpha has shape {alpha.shape}, expected ({self.m},)")
        return self.features @ alpha / self.lam_m

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(self.labels.tobytes())
        h.update(repr((self.lam, self.loss.kind.name, self.loss.gamma)).encode())
        return h.hexdigest()[:16]


# --------------------------------------------------------------------------
# Topology


class NodeKind(enum.Enum):
    ROOT = "root"
    INTERNAL = "internal"
    LEAF = "leaf"


@dataclass(frozen=True)
class Node:
    id: int
    name: str
    kind: NodeKind
    parent: int | None
    children: tuple[int, ...]
    iterations: int
    """H for leaves, T for internal nodes, R for the root."""
    compute_time: float
    """Seconds per coordinate step (leaves) or per aggregation (others)."""
    delay: float
    """Round-trip delay to the parent; 0 for the root."""

    @property
    def is_leaf(self) -> bool:
        return self.kind is NodeKind.LEAF


@dataclass(frozen=True)
class TreeTopology:
    nodes: tuple[Node, ...]
    root: int

    def __getitem__(self, node_id: int) -> Node:
        return self.nodes[node_id]

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def leaves(self) -> list[int]:
        """Leaf ids in depth-first, child-order traversal from the root."""
        out: list[int] = []
        stack = [self.root]
        while stack:
            node = self.nodes[stack.pop()]
            if node.is_leaf:
                out.append(node.id)
            stack.extend(reversed(node.children))
        return out

    def leaves_under(self, node_id: int) -> list[int]:
        node = self.nodes[node_id]
        if node.is_leaf:
            return [node_id]
        out = []
        for c in node.children:
            out.extend(self.leaves_under(c))
        return out

    def depth(self) -> int:
        def _depth(i: int) -> int:
            node = self.nodes[i]
            return 0 if node.is_leaf else 1 + max(_depth(c) for c in node.children)

        return _depth(self.root)

    def edge_delay(self, parent: int, child: int) -> float:
        if self.nodes[child].parent != parent:
            raise KeyError(f"no edge {parent} -> {child}")
        return self.nodes[child].delay

    def by_name(self, name: str) -> Node:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def with_root_iterations(self, rounds: int) -> TreeTopology:
        if rounds < 1:
            raise MissingIterationCount(f"root needs R >= 1, got {rounds}")
        nodes = list(self.nodes)
        r = nodes[self.root]
        nodes[self.root] = Node(r.id, r.name, r.kind, r.parent, r.children, rounds, r.compute_time, r.delay)
        return TreeTopology(tuple(nodes), self.root)

    def to_spec(self) -> dict[str, Any]:
        """Inverse of :func:`build_topology`."""
        out = []
        for n in self.nodes:
            entry: dict[str, Any] = {"id": n.name, "children": [self.nodes[c].name for c in n.children]}
            if n.is_leaf:
                entry["H"] = n.iterations
                entry["t_lp"] = n.compute_time
            else:
                entry["R" if n.kind is NodeKind.ROOT else "T"] = n.iterations
                entry["t_cp"] = n.compute_time
            if n.parent is not None:
                entry["delay"] = n.delay
            out.append(entry)
        return {"nodes": out}


_ITER_KEYS = {NodeKind.LEAF: "H", NodeKind.INTERNAL: "T", NodeKind.ROOT: "R"}


def build_topology(spec: Mapping[str, Any]) -> TreeTopology:
    """Validate a structured topology description and build a :class:`TreeTopology`.

    ``spec["nodes"]`` is a list of mappings with keys ``id`` (any hashable
    name), ``children`` (list of names), ``delay`` (round-trip seconds to the
    parent), the iteration count (``H`` for leaves, ``T`` for internal nodes,
    ``R`` for the root) and the compute time (``t_lp`` for leaves, ``t_cp``
    otherwise). Missing compute times and delays default to 0. Dense integer
    ids follow declaration order.
    """
    entries = list(spec.get("nodes", ()))
    if not entries:
        raise TopologyError("topology has no nodes")
    names = [e["id"] for e in entries]
    if len(set(names)) != len(names):
        raise TopologyError("duplicate node ids")
    index = {name: i for i, name in enumerate(names)}

    parent: dict[int, int] = {}
    children: list[tuple[int, ...]] = []
    for i, e in enumerate(entries):
        kids = []
        for c in e.get("children", ()):
            if c not in index:
                raise TopologyError(f"node {e['id']!r} lists unknown child {c!r}")
            j = index[c]
            if j == i:
                raise CycleDetected(f"node {e['id']!r} is its own child")
            if j in parent:
                raise CycleDetected(f"node {c!r} has more than one parent")
            parent[j] = i
            kids.append(j)
        children.append(tuple(kids))

    roots = [i for i in range(len(entries)) if i not in parent]
    if not roots:
        raise CycleDetected("every node has a parent; the graph contains a cycle")
    if len(roots) > 1:
        raise MultipleRoots(f"parentless nodes: {[names[i] for i in roots]}")
    root = roots[0]

    seen = {root}
    stack = [root]
    while stack:
        for c in children[stack.pop()]:
            seen.add(c)
            stack.append(c)
    if len(seen) != len(entries):
        raise CycleDetected(
            f"nodes unreachable from the root: {[names[i] for i in range(len(entries)) if i not in seen]}"
        )
    if not children[root]:
        raise TopologyError("root must have at least one child")

    nodes = []
    for i, e in enumerate(entries):
        if i == root:
            kind = NodeKind.ROOT
        elif children[i]:
            kind = NodeKind.INTERNAL
        else:
            kind = NodeKind.LEAF
        key = _ITER_KEYS[kind]
        if e.get(key) is None:
            raise MissingIterationCount(f"node {e['id']!r} ({kind.value}) needs {key}")
        count = e[key]
        if int(count) != count or count < 1:
            raise MissingIterationCount(f"node {e['id']!r}: {key} must be an integer >= 1, got {count!r}")
        compute = float(e.get("t_lp" if kind is NodeKind.LEAF else "t_cp", 0.0))
        delay = float(e.get("delay", 0.0)) if i != root else 0.0
        if delay < 0:
            raise NegativeDelay(f"node {e['id']!r} has negative delay {delay}")
        if compute < 0:
            raise NegativeDelay(f"node {e['id']!r} has negative compute time {compute}")
        nodes.append(Node(i, str(e["id"]), kind, parent.get(i), children[i], int(count), compute, delay))
    return TreeTopology(tuple(nodes), root)


def star_spec(
    leaves: int, H: int, R: int = 1, *, t_lp: float = 0.0, t_cp: float = 0.0, delay: float = 0.0
) -> dict[str, Any]:
    """Description of a depth-1 tree: a center with ``leaves`` workers."""
    names = [f"w{k}" for k in range(leaves)]
    nodes: list[dict[str, Any]] = [{"id": "center", "children": names, "R": R, "t_cp": t_cp}]
    nodes += [{"id": n, "H": H, "t_lp": t_lp, "delay": delay} for n in names]
    return {"nodes": nodes}


def two_layer_spec(
    branches: int,
    leaves_per_branch: int,
    H: int,
    T: int = 1,
    R: int = 1,
    *,
    t_lp: float = 0.0,
    t_cp: float = 0.0,
    t_cp_sub: float | None = None,
    delay: float = 0.0,
    sub_delay: float = 0.0,
) -> dict[str, Any]:
    """Description of a center -> sub-centers -> workers tree.

    ``delay`` is the center<->sub-center round trip, ``sub_delay`` the
    sub-center<->worker round trip.
    """
    subs = [f"s{b}" for b in range(branches)]
    nodes: list[dict[str, Any]] = [{"id": "center", "children": subs, "R": R, "t_cp": t_cp}]
    for b, s in enumerate(subs):
        ws = [f"w{b}{j}" for j in range(leaves_per_branch)]
        nodes.append({"id": s, "children": ws, "T": T, "t_cp": t_cp if t_cp_sub is None else t_cp_sub, "delay": delay})
    for b in range(branches):
        for j in range(leaves_per_branch):
            nodes.append({"id": f"w{b}{j}", "H": H, "t_lp": t_lp, "delay": sub_delay})
    return {"nodes": nodes}


# --------------------------------------------------------------------------
# Partition


@dataclass(frozen=True)
class DataPartition:
    """Map from leaf id to the sorted column indices that leaf owns."""

    blocks: Mapping[int, np.ndarray]
    m: int

    def __post_init__(self) -> None:
        frozen = {}
        for leaf, idx in self.blocks.items():
            arr = np.array(sorted(int(i) for i in idx), dtype=np.int64)
            if arr.size == 0:
                raise PartitionError(f"leaf {leaf} owns no data")
            arr.setflags(write=False)
            frozen[int(leaf)] = arr
        allidx = np.concatenate(list(frozen.values())) if frozen else np.empty(0, np.int64)
        if allidx.size != self.m or not np.array_equal(np.sort(allidx), np.arange(self.m)):
            raise PartitionError("blocks must be disjoint and cover 0..m-1 exactly")
        object.__setattr__(self, "blocks", frozen)

    def __getitem__(self, leaf: int) -> np.ndarray:
        return self.blocks[leaf]

    def indices_under(self, topology: TreeTopology, node_id: int) -> np.ndarray:
        parts = [self.blocks[leaf] for leaf in topology.leaves_under(node_id)]
        return np.concatenate(parts)

    def check_against(self, topology: TreeTopology) -> None:
        leaves = set(topology.leaves)
        owners = set(self.blocks)
        if owners != leaves:
            extra = sorted(owners - leaves)
            missing = sorted(leaves - owners)
            raise PartitionError(
                f"partition/topology mismatch: non-leaf owners {extra}, leaves without data {missing}"
            )


def partition_evenly(m: int, leaves: Sequence[int]) -> DataPartition:
    """Contiguous blocks of size floor(m/L) or ceil(m/L); the larger blocks come first."""
    L = len(leaves)
    if L == 0:
        raise PartitionError("no leaves to assign data to")
    if m < L:
        raise FewerIndicesThanLeaves(f"{m} data points cannot cover {L} leaves")
    base, extra = divmod(m, L)
    blocks = {}
    start = 0
    for k, leaf in enumerate(leaves):
        size = base + (1 if k < extra else 0)
        blocks[leaf] = np.arange(start, start + size)
        start += size
    return DataPartition(blocks, m)


# --------------------------------------------------------------------------
# Solver state and traces


@dataclass
class DualState:
    alpha: np.ndarray
    w: np.ndarray
    sim_time: float = 0.0
    rng_seed: int = 0

    def consistency_error(self, dataset: Dataset) -> float:
        """``||w - A alpha|| / (1 + ||w||)``."""
        diff = self.w - dataset.primal_from_dual(self.alpha)
        return float(np.linalg.norm(diff) / (1.0 + np.linalg.norm(self.w)))


@dataclass(frozen=True)
class TraceRow:
    round: int
    sim_time: float
    dual_obj: float
    primal_obj: float

    @property
    def gap(self) -> float:
        return self.primal_obj - self.dual_obj


@dataclass
class ConvergenceTrace:
    initial: TraceRow
    rows: list[TraceRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def gaps(self) -> np.ndarray:
        return np.array([r.gap for r in self.rows])

    @property
    def duals(self) -> np.ndarray:
        return np.array([r.dual_obj for r in self.rows])

    @property
    def times(self) -> np.ndarray:
        return np.array([r.sim_time for r in self.rows])

    def time_to_gap(self, target: float) -> float:
        """Simulated time of the first row with ``gap <= target``; inf if never reached."""
        if self.initial.gap <= target:
            return self.initial.sim_time
        for r in self.rows:
            if r.gap <= target:
                return r.sim_time
        return float("inf")
