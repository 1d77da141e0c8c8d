import numpy as np
import pytest

from treecoca.losses import LossSpec
from treecoca.model import (
    ConvergenceTrace,
    CycleDetected,
    DataPartition,
    Dataset,
    DimensionMismatch,
    FewerIndicesThanLeaves,
    MissingIterationCount,
    MultipleRoots,
    NegativeDelay,
    NodeKind,
    PartitionError,
    TopologyError,
    TraceRow,
    build_topology,
    partition_evenly,
    star_spec,
    two_layer_spec,
)


def test_star_has_three_children_at_root():
    topo = build_topology(star_spec(3, H=10, R=2, delay=1e-3))
    root = topo[topo.root]
    assert root.kind is NodeKind.ROOT
    assert len(root.children) == 3
    assert topo.depth() == 1
    assert all(topo[c].kind is NodeKind.LEAF and topo[c].delay == 1e-3 for c in root.children)


def test_two_layer_is_depth_two():
    topo = build_topology(two_layer_spec(3, 3, H=5, T=2))
    assert topo.depth() == 2
    root = topo[topo.root]
    assert [topo[c].kind for c in root.children] == [NodeKind.INTERNAL] * 3
    assert len(topo.leaves) == 9
    assert topo.leaves_under(root.children[1]) == list(topo[root.children[1]].children)


def test_self_loop_is_a_cycle():
    spec = {"nodes": [{"id": "c", "children": ["c", "w"], "R": 1}, {"id": "w", "H": 1}]}
    with pytest.raises(CycleDetected):
        build_topology(spec)


def test_two_node_cycle_without_root():
    spec = {"nodes": [{"id": "a", "children": ["b"], "T": 1}, {"id": "b", "children": ["a"], "T": 1}]}
    with pytest.raises(CycleDetected):
        build_topology(spec)


def test_cycle_detached_from_root():
    spec = {"nodes": [
        {"id": "r", "children": ["w"], "R": 1}, {"id": "w", "H": 1},
        {"id": "a", "children": ["b"], "T": 1}, {"id": "b", "children": ["a"], "T": 1},
    ]}
    with pytest.raises(CycleDetected):
        build_topology(spec)


def test_shared_child_rejected():
    spec = {"nodes": [
        {"id": "r", "children": ["a", "b"], "R": 1},
        {"id": "a", "children": ["w"], "T": 1}, {"id": "b", "children": ["w"], "T": 1},
        {"id": "w", "H": 1},
    ]}
    with pytest.raises(CycleDetected):
        build_topology(spec)


def test_multiple_roots():
    spec = {"nodes": [{"id": "r1", "children": ["w"], "R": 1}, {"id": "w", "H": 1},
                      {"id": "r2", "children": ["v"], "R": 1}, {"id": "v", "H": 1}]}
    with pytest.raises(MultipleRoots):
        build_topology(spec)


def test_negative_delay():
    spec = star_spec(2, H=1)
    spec["nodes"][1]["delay"] = -1.0
    with pytest.raises(NegativeDelay):
        build_topology(spec)


@pytest.mark.parametrize("value", [None, 0, 1.5])
def test_missing_or_bad_iteration_count(value):
    spec = star_spec(2, H=1)
    spec["nodes"][2]["H"] = value
    with pytest.raises(MissingIterationCount):
        build_topology(spec)


def test_internal_node_needs_T():
    spec = two_layer_spec(2, 2, H=1)
    del spec["nodes"][1]["T"]
    with pytest.raises(MissingIterationCount):
        build_topology(spec)


def test_unknown_child_and_childless_root():
    with pytest.raises(TopologyError):
        build_topology({"nodes": [{"id": "r", "children": ["x"], "R": 1}]})
    with pytest.raises(TopologyError):
        build_topology({"nodes": [{"id": "r", "R": 1}]})


def test_topology_roundtrips_through_spec():
    topo = build_topology(two_layer_spec(2, 3, H=4, T=2, R=5, t_lp=1e-5, t_cp=2e-5, delay=0.1))
    again = build_topology(topo.to_spec())
    assert again == topo


@pytest.mark.parametrize("m, L, sizes", [(600, 3, [200, 200, 200]), (5, 2, [3, 2]), (4, 4, [1, 1, 1, 1])])
def test_partition_evenly(m, L, sizes):
    part = partition_evenly(m, list(range(L)))
    assert [part[k].size for k in range(L)] == sizes
    assert np.array_equal(np.sort(np.concatenate([part[k] for k in range(L)])), np.arange(m))


def test_partition_too_few_points():
    with pytest.raises(FewerIndicesThanLeaves):
        partition_evenly(2, [0, 1, 2])


@pytest.mark.parametrize("blocks", [{0: [0, 1], 1: [1, 2]}, {0: [0], 1: [2]}, {0: [0, 1, 2], 1: []}])
def test_partition_must_be_disjoint_cover(blocks):
    with pytest.raises(PartitionError):
        DataPartition(blocks, 3)


def test_partition_leaf_mismatch():
    topo = build_topology(star_spec(2, H=1))
    with pytest.raises(PartitionError):
        partition_evenly(4, [0, 1]).check_against(topo)  # node 0 is the root


def test_dataset_validation():
    X = np.eye(2)
    with pytest.raises(ValueError):
        Dataset(X, np.zeros(2), 0.0, LossSpec.squared())
    with pytest.raises(DimensionMismatch):
        Dataset(X, np.zeros(3), 1.0, LossSpec.squared())
    with pytest.raises(ValueError):
        Dataset(2 * X, np.zeros(2), 1.0, LossSpec.squared())
    with pytest.raises(ValueError):
        Dataset(X, np.array([1.0, 0.5]), 1.0, LossSpec.smooth_hinge())


def test_from_raw_scales_into_unit_ball():
    X = np.array([[3.0, 0.0], [4.0, 1.0]])
    ds = Dataset.from_raw(X, np.zeros(2), 1.0, LossSpec.squared())
    assert ds.scale == 5.0
    assert np.max(ds.sq_norms) == pytest.approx(1.0)
    assert not ds.features.flags.writeable


def test_time_to_gap_first_crossing_and_never():
    rows = [TraceRow(t, 0.1 * t, -g, 0.0) for t, g in [(1, 0.5), (2, 0.05), (3, 0.01)]]
    trace = ConvergenceTrace(TraceRow(0, 0.0, -1.0, 0.0), rows)
    assert trace.time_to_gap(0.06) == pytest.approx(0.2)
    assert trace.time_to_gap(1e-9) == float("inf")
    assert trace.time_to_gap(2.0) == 0.0
