import numpy as np
import pytest

from oracles import dense_rho_min
from treecoca.data import synth_gaussian
from treecoca.local_sdca import local_sdca
from treecoca.losses import LossSpec, dual_objective, ridge_optimum
from treecoca.model import Dataset, DataPartition, build_topology, partition_evenly, star_spec, two_layer_spec
from treecoca.theory import (
    BlocksOverlap,
    BoundParams,
    bound_curve_star,
    bound_curve_tree,
    contraction,
    line_search_eta,
    node_bounds,
    rho_min,
    theta_leaf,
    theta_local,
)


def test_theta_local_values():
    assert theta_local(1, 1.0, 1) == 0.0
    assert theta_local(37, 0.0, 5) == 1.0
    assert theta_local(200, 1.0, 200) == pytest.approx(0.36695782172616715, rel=1e-12)
    with pytest.raises(ValueError):
        theta_local(10, 1.0, 0)


def test_theta_leaf_values():
    assert theta_leaf(1.0, 10**9, 1.0, 1, 1) <= 1e-8
    assert theta_leaf(0.5, 2, 1.0, 2, 1) == pytest.approx(0.75, abs=1e-15)
    with pytest.raises(ValueError):
        theta_leaf(0.5, 2, 1.0, 2, 0)


def test_theta_leaf_dominates_empirical_improvement():
    # single leaf owning all data: the local subproblem is the full dual
    ds = synth_gaussian(5, 8, 21, 0.5)
    _, alpha_star = ridge_optimum(ds)
    d_star = dual_objective(ds, alpha_star)
    alpha0 = np.random.default_rng(0).normal(size=ds.m)
    eps0 = d_star - dual_objective(ds, alpha0)
    H = 5
    ratios = []
    for seed in range(400):
        upd = local_sdca(ds, np.arange(ds.m), alpha0, ds.primal_from_dual(alpha0), H, np.random.default_rng(seed))
        ratios.append((d_star - dual_objective(ds, alpha0 + upd.delta_alpha)) / eps0)
    ratios = np.array(ratios)
    se = ratios.std(ddof=1) / np.sqrt(ratios.size)
    assert ratios.mean() <= theta_leaf(ds.lam, ds.m, 1.0, ds.m, H) + 3 * se


def test_rho_single_block_is_exactly_zero(ridge_toy):
    assert rho_min(ridge_toy, [np.arange(ridge_toy.m)]) == 0.0


@pytest.mark.parametrize("lam", [0.01, 0.5, 3.0])
def test_rho_duplicated_unit_column(lam):
    X = np.array([[1.0, 1.0], [0.0, 0.0]])
    ds = Dataset(X, np.zeros(2), lam, LossSpec.squared())
    # the eigenvalue of [[0, -1], [-1, 0]] is 1 whatever lambda is
    assert rho_min(ds, [np.array([0]), np.array([1])]) == pytest.approx(1.0, rel=1e-9)


def test_rho_matches_dense_oracle_6x12():
    ds = synth_gaussian(6, 12, 5, 0.1)
    blocks = [np.arange(0, 4), np.arange(4, 8), np.arange(8, 12)]
    ref = dense_rho_min(np.array(ds.features), blocks)
    assert rho_min(ds, blocks) == pytest.approx(ref, rel=1e-6)


def test_rho_rejects_overlapping_blocks(ridge_toy):
    with pytest.raises(BlocksOverlap):
        rho_min(ridge_toy, [np.array([0, 1]), np.array([1, 2])])


def test_bound_no_progress_is_constant():
    params = BoundParams(theta=1.0, rho=0.3, gamma=1.0, C=0.5, K=2)
    assert np.array_equal(bound_curve_star(params, 6, 2.5), np.full(7, 2.5))


def test_bound_exact_leaf_and_no_interference():
    lmg = 1.0
    exact = BoundParams(theta=0.0, rho=0.0, gamma=1.0, C=line_search_eta(lmg, 0.0), K=1)
    assert np.array_equal(bound_curve_star(exact, 3, 1.0), [1.0, 0.0, 0.0, 0.0])
    # rho equal to lam m gamma halves the step size and the gap each round
    half = BoundParams(theta=0.0, rho=1.0, gamma=1.0, C=line_search_eta(lmg, 1.0), K=1)
    assert np.array_equal(bound_curve_star(half, 4, 1.0), [1.0, 0.5, 0.25, 0.125, 0.0625])


def test_tree_bound_of_star_equals_star_bound(ridge_toy):
    topo = build_topology(star_spec(2, H=3, R=10))
    part = partition_evenly(ridge_toy.m, topo.leaves)
    params = BoundParams.for_star(ridge_toy, part, 3)
    assert np.allclose(bound_curve_tree(topo, ridge_toy, part, None, 1.7), bound_curve_star(params, 10, 1.7),
                       rtol=1e-14, atol=0)


def test_two_layer_hand_recursion():
    base = synth_gaussian(5, 4, 9, 0.5)
    X = np.hstack([base.features, base.features])
    ds = Dataset(X, np.tile(base.labels, 2), 0.5, LossSpec.squared())
    topo = build_topology(two_layer_spec(2, 2, H=3, T=1, R=5))
    part = partition_evenly(ds.m, topo.leaves)
    nb = node_bounds(topo, ds, part)
    lmg = ds.lam_m
    th = theta_leaf(ds.lam, ds.m, 1.0, 2, 3)
    F = np.array(ds.features)
    rho_s = dense_rho_min(F, [np.array([0, 1]), np.array([2, 3])])
    f_s = 1 - (1 - th) / 2 * lmg / (lmg + rho_s)
    s0, s1 = topo[topo.root].children
    assert nb[s0].theta == pytest.approx(f_s, rel=1e-9)
    assert nb[s1].theta == pytest.approx(nb[s0].theta, rel=1e-12)
    rho_r = dense_rho_min(F, [np.arange(4), np.arange(4, 8)])
    f_root = 1 - (1 - f_s) / 2 * lmg / (lmg + rho_r)
    assert nb[topo.root].factor == pytest.approx(f_root, rel=1e-9)
    assert bound_curve_tree(topo, ds, part, None, 2.0) == pytest.approx(2.0 * f_root ** np.arange(6), rel=1e-9)


def test_internal_iterations_raise_factor_to_T(ridge_toy):
    one = node_bounds(build_topology(two_layer_spec(2, 2, H=2, T=1)), ridge_toy, partition_evenly(8, [3, 4, 5, 6]))
    three = node_bounds(build_topology(two_layer_spec(2, 2, H=2, T=3)), ridge_toy, partition_evenly(8, [3, 4, 5, 6]))
    assert three[1].theta == pytest.approx(one[1].theta ** 3, rel=1e-12)


def test_contraction_formula():
    assert contraction(0.2, 4, 0.5) == pytest.approx(1 - 0.8 * 0.5 / 4)
    with pytest.raises(ValueError):
        BoundParams(theta=0.5, rho=-1.0, gamma=1.0, C=0.5, K=2)
