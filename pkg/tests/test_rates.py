import json

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from orpf.errors import NotATreeError, ValidationError
from orpf.grid import build_grid, green_matrix
from orpf.gossip import decay_slope, monte_carlo, OrpfSystem
from orpf.model import build_clusters, quadratic_model
from orpf.powerflow import ScenarioSpec
from orpf.rates import (
    apply_L,
    beta,
    cluster_path_edges,
    cooccurrence_matrix,
    edge_disjoint_check,
    exact_rate_R,
    fixed_direction,
    hypergraph_connected,
    iteration_matrices,
    omega_span_connected,
    only_trivial_fixed_point,
    optimal_tree_clustering,
    rate_bound,
    rate_report,
    star_clustering,
)

from instances import random_instance
from oracles import brute_connected, random_tree

SEEDS = st.integers(min_value=0, max_value=2**32 - 1)
PROPS = settings(max_examples=30, derandomize=True, deadline=None,
                 suppress_health_check=[HealthCheck.too_slow])


def three_node_F():
    grid = build_grid([0, 1, 2], [(0, 1, 0.1 + 0.05j), (1, 2, 0.2 + 0.1j)])
    green = green_matrix(grid)
    model = quadratic_model(green, [0, 2], [-500.0])
    cs = build_clusters(model, green, [[0, 1]])
    return model, cs, iteration_matrices(model, cs)


def test_three_node_iteration_matrix():
    model, cs, F = three_node_F()
    np.testing.assert_allclose(F[0], [[1, 1], [0, 0]], atol=1e-12)
    res = beta(F, [1.0], model.M)
    assert res.beta == pytest.approx(0, abs=1e-12)
    assert exact_rate_R(F, [1.0], model.M) == pytest.approx(0, abs=1e-12)
    np.testing.assert_allclose(fixed_direction(model.M), [1, 0], atol=1e-12)


@PROPS
@given(SEEDS)
def test_projection_algebra(seed):
    inst = random_instance(seed)
    M = inst.model.M
    for F, c in zip(inst.F, inst.clusters.clusters):
        np.testing.assert_allclose(F @ F, F, atol=1e-10)
        np.testing.assert_allclose(F.T @ M, M @ F, atol=1e-10)
        ev = np.linalg.eigvals(F)
        assert np.all(np.minimum(np.abs(ev), np.abs(ev - 1)) < 1e-10)
        assert np.linalg.matrix_rank(np.eye(len(F)) - F, tol=1e-9) == len(c) - 1


@PROPS
@given(SEEDS)
def test_three_way_connectivity(seed):
    inst = random_instance(seed)
    m, cl = inst.model.m, inst.clusters.clusters
    w_graph = hypergraph_connected(cl, m)
    assert w_graph == omega_span_connected(cl, m)
    assert w_graph == only_trivial_fixed_point(inst.F)
    assert w_graph == brute_connected(cl, m)


@PROPS
@given(SEEDS)
def test_rate_ordering(seed):
    inst = random_instance(seed, connected=True)
    rho = inst.clusters.rho
    res = beta(inst.F, rho, inst.model.M)
    bound = rate_bound(inst.clusters.sizes, rho, inst.model.m)
    R = exact_rate_R(inst.F, rho, inst.model.M)
    assert res.connected
    assert -1e-9 <= bound <= res.beta + 1e-9
    assert res.beta < 1
    assert R <= res.beta + 1e-9


@PROPS
@given(SEEDS)
def test_disconnected_reports_beta_one(seed):
    inst = random_instance(seed, m_max=8, connected=False)
    res = beta(inst.F, inst.clusters.rho, inst.model.M)
    assert not res.connected and res.beta == 1.0


@PROPS
@given(SEEDS)
def test_edge_disjoint_orthogonality(seed):
    inst = random_instance(seed, tree=True)
    model = inst.model
    if model.m < 2:
        return
    pos = optimal_tree_clustering(inst.grid, model.compensators)
    cs = build_clusters(model, inst.green, pos)
    nodes = [[int(model.compensators[i]) for i in c] for c in pos]
    assert edge_disjoint_check(nodes, inst.grid)
    assert hypergraph_connected(pos, model.m)
    E = [cs.hess_pinv_full(r) @ model.M for r in range(len(pos))]
    for a in range(len(E)):
        for b in range(len(E)):
            if a != b:
                np.testing.assert_allclose(E[a] @ E[b], 0, atol=1e-10)
    if all(len(c) == 2 for c in pos):
        res = beta(iteration_matrices(model, cs), cs.rho, model.M)
        assert res.beta == pytest.approx(1 - 1 / (model.m - 1), abs=1e-9)


@PROPS
@given(SEEDS)
def test_L_monotone(seed):
    inst = random_instance(seed, connected=True)
    rng = np.random.default_rng(seed)
    m = inst.model.m
    A = rng.normal(size=(m, m))
    B = rng.normal(size=(m, m))
    Q = A @ A.T
    P = Q + B @ B.T
    D = apply_L(P, inst.F, inst.clusters.rho) - apply_L(Q, inst.F, inst.clusters.rho)
    assert np.linalg.eigvalsh(0.5 * (D + D.T)).min() >= -1e-9 * np.abs(D).max()


@pytest.mark.parametrize("seed", range(5))
def test_tree_path_identity(seed):
    rng = np.random.default_rng(seed)
    n = 9
    edges = random_tree(rng, n)
    grid = build_grid(range(n), edges)
    Xr = green_matrix(grid).X.real
    for _ in range(20):
        h, k, h2, k2 = rng.integers(0, n, 4)
        a = np.zeros(n)
        a[h] += 1
        a[k] -= 1
        b = np.zeros(n)
        b[h2] += 1
        b[k2] -= 1
        shared = set(grid.tree_path_edges(int(h), int(k))) & set(grid.tree_path_edges(int(h2), int(k2)))
        # sign follows the relative orientation of the two paths
        assert abs(a @ Xr @ b) == pytest.approx(sum(grid.z[e].real for e in shared), abs=1e-12)


def test_rate_bound_values():
    assert rate_bound([2] * 12, np.full(12, 1 / 12), 13) == pytest.approx(1 - 1 / 12)
    assert rate_bound([2, 3], [0.5, 0.5], 13) == pytest.approx(0.875)
    with pytest.raises(ValidationError):
        rate_bound([1], [1.0], 1)


def test_connectivity_examples():
    m = 6
    chain = [[i, i + 1] for i in range(m - 1)]
    assert hypergraph_connected(chain, m)
    assert not hypergraph_connected([[0, 1], [2, 3]], 4)
    W = cooccurrence_matrix([[0, 1, 2], [1, 2]], 3)
    assert W[1, 2] == 2 and W[0, 0] == 0


def star_tree():
    # root 0 with three branches 0-1-2, 0-3-4, 0-5
    edges = [(0, 1, 1 + 0.5j), (1, 2, 1 + 0.5j), (0, 3, 1 + 0.5j), (3, 4, 1 + 0.5j), (0, 5, 1 + 0.5j)]
    return build_grid(range(6), edges)


def test_edge_disjoint_examples():
    g = star_tree()
    assert edge_disjoint_check([[0, 2, 4]], g)
    assert edge_disjoint_check([[1, 2], [3, 4]], g)
    assert not edge_disjoint_check([[0, 2], [0, 1]], g)
    assert cluster_path_edges(g, [2, 4]) == {0, 1, 2, 3}


def test_meshed_grid_refused():
    g = build_grid([0, 1, 2], [(0, 1, 1 + 0j), (1, 2, 1 + 0j), (0, 2, 1 + 0j)])
    with pytest.raises(NotATreeError):
        edge_disjoint_check([[0, 1]], g)
    with pytest.raises(NotATreeError):
        optimal_tree_clustering(g, [0, 1, 2])


def test_optimal_clustering_examples():
    g = build_grid([0, 1, 2], [(0, 1, 1 + 0j), (1, 2, 1 + 0j)])
    assert optimal_tree_clustering(g, [0, 2]) == [[0, 1]]
    path = build_grid(range(7), [(i, i + 1, 1 + 0j) for i in range(6)])
    comps = [0, 2, 3, 6]
    pos = optimal_tree_clustering(path, comps)
    assert pos == [[0, 1], [1, 2], [2, 3]]
    assert edge_disjoint_check([[comps[i] for i in c] for c in pos], path)
    # a non-compensator branch point joins its neighbours in one cluster
    fork = build_grid(range(4), [(0, 1, 1 + 0j), (1, 2, 1 + 0j), (1, 3, 1 + 0j)])
    assert optimal_tree_clustering(fork, [0, 2, 3]) == [[0, 1, 2]]
    assert optimal_tree_clustering(star_tree(), [0, 2, 4, 5]) == [[0, 1], [0, 2], [0, 3]]


def test_testbed_report(testbed):
    system = testbed.system()
    rep = rate_report(system.model, system.clusters, testbed.grid)
    m = system.model.m
    assert rep.connected and rep.edge_disjoint
    assert rep.n_clusters == m - 1
    assert rep.beta == pytest.approx(1 - 1 / (m - 1), abs=1e-9)
    assert rep.beta == pytest.approx(rep.bound, abs=1e-9)
    assert rep.R_exact is None  # m = 13 is above the dense limit
    json.loads(rep.to_json())

    star = [[testbed.compensator_ids[i] for i in c] for c in star_clustering(m)]
    sys_star = testbed.system(star)
    rep_star = rate_report(sys_star.model, sys_star.clusters, testbed.grid)
    assert rep_star.beta > rep.beta + 1e-6
    assert rep_star.edge_disjoint is False


def test_exact_R_refuses_large_m(testbed):
    system = testbed.system()
    F = iteration_matrices(system.model, system.clusters)
    with pytest.raises(ValidationError):
        exact_rate_R(F, system.clusters.rho, system.model.M)


def test_monte_carlo_slope_matches_R():
    """Regression slope of log E[J - J_opt] against log R on a small meshed case."""
    rng = np.random.default_rng(4)
    n = 8
    edges = random_tree(rng, n) + [(2, 6, 0.3 + 0.15j), (1, 7, 0.2 + 0.1j)]
    grid = build_grid(range(n), edges)
    green = green_matrix(grid)
    comps = [0, 1, 3, 4, 6]
    model = quadratic_model(green, comps, [-50.0, -80.0, -30.0])
    cs = build_clusters(model, green, [[0, 1, 2], [1, 3], [2, 4], [3, 4]])
    F = iteration_matrices(model, cs)
    R = exact_rate_R(F, cs.rho, model.M)
    scenario = ScenarioSpec(400.0, np.zeros(n), np.zeros(n))
    system = OrpfSystem(grid, green, scenario, model, cs)
    curve = monte_carlo(system, 20000, 40, seed=3).mean(axis=0)
    slope = decay_slope(curve, (10, 40))
    assert slope == pytest.approx(np.log(R), rel=0.10)
