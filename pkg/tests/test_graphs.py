import numpy as np
import pytest

from gossipopt import (
    GraphError,
    build_complete_graph,
    build_cycle_graph,
    build_erdos_renyi,
    build_line_graph,
    diameter,
    gossip_matrix,
    graph_from_spec,
    metropolis_weights,
    spectral_data,
)
from gossipopt.graphs import Graph


def floyd_warshall_diameter(g) -> int:
    dist = np.full((g.m, g.m), np.inf)
    np.fill_diagonal(dist, 0.0)
    for i, j in g.edges:
        dist[i, j] = dist[j, i] = 1.0
    for k in range(g.m):
        dist = np.minimum(dist, dist[:, [k]] + dist[[k], :])
    return int(dist.max())


def test_line_graph_edges():
    g = build_line_graph(3)
    assert g.edges == frozenset({(0, 1), (1, 2)})
    assert g.neighbors[1] == (0, 1, 2)  # self included


def test_line_graph_m20_diameter():
    assert diameter(build_line_graph(20)) == 19


def test_single_node():
    g = build_line_graph(1)
    assert g.edges == frozenset()
    assert diameter(g) == 0


def test_neighbors_include_self():
    g = build_erdos_renyi(8, 0.4, seed=3)
    for i in range(8):
        assert i in g.neighbors[i]


def test_erdos_renyi_p1_is_complete():
    g = build_erdos_renyi(4, 1.0, seed=0)
    assert g.edges == build_complete_graph(4).edges
    assert diameter(g) == 1


def test_erdos_renyi_p0_connectivity_error():
    with pytest.raises(GraphError, match="connected"):
        build_erdos_renyi(20, 0.0, seed=0)


def test_erdos_renyi_connected_and_deterministic():
    g1 = build_erdos_renyi(20, 0.5, seed=42)
    g2 = build_erdos_renyi(20, 0.5, seed=42)
    assert g1.edges == g2.edges
    # independent reachability check: expand a frontier from node 0
    reached = {0}
    frontier = {0}
    while frontier:
        nxt = set()
        for u in frontier:
            for i, j in g1.edges:
                if i == u and j not in reached:
                    nxt.add(j)
                if j == u and i not in reached:
                    nxt.add(i)
        reached |= nxt
        frontier = nxt
    assert reached == set(range(20))


def test_erdos_renyi_bad_p():
    with pytest.raises(GraphError):
        build_erdos_renyi(5, 1.5, seed=0)
    with pytest.raises(GraphError):
        build_erdos_renyi(5, -0.1, seed=0)


@pytest.mark.parametrize(
    "g,expected",
    [
        (build_line_graph(5), 4),
        (build_complete_graph(6), 1),
        (build_cycle_graph(6), 3),
    ],
)
def test_diameter_examples(g, expected):
    assert diameter(g) == expected


def test_diameter_matches_floyd_warshall():
    for seed in range(40):
        m = 2 + seed % 7  # m <= 8
        g = build_erdos_renyi(m, 0.5, seed=seed)
        assert diameter(g) == floyd_warshall_diameter(g)


def test_diameter_disconnected_errors():
    g = Graph(m=2, edges=frozenset(), neighbors=((0,), (1,)))
    with pytest.raises(GraphError, match="disconnected"):
        diameter(g)


def test_metropolis_line3():
    w = metropolis_weights(build_line_graph(3))
    third = 1.0 / 3.0
    expected = np.array([[2 * third, third, 0.0], [third, third, third], [0.0, third, 2 * third]])
    np.testing.assert_allclose(w, expected, rtol=0, atol=1e-15)


def test_metropolis_complete2():
    w = metropolis_weights(build_complete_graph(2))
    np.testing.assert_allclose(w, [[0.5, 0.5], [0.5, 0.5]], rtol=0, atol=0)


def test_metropolis_single_node():
    np.testing.assert_allclose(metropolis_weights(build_line_graph(1)), [[1.0]])


def test_gossip_complete2_half_mixing():
    gm = gossip_matrix(build_complete_graph(2), c=0.5)
    np.testing.assert_allclose(gm.W, [[0.75, 0.25], [0.25, 0.75]], rtol=0, atol=0)


def test_gossip_line3_half_mixing():
    gm = gossip_matrix(build_line_graph(3), c=0.5)
    sixth = 1.0 / 6.0
    expected = np.array(
        [[5 * sixth, sixth, 0.0], [sixth, 4 * sixth, sixth], [0.0, sixth, 5 * sixth]]
    )
    np.testing.assert_allclose(gm.W, expected, rtol=0, atol=1e-15)


@pytest.mark.parametrize("c", [0.0, -0.1, 0.51, 1.0])
def test_gossip_rejects_illegal_c(c):
    with pytest.raises(GraphError):
        gossip_matrix(build_line_graph(3), c=c)


def test_gossip_rejects_wrong_pattern():
    g = build_line_graph(3)
    w = metropolis_weights(build_complete_graph(3))
    with pytest.raises(GraphError, match="pattern"):
        gossip_matrix(g, c=0.5, W_tilde=w)


def test_gossip_invariants_random_graphs():
    for seed in range(10):
        g = build_erdos_renyi(12, 0.35, seed=seed)
        gm = gossip_matrix(g, c=0.5)
        for W in (gm.W_tilde, gm.W):
            assert np.abs(W.sum(axis=1) - 1.0).max() <= 1e-12
            assert np.abs(W - W.T).max() <= 1e-12
        adj = g.adjacency()
        off = gm.W_tilde - np.diag(np.diag(gm.W_tilde))
        assert np.array_equal(off != 0.0, adj != 0.0)
        assert np.diag(gm.W).min() >= 1.0 - gm.c


def test_mixing_limit_small_c():
    # raw mixing formula outside the validated range: W -> I as c -> 0
    g = build_line_graph(4)
    wt = metropolis_weights(g)
    c = 1e-6
    W = (1.0 - c) * np.eye(4) + c * wt
    assert np.abs(W - np.eye(4)).max() < 1e-6
    assert np.abs(W.sum(axis=1) - 1.0).max() <= 1e-12


def test_spectral_complete2_hand_values():
    gm = gossip_matrix(build_complete_graph(2), c=0.5)
    sd = spectral_data(gm)
    assert sd.lambda_min == pytest.approx(0.0, abs=1e-12)
    # disagreement direction has M-eigenvalue 2/1 - 1 = 1, ones direction -1
    np.testing.assert_allclose(sd.M, [[0.0, -1.0], [-1.0, 0.0]], atol=1e-12)


def test_spectral_single_node():
    sd = spectral_data(gossip_matrix(build_line_graph(1), c=0.5))
    np.testing.assert_allclose(sd.M, [[-1.0]], atol=1e-12)


def test_spectral_lambda2_below_one_connected():
    for seed in range(5):
        g = build_erdos_renyi(10, 0.4, seed=seed)
        sd = spectral_data(gossip_matrix(g, c=0.5))
        assert sd.lambda2 < 1.0 - 1e-8
        assert sd.lambda_min >= -1.0 - 1e-12


def test_M_positive_definite_on_disagreement_subspace():
    for seed in range(8):
        g = build_erdos_renyi(9, 0.4, seed=seed)
        gm = gossip_matrix(g, c=0.5)
        sd = spectral_data(gm)
        m = g.m
        ones = np.ones((m, 1)) / np.sqrt(m)
        proj = np.eye(m) - ones @ ones.T
        restricted = proj @ sd.M @ proj
        eig = np.linalg.eigvalsh(restricted)
        # one zero eigenvalue from the projected-out direction; rest positive
        positive = eig[np.abs(eig) > 1e-9]
        floor = 1.0 / gm.c / (1.0 - sd.lambda_min) - 1.0 - 1e-9
        assert positive.min() >= floor
        assert positive.min() > 0.0


def test_graph_from_spec_kinds():
    assert graph_from_spec({"kind": "line", "m": 4}).edges == build_line_graph(4).edges
    assert graph_from_spec({"kind": "cycle", "m": 5}).edges == build_cycle_graph(5).edges
    assert graph_from_spec({"kind": "complete", "m": 3}).edges == build_complete_graph(3).edges
    g = graph_from_spec({"kind": "erdos_renyi", "m": 10, "p": 0.5, "seed": 4})
    assert g.edges == build_erdos_renyi(10, 0.5, 4).edges


def test_graph_from_spec_errors():
    with pytest.raises(GraphError):
        graph_from_spec({"kind": "torus", "m": 4})
    with pytest.raises(GraphError):
        graph_from_spec({"kind": "line"})
    with pytest.raises(GraphError):
        graph_from_spec({"kind": "erdos_renyi", "m": 4})
