import numpy as np
import pytest

from dualprox.topology import (
    Graph,
    PowerIterationError,
    canonical_edge_order,
    check_connected,
    laplacian_spectral_radius,
)
from dualprox.problems import market_graph

from oracles import dense_m, dense_q, random_connected_graph


class TestCanonicalEdgeOrder:
    def test_triangle(self):
        assert canonical_edge_order(3, [(2, 3), (1, 3), (1, 2)]) == [
            (1, 2),
            (1, 3),
            (2, 3),
        ]

    def test_singleton(self):
        assert canonical_edge_order(2, [(1, 2)]) == [(1, 2)]

    def test_orientation_normalized(self):
        assert canonical_edge_order(4, [(4, 3), (2, 1)]) == [(1, 2), (3, 4)]

    def test_market_order_matches_edge_multiplier_listing(self):
        # order of the benchmark's five edge multipliers under the global
        # indexing company1=1, company2=2, users=3..5
        edges = {(1, 2), (1, 3), (2, 3), (3, 4), (4, 5)}
        assert canonical_edge_order(5, list(edges)) == [
            (1, 2),  # company1-company2
            (1, 3),  # company1-user1
            (2, 3),  # company2-user1
            (3, 4),  # user1-user2
            (4, 5),  # user2-user3
        ]

    def test_self_loop_rejected(self):
        with pytest.raises(ValueError, match=r"\(2, 2\)"):
            canonical_edge_order(3, [(1, 2), (2, 2)])

    def test_duplicate_rejected_either_orientation(self):
        with pytest.raises(ValueError, match="duplicate"):
            canonical_edge_order(3, [(1, 2), (2, 1)])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            canonical_edge_order(3, [(1, 4)])


class TestIncidence:
    def test_path_graph(self):
        graph = Graph(3, [(1, 2), (2, 3)])
        q = dense_q(graph)
        assert np.array_equal(q, np.array([[1, 0], [-1, 1], [0, -1]], dtype=float))

    def test_single_edge(self):
        assert np.array_equal(dense_q(Graph(2, [(1, 2)])), [[1.0], [-1.0]])

    def test_q_entries_match_dense(self):
        graph = Graph(4, [(1, 2), (2, 4), (1, 3)])
        inc = graph.incidence(2)
        q = np.zeros((4, 3))
        for vertex, edge, sign in inc.q_entries:
            q[vertex - 1, edge] = sign
        assert np.array_equal(q, dense_q(graph))

    @pytest.mark.parametrize("seed", range(5))
    def test_columns_sum_to_zero(self, seed):
        rng = np.random.default_rng(seed)
        graph = random_connected_graph(rng, int(rng.integers(2, 8)))
        assert np.all(dense_q(graph).sum(axis=0) == 0)


class TestApplyM:
    def test_consensual_duals_in_kernel(self):
        graph = market_graph()
        inc = graph.incidence(2)
        lam = np.hstack([np.tile([1.5, -2.0], (5, 1)), np.random.default_rng(0).normal(size=(5, 3))])
        assert np.allclose(inc.apply_m(lam), 0.0)

    def test_two_agents_scalar(self):
        inc = Graph(2, [(1, 2)]).incidence(1)
        lam = np.array([[3.0, 9.9], [1.0, -4.2]])  # theta = (3, 1), mu arbitrary
        assert np.array_equal(inc.apply_m(lam), [[2.0]])

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_dense_kronecker(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        b_dim = int(rng.integers(1, 3))
        m = int(rng.integers(1, 3))
        graph = random_connected_graph(rng, n)
        inc = graph.incidence(b_dim)
        lam = rng.normal(size=(n, b_dim + m))
        dense = dense_m(graph, b_dim, m) @ lam.ravel()
        assert np.allclose(
            inc.apply_m(lam).ravel(), dense, atol=1e-12, rtol=0.0
        )

    @pytest.mark.parametrize("seed", range(4))
    def test_transpose_matches_dense(self, seed):
        rng = np.random.default_rng(100 + seed)
        n = int(rng.integers(2, 7))
        b_dim = int(rng.integers(1, 3))
        m = int(rng.integers(1, 3))
        graph = random_connected_graph(rng, n)
        inc = graph.incidence(b_dim)
        xi = rng.normal(size=(graph.n_edges, b_dim))
        dense = dense_m(graph, b_dim, m).T @ xi.ravel()
        assert np.allclose(
            inc.apply_m_transpose(xi, m).ravel(), dense, atol=1e-12, rtol=0.0
        )

    @pytest.mark.parametrize("seed", range(3))
    def test_gram_identity(self, seed):
        # transpose-compose-apply equals the Laplacian Kronecker form
        rng = np.random.default_rng(200 + seed)
        n = int(rng.integers(2, 6))
        graph = random_connected_graph(rng, n)
        b_dim, m = 2, 1
        inc = graph.incidence(b_dim)
        lam = rng.normal(size=(n, b_dim + m))
        via_ops = inc.apply_m_transpose(inc.apply_m(lam), m)
        q = dense_q(graph)
        ktk = np.zeros((b_dim + m, b_dim + m))
        ktk[:b_dim, :b_dim] = np.eye(b_dim)
        dense = (np.kron(q @ q.T, ktk) @ lam.ravel()).reshape(n, b_dim + m)
        assert np.allclose(via_ops, dense, atol=1e-12, rtol=0.0)

    def test_dimension_mismatch(self):
        inc = Graph(2, [(1, 2)]).incidence(2)
        with pytest.raises(ValueError):
            inc.apply_m(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            inc.apply_m(np.zeros((2, 1)))
        with pytest.raises(ValueError):
            inc.apply_m_transpose(np.zeros((5, 2)), 1)


class TestNeighborSets:
    def test_partition(self):
        graph = market_graph()
        for i in range(1, 6):
            nbrs = graph.neighbors(i)
            assert set(nbrs.owned) | set(nbrs.incoming) == set(nbrs.all)
            assert set(nbrs.owned) & set(nbrs.incoming) == set()

    def test_edge_ownership_unique(self):
        graph = market_graph()
        owned = [(i, j) for i in range(1, 6) for j in graph.neighbors(i).owned]
        assert sorted(owned) == sorted(graph.edges)


class TestConnectivity:
    def test_path(self):
        assert check_connected(Graph(3, [(1, 2), (2, 3)]))

    def test_isolated(self):
        assert not check_connected(Graph(2, []))

    def test_market(self):
        assert check_connected(market_graph())


class TestSpectralRadius:
    def test_single_edge(self):
        est = laplacian_spectral_radius(Graph(2, [(1, 2)]))
        assert est.converged
        assert est.value == pytest.approx(2.0, rel=1e-8)

    def test_star_three_leaves(self):
        graph = Graph(4, [(1, 2), (1, 3), (1, 4)])
        expected = np.linalg.eigvalsh(dense_q(graph) @ dense_q(graph).T)[-1]
        assert expected == pytest.approx(4.0, abs=1e-12)
        est = laplacian_spectral_radius(graph)
        assert est.value == pytest.approx(expected, rel=1e-7)

    def test_market_graph(self):
        graph = market_graph()
        expected = np.linalg.eigvalsh(dense_q(graph) @ dense_q(graph).T)[-1]
        est = laplacian_spectral_radius(graph)
        assert 0.0 < est.value <= 2 * 3  # max degree is 3
        assert est.value == pytest.approx(expected, rel=1e-7)

    @pytest.mark.parametrize("seed", range(6))
    def test_bounded_by_twice_max_degree(self, seed):
        rng = np.random.default_rng(300 + seed)
        graph = random_connected_graph(rng, int(rng.integers(2, 10)))
        est = laplacian_spectral_radius(graph)
        assert est.value <= est.upper_bound + 1e-9
        assert est.upper_bound == 2.0 * graph.max_degree()

    def test_nonconvergence_paths(self):
        graph = market_graph()
        with pytest.raises(PowerIterationError) as err:
            laplacian_spectral_radius(graph, tol=0.0, max_iter=5, fallback=False)
        assert err.value.iterations == 5
        est = laplacian_spectral_radius(graph, tol=0.0, max_iter=5)
        assert not est.converged
        assert est.value == est.upper_bound == 6.0

    def test_no_edges(self):
        est = laplacian_spectral_radius(Graph(3, []))
        assert est.value == 0.0


class TestGraph:
    def test_equality_after_canonicalization(self):
        assert Graph(3, [(3, 1), (1, 2)]) == Graph(3, [(1, 2), (1, 3)])

    def test_owned_edges_indices(self):
        graph = market_graph()
        assert graph.owned_edges(1) == [(0, 2), (1, 3)]
        assert graph.owned_edges(3) == [(3, 4)]
        assert graph.owned_edges(5) == []
