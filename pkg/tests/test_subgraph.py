import numpy as np
import pytest

from boog.errors import ContractViolation, ParameterError
from boog.graph_store import ClassCatalog, EmbeddedGraph
from boog.subgraph import graph_anchor, khop_neighborhood, node_anchor

CATALOG = ClassCatalog(("a", "b"), np.eye(2))


def path_graph(n, dim=2):
    edges = tuple((i, i + 1) for i in range(n - 1))
    return EmbeddedGraph(n, edges, np.arange(n * dim, dtype=float).reshape(n, dim))


def random_graph(n, p, seed, dim=2):
    rng = np.random.default_rng(seed)
    edges = tuple((u, v) for u in range(n) for v in range(u + 1, n)
                  if rng.random() < p)
    return EmbeddedGraph(n, edges, rng.normal(size=(n, dim)))


def floyd_warshall(g):
    """Independent all-pairs-shortest-path oracle, O(n^3)."""
    n = g.node_count
    inf = float("inf")
    dist = [[0 if i == j else inf for j in range(n)] for i in range(n)]
    for u, v in g.edges:
        dist[u][v] = dist[v][u] = 1
    for k in range(n):
        for i in range(n):
            dik = dist[i][k]
            if dik == inf:
                continue
            for j in range(n):
                alt = dik + dist[k][j]
                if alt < dist[i][j]:
                    dist[i][j] = alt
    return dist


class TestKhopNeighborhood:
    def test_path_one_hop(self):
        assert khop_neighborhood(path_graph(4), 0, 1) == (1,)

    def test_path_two_hops(self):
        assert khop_neighborhood(path_graph(4), 0, 2) == (1, 2)

    def test_matches_floyd_warshall_oracle(self):
        g = random_graph(50, 0.1, seed=17)
        dist = floyd_warshall(g)
        for v in range(g.node_count):
            expected = tuple(sorted(
                u for u in range(g.node_count)
                if u != v and dist[v][u] <= 2))
            assert khop_neighborhood(g, v, 2) == expected

    def test_monotone_in_k(self):
        g = random_graph(30, 0.08, seed=23)
        for v in range(g.node_count):
            prev = set()
            for k in range(1, 5):
                cur = set(khop_neighborhood(g, v, k))
                assert prev <= cur
                prev = cur

    def test_anchor_never_in_neighborhood(self):
        g = random_graph(25, 0.15, seed=5)
        for v in range(g.node_count):
            assert v not in khop_neighborhood(g, v, 3)

    def test_invalid_node_rejected(self):
        with pytest.raises(ParameterError):
            khop_neighborhood(path_graph(3), 99, 1)

    def test_invalid_k_rejected(self):
        with pytest.raises(ParameterError):
            khop_neighborhood(path_graph(3), 0, 0)


class TestNodeAnchor:
    def test_isolated_node(self):
        g = EmbeddedGraph(3, ((1, 2),), np.arange(6, dtype=float).reshape(3, 2))
        task = node_anchor(g, CATALOG, 0, k=2)
        assert task.neighborhood == ()
        assert task.neighbor_reprs.shape == (0, 2)
        np.testing.assert_array_equal(task.anchor_repr, [0.0, 1.0])

    def test_star_center_one_hop(self):
        edges = tuple((0, i) for i in range(1, 6))
        g = EmbeddedGraph(6, edges, np.zeros((6, 2)))
        task = node_anchor(g, CATALOG, 0, k=1)
        assert task.neighborhood == (1, 2, 3, 4, 5)

    def test_reprs_aligned_with_oracle(self):
        g = random_graph(40, 0.1, seed=31)
        dist = floyd_warshall(g)
        for v in (0, 7, 19):
            task = node_anchor(g, CATALOG, v, k=2)
            expected = tuple(sorted(u for u in range(40)
                                    if u != v and dist[v][u] <= 2))
            assert task.neighborhood == expected
            np.testing.assert_array_equal(task.neighbor_reprs,
                                          g.embeddings[list(expected)])


class TestGraphAnchor:
    def test_single_node_graph(self):
        g = EmbeddedGraph(1, (), np.array([[3.0, 4.0]]))
        task = graph_anchor(g, CATALOG)
        np.testing.assert_array_equal(task.anchor_repr, [3.0, 4.0])
        assert task.neighborhood == (0,)

    def test_two_node_mean(self):
        g = EmbeddedGraph(2, (), np.array([[1.0, 0.0], [0.0, 1.0]]))
        np.testing.assert_array_equal(graph_anchor(g, CATALOG).anchor_repr,
                                      [0.5, 0.5])

    def test_mean_matches_direct_recomputation(self):
        rng = np.random.default_rng(13)
        emb = rng.normal(size=(10, 4))
        g = EmbeddedGraph(10, ((0, 1),), emb)
        task = graph_anchor(g, CATALOG)
        np.testing.assert_allclose(task.anchor_repr,
                                   emb.sum(axis=0) / 10.0, atol=1e-12)

    def test_relabel_invariance(self):
        rng = np.random.default_rng(41)
        emb = rng.normal(size=(8, 3))
        g = EmbeddedGraph(8, ((0, 3), (2, 5)), emb)
        perm = rng.permutation(8)
        pos = {int(node): i for i, node in enumerate(perm)}
        g2 = EmbeddedGraph(8, tuple((pos[u], pos[v]) for u, v in g.edges),
                           emb[perm])
        a, b = graph_anchor(g, CATALOG), graph_anchor(g2, CATALOG)
        np.testing.assert_allclose(a.anchor_repr, b.anchor_repr, atol=1e-12)

    def test_empty_graph_rejected(self):
        with pytest.raises(ContractViolation):
            graph_anchor(EmbeddedGraph(0, (), np.zeros((0, 2))), CATALOG)
