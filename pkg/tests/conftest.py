import numpy as np
import pytest

from morsegraph.graphs import PotentialField, WeightedGraph


def random_connected_graph(rng, n, extra_edges=None, mu_range=(0.5, 2.0), w_range=(0.5, 2.0)):
    """Random connected graph: a random spanning tree plus extra edges."""
    if extra_edges is None:
        extra_edges = n // 2
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        u = order[k]
        v = order[rng.integers(0, k)]
        edges.add((min(u, v), max(u, v)))
    tries = 0
    while len(edges) < n - 1 + extra_edges and tries < 20 * extra_edges:
        u, v = rng.integers(0, n, size=2)
        if u != v:
            edges.add((min(u, v), max(u, v)))
        tries += 1
    edges = sorted(edges)
    eu = np.array([e[0] for e in edges], np.int64)
    ev = np.array([e[1] for e in edges], np.int64)
    ew = rng.uniform(*w_range, size=len(edges))
    mu = rng.uniform(*mu_range, size=n)
    return WeightedGraph(tuple(range(n)), mu, np.zeros(n), eu, ev, ew, np.zeros(n))


def random_potential(rng, graph, v_range=(-1.0, 1.0)):
    return PotentialField(graph, rng.uniform(*v_range, size=graph.n_vertices))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
