import numpy as np
import pytest

from hyperheat import Hypergraph
from hyperheat.laplacian import WeightedGraph
from hyperheat.cli import planted_hypergraph


@pytest.fixture
def two_vertex():
    return Hypergraph(2, [([0, 1], 1.0)])


@pytest.fixture
def triangle_edge():
    """One hyperedge {a, b, c} with unit weight (unit degrees)."""
    return Hypergraph(3, [([0, 1, 2], 1.0)])


@pytest.fixture
def four_vertex():
    """The running example: {a,b,c} and {c,d}, unit weights."""
    return Hypergraph(4, [([0, 1, 2], 1.0), ([2, 3], 1.0)])


@pytest.fixture
def k3():
    """Complete graph K3 as a 2-uniform hypergraph."""
    return Hypergraph(3, [([0, 1], 1.0), ([1, 2], 1.0), ([0, 2], 1.0)])


@pytest.fixture
def two_triangles():
    """Two unit-weight triangles joined by one bridge edge."""
    edges = [([0, 1], 1.0), ([1, 2], 1.0), ([0, 2], 1.0),
             ([3, 4], 1.0), ([4, 5], 1.0), ([3, 5], 1.0),
             ([2, 3], 1.0)]
    return Hypergraph(6, edges)


@pytest.fixture
def star():
    """A 4-leaf star of pair edges around center 0."""
    return Hypergraph(5, [([0, i], 1.0) for i in range(1, 5)])


def seeded_instance(seed, idx, n_lo=4, n_hi=8, bridges=None):
    """Deterministic planted instance for randomized batteries."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, idx]))
    n = int(rng.integers(n_lo, n_hi + 1))
    b = bridges if bridges is not None else int(rng.integers(1, 3))
    return planted_hypergraph(rng, n, bridges=b), rng


def random_weighted_graph(rng, m, density=0.6, self_loops=True):
    """Random connected weighted graph with optional self-loops."""
    while True:
        W = np.zeros((m, m))
        for i in range(m):
            for j in range(i + 1, m):
                if rng.random() < density:
                    W[i, j] = W[j, i] = rng.uniform(0.2, 2.0)
        # connectivity via union-find
        parent = list(range(m))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i in range(m):
            for j in range(i + 1, m):
                if W[i, j] > 0:
                    parent[find(j)] = find(i)
        if len({find(v) for v in range(m)}) == 1:
            break
    if self_loops:
        for i in range(m):
            W[i, i] = rng.uniform(0.0, 1.0)
    return WeightedGraph(W)
