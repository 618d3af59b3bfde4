"""Hand-built graphs used by tests, the CLI ``verify`` suites and scripts."""

from __future__ import annotations

import numpy as np

from .graph import Dataset, Graph


def _uniform(n: int) -> np.ndarray:
    return np.ones((n, 1))


def decalin(label: int = 0) -> Graph:
    """Two 6-rings fused on the bond 0-5 (10 atoms, 11 bonds)."""
    ring_a = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0)]
    ring_b = [(5, 6), (6, 7), (7, 8), (8, 9), (9, 0)]
    return Graph.from_edges(_uniform(10), ring_a + ring_b, label)


def bicyclopentyl(label: int = 1) -> Graph:
    """Two 5-rings joined by the bridge 0-5 (10 atoms, 11 bonds)."""
    ring_a = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]
    ring_b = [(5, 6), (6, 7), (7, 8), (8, 9), (9, 5)]
    return Graph.from_edges(_uniform(10), ring_a + ring_b + [(0, 5)], label)


def decalin_pair() -> Dataset:
    """Decalin (label 0) and Bicyclopentyl (label 1); 1-WL cannot tell them apart."""
    return Dataset((decalin(0), bicyclopentyl(1)), 2, "DECALIN_PAIR")


def _path(n: int) -> list[tuple[int, int]]:
    return [(i, i + 1) for i in range(n - 1)]


# Three opposite-label pairs of 10-node, 10-edge graphs.  Deleting the listed
# edges of both members of pair i leaves the same graph, mimicking 10/20/30%
# edge deletion.
COLLISION_PAIRS = (
    # ring vs path with chord; common core: path on 10 nodes
    ((_path(10) + [(9, 0)], [(9, 0)]),
     (_path(10) + [(0, 5)], [(0, 5)])),
    # common core: path on nodes 0..8 plus isolated node 9
    ((_path(9) + [(8, 9), (0, 4)], [(8, 9), (0, 4)]),
     (_path(9) + [(4, 9), (2, 6)], [(4, 9), (2, 6)])),
    # common core: path on nodes 0..7 plus isolated nodes 8, 9
    ((_path(8) + [(7, 8), (8, 9), (0, 3)], [(7, 8), (8, 9), (0, 3)]),
     (_path(8) + [(3, 8), (4, 9), (1, 6)], [(3, 8), (4, 9), (1, 6)])),
)


def collision_pairs() -> Dataset:
    """Six graphs: pairs at positions (0,1), (2,3), (4,5) carry labels 0 and 1."""
    graphs = []
    for a, b in COLLISION_PAIRS:
        graphs.append(Graph.from_edges(_uniform(10), a[0], 0))
        graphs.append(Graph.from_edges(_uniform(10), b[0], 1))
    return Dataset(tuple(graphs), 2, "COLLISION_PAIRS")


def collision_cores() -> list[tuple[Graph, Graph]]:
    """Each pair with its red edges removed; both members should be identical."""
    out = []
    for a, b in COLLISION_PAIRS:
        ga = Graph.from_edges(_uniform(10), [e for e in a[0] if e not in a[1]], 0)
        gb = Graph.from_edges(_uniform(10), [e for e in b[0] if e not in b[1]], 1)
        out.append((ga, gb))
    return out


def size_separable(n_per_class: int = 10, seed: int = 0) -> Dataset:
    """Paths (label 0, 3-4 nodes) versus rings (label 1, 8-9 nodes) with one-hot features."""
    rng = np.random.default_rng(seed)
    graphs = []
    for i in range(2 * n_per_class):
        label = i % 2
        n = int(rng.integers(3, 5)) if label == 0 else int(rng.integers(8, 10))
        edges = _path(n) + ([(n - 1, 0)] if label == 1 else [])
        x = np.zeros((n, 2))
        x[:, 0] = 1.0
        graphs.append(Graph.from_edges(x, edges, label))
    return Dataset(tuple(graphs), 2, "SIZE_TOY", node_label_dim=2)


def random_graph(rng: np.random.Generator, n: int, p: float = 0.4, feature_dim: int = 3,
                 categorical: bool = True, label: int = 0) -> Graph:
    """Erdos-Renyi graph with one-hot (or Gaussian) node features."""
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    if categorical:
        x = np.zeros((n, feature_dim))
        x[np.arange(n), rng.integers(0, feature_dim, size=n)] = 1.0
    else:
        x = rng.normal(size=(n, feature_dim))
    return Graph.from_edges(x, edges, label)
