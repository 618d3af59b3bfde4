"""Immutable graph data model with soft edge weights.

A :class:`Graph` stores an undirected graph as a sorted list of directed arcs.
Every undirected edge ``{u, v}`` appears as both ``(u, v)`` and ``(v, u)`` with
the same weight.  Weights live in ``(0, 1]``; an edge that is absent has no arc
at all, so "edge exists" and "weight > 0" are the same statement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected, weighted, node-featured graph with a class label.

    Use :meth:`from_edges` for the usual construction from an undirected edge
    list; the raw constructor expects arcs already symmetric and validates them.
    """

    features: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    weights: np.ndarray
    label: int
    _indptr: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError(f"features must be an N x d matrix with N, d >= 1, got shape {x.shape}")
        n = x.shape[0]
        src = np.asarray(self.src, dtype=np.int64).reshape(-1)
        dst = np.asarray(self.dst, dtype=np.int64).reshape(-1)
        w = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if not (len(src) == len(dst) == len(w)):
            raise ValueError("src, dst and weights must have equal length")
        if len(src):
            if src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n:
                raise ValueError("arc endpoint out of range")
            if np.any(src == dst):
                raise ValueError("self-loops are not stored in a Graph")
            if not np.all((w > 0.0) & (w <= 1.0)):
                raise ValueError("edge weights must lie in (0, 1]")
        order = np.lexsort((dst, src))
        src, dst, w = src[order], dst[order], w[order]
        keys = src * n + dst
        if len(keys) > 1 and np.any(keys[1:] == keys[:-1]):
            raise ValueError("duplicate arcs")
        # symmetry: the reversed arc list, re-sorted, must coincide exactly
        rorder = np.lexsort((src, dst))
        if not (np.array_equal(dst[rorder], src) and np.array_equal(src[rorder], dst)
                and np.array_equal(w[rorder], w)):
            raise ValueError("arcs must be symmetric with equal weights in both directions")
        label = int(self.label)
        if label < 0:
            raise ValueError("label must be a non-negative class index")
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        object.__setattr__(self, "features", _frozen(x))
        object.__setattr__(self, "src", _frozen(src))
        object.__setattr__(self, "dst", _frozen(dst))
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "_indptr", _frozen(indptr))

    @classmethod
    def from_edges(
        cls,
        features,
        edges: Iterable[tuple[int, int]],
        label: int = 0,
        weights: Sequence[float] | None = None,
    ) -> "Graph":
        """Build a graph from undirected edges ``(u, v)``; each becomes two arcs."""
        edges = [(int(u), int(v)) for u, v in edges]
        if weights is None:
            weights = [1.0] * len(edges)
        if len(weights) != len(edges):
            raise ValueError("one weight per undirected edge is required")
        src = [u for u, v in edges] + [v for u, v in edges]
        dst = [v for u, v in edges] + [u for u, v in edges]
        w = list(weights) + list(weights)
        return cls(features, np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64),
                   np.array(w, dtype=np.float64), label)

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_arcs(self) -> int:
        return len(self.src)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return len(self.src) // 2

    def undirected_edges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(u, v, w)`` for each undirected edge with ``u < v``, sorted."""
        keep = self.src < self.dst
        return self.src[keep], self.dst[keep], self.weights[keep]

    def with_weights(self, weights: np.ndarray) -> "Graph":
        """Copy of this graph with per-arc weights replaced (arc order as in ``src``)."""
        return Graph(self.features, self.src, self.dst, weights, self.label)

    def neighbors(self, v: int) -> list[tuple[int, float]]:
        """``(u, e_vu)`` for every arc leaving ``v``, in ascending ``u``."""
        v = _check_node(self, v)
        lo, hi = self._indptr[v], self._indptr[v + 1]
        return [(int(u), float(w)) for u, w in zip(self.dst[lo:hi], self.weights[lo:hi])]

    def degree_weighted(self, v: int) -> float:
        """``1 + sum of incident edge weights``; the 1 is the implicit self-loop."""
        v = _check_node(self, v)
        lo, hi = self._indptr[v], self._indptr[v + 1]
        return 1.0 + float(self.weights[lo:hi].sum())

    def weighted_degrees(self) -> np.ndarray:
        """Vector of :meth:`degree_weighted` for all nodes."""
        return 1.0 + np.bincount(self.src, weights=self.weights, minlength=self.num_nodes)

    def permute(self, perm: Sequence[int]) -> "Graph":
        """Relabel nodes so that old node ``i`` becomes new node ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        n = self.num_nodes
        if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
            raise ValueError("perm must be a bijection on the node set")
        x = np.empty_like(self.features)
        x[perm] = self.features
        return Graph(x, perm[self.src], perm[self.dst], self.weights, self.label)

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.label == other.label
            and self.features.shape == other.features.shape
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None


def _check_node(g: Graph, v: int) -> int:
    v = int(v)
    if not 0 <= v < g.num_nodes:
        raise IndexError(f"node {v} out of range for graph with {g.num_nodes} nodes")
    return v


def neighbors(g: Graph, v: int) -> list[tuple[int, float]]:
    return g.neighbors(v)


def degree_weighted(g: Graph, v: int) -> float:
    return g.degree_weighted(v)


def permute(g: Graph, perm: Sequence[int]) -> Graph:
    return g.permute(perm)


def inverse_permutation(perm: Sequence[int]) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(len(perm))
    return inv


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered collection of graphs sharing one feature layout.

    ``node_label_dim`` and ``attribute_dim`` describe the feature columns:
    the first ``node_label_dim`` columns are a one-hot node label, the next
    ``attribute_dim`` are continuous attributes.  When both are zero the graphs
    carry a single constant feature column.
    """

    graphs: tuple[Graph, ...]
    num_classes: int
    name: str = "dataset"
    node_label_dim: int = 0
    attribute_dim: int = 0

    def __post_init__(self):
        graphs = tuple(self.graphs)
        object.__setattr__(self, "graphs", graphs)
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        dims = {g.feature_dim for g in graphs}
        if len(dims) > 1:
            raise ValueError(f"graphs disagree on feature_dim: {sorted(dims)}")
        for i, g in enumerate(graphs):
            if g.label >= self.num_classes:
                raise ValueError(f"graph {i} has label {g.label} >= num_classes {self.num_classes}")
        expected = self.node_label_dim + self.attribute_dim or 1
        if graphs and dims.pop() != expected:
            raise ValueError("feature layout does not match graph feature_dim")

    @property
    def feature_dim(self) -> int:
        if self.graphs:
            return self.graphs[0].feature_dim
        return self.node_label_dim + self.attribute_dim or 1

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)

    def __len__(self):
        return len(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    def __iter__(self):
        return iter(self.graphs)

    def replace_graphs(self, graphs: Iterable[Graph]) -> "Dataset":
        return Dataset(tuple(graphs), self.num_classes, self.name,
                       self.node_label_dim, self.attribute_dim)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return self.replace_graphs(self.graphs[i] for i in indices)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.num_classes == other.num_classes
            and self.name == other.name
            and self.node_label_dim == other.node_label_dim
            and self.attribute_dim == other.attribute_dim
            and self.graphs == other.graphs
        )

    __hash__ = None
