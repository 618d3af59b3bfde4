"""Per-epoch graph augmentations: SoftEdge, DropEdge and DropNode.

All transforms are pure functions of a graph and a ``numpy.random.Generator``.
:func:`augment_epoch` derives one Philox stream per ``(seed, epoch, graph)``
from a :class:`numpy.random.SeedSequence`, which makes every augmented graph
independent of iteration order and scheduling.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .graph import Dataset, Graph

_MASK64 = (1 << 64) - 1


class Method(str, enum.Enum):
    NONE = "none"
    SOFTEDGE = "softedge"
    DROPEDGE = "dropedge"
    DROPNODE = "dropnode"


@dataclass(frozen=True)
class AugmentSpec:
    method: Method = Method.NONE
    ratio: float = 0.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not 0.0 <= self.ratio < 1.0:
            raise ValueError(f"ratio must lie in [0, 1), got {self.ratio}")
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)

    def to_dict(self) -> dict:
        return {"method": self.method.value, "ratio": self.ratio, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentSpec":
        return cls(Method(d.get("method", "none")), float(d.get("ratio", 0.0)), int(d.get("seed", 0)))


def rng_for(*keys: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by a tuple of non-negative ints."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) & _MASK64 for k in keys])))


def ceil_count(ratio: float, total: int) -> int:
    # round first so that e.g. 0.6 * 10 = 6.000000000000001 does not become 7
    return min(total, math.ceil(round(ratio * total, 9)))


def floor_count(ratio: float, total: int) -> int:
    return math.floor(round(ratio * total, 9))


def _uniform_open01(rng: np.random.Generator, size: int) -> np.ndarray:
    w = 1.0 - rng.random(size)
    while True:
        hit = w >= 1.0
        if not hit.any():
            return w
        w[hit] = 1.0 - rng.random(int(hit.sum()))


def _edge_arc_pairs(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """For each undirected edge (u < v, sorted) the index of arc (u,v) and of arc (v,u)."""
    n = g.num_nodes
    keys = g.src * n + g.dst
    fwd = np.nonzero(g.src < g.dst)[0]
    rev = np.searchsorted(keys, g.dst[fwd] * n + g.src[fwd])
    return fwd, rev


def soft_edge(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Give ``ceil(ratio * |E|)`` random undirected edges a weight from U(0, 1).

    Edges are chosen uniformly without replacement; each chosen edge gets one
    fresh weight shared by both of its arcs.  Everything else is unchanged.
    """
    m = g.num_edges
    k = ceil_count(ratio, m)
    if k == 0:
        return g
    fwd, rev = _edge_arc_pairs(g)
    chosen = rng.choice(m, size=k, replace=False)
    w = np.array(g.weights, copy=True)
    soft = _uniform_open01(rng, k)
    w[fwd[chosen]] = soft
    w[rev[chosen]] = soft
    return g.with_weights(w)


def drop_edge(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Delete ``ceil(ratio * |E|)`` random undirected edges (both arcs)."""
    m = g.num_edges
    k = ceil_count(ratio, m)
    if k == 0:
        return g
    fwd, rev = _edge_arc_pairs(g)
    chosen = rng.choice(m, size=k, replace=False)
    keep = np.ones(g.num_arcs, dtype=bool)
    keep[fwd[chosen]] = False
    keep[rev[chosen]] = False
    return Graph(g.features, g.src[keep], g.dst[keep], g.weights[keep], g.label)


def drop_node(g: Graph, ratio: float, rng: np.random.Generator) -> Graph:
    """Delete ``floor(ratio * N)`` random nodes and their edges; at least one node survives.

    Survivors are re-indexed contiguously in their original relative order.
    """
    n = g.num_nodes
    k = min(floor_count(ratio, n), n - 1)
    if k <= 0:
        return g
    dropped = rng.choice(n, size=k, replace=False)
    alive = np.ones(n, dtype=bool)
    alive[dropped] = False
    new_index = np.cumsum(alive) - 1
    keep = alive[g.src] & alive[g.dst]
    return Graph(g.features[alive], new_index[g.src[keep]], new_index[g.dst[keep]],
                 g.weights[keep], g.label)


_TRANSFORMS = {
    Method.SOFTEDGE: soft_edge,
    Method.DROPEDGE: drop_edge,
    Method.DROPNODE: drop_node,
}


def apply(g: Graph, spec: AugmentSpec, rng: np.random.Generator) -> Graph:
    if spec.method is Method.NONE or spec.ratio == 0.0:
        return g
    return _TRANSFORMS[spec.method](g, spec.ratio, rng)


def augment_graph(g: Graph, spec: AugmentSpec, epoch: int, index: int) -> Graph:
    return apply(g, spec, rng_for(spec.seed, epoch, index))


def augment_epoch(ds: Dataset, spec: AugmentSpec, epoch: int, indices=None) -> Dataset:
    """Augment every graph (or the graphs at ``indices``) for one epoch.

    The stream for graph ``i`` is keyed by ``(spec.seed, epoch, i)`` where ``i``
    is the position in ``ds``, so augmenting a subset yields the same graphs as
    augmenting the full dataset.
    """
    if spec.method is Method.NONE and indices is None:
        return ds
    if indices is None:
        indices = range(len(ds))
    return ds.replace_graphs(augment_graph(ds.graphs[i], spec, epoch, i) for i in indices)
