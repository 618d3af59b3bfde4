"""Weighted message-passing networks: ResGCN and GIN.

Both layers take per-arc edge weights.  The GCN layer normalises with weighted
degrees ``1 + sum of incident weights`` and adds a unit self-loop; the GIN
layer adds ``(1 + eps) * h_v`` to the weighted neighbour sum and feeds an MLP.

Graphs are batched block-diagonally into a :class:`GraphBatch`.  A batch can
also be built directly from raw arcs, which is how tests feed zero-weight arcs
(these cannot exist inside a :class:`~softedge.graph.Graph`).
"""

from __future__ import annotations

import enum
import json
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .augment import rng_for
from .graph import Graph

CHECKPOINT_FORMAT = "softedge-checkpoint"
CHECKPOINT_VERSION = 1


class Arch(str, enum.Enum):
    RESGCN = "resgcn"
    GIN = "gin"


class Readout(str, enum.Enum):
    SUM = "sum"
    MEAN = "mean"
    MAX = "max"


@dataclass(frozen=True)
class ModelConfig:
    arch: Arch = Arch.GIN
    num_layers: int = 5
    hidden_dim: int = 64
    readout: Readout | None = None
    dropout_after_dense: float = 0.0
    gin_epsilon_learnable: bool = True

    def __post_init__(self):
        object.__setattr__(self, "arch", Arch(self.arch))
        if self.readout is None:
            default = Readout.SUM if self.arch is Arch.GIN else Readout.MEAN
            object.__setattr__(self, "readout", default)
        object.__setattr__(self, "readout", Readout(self.readout))
        if self.num_layers < 1 or self.hidden_dim < 1:
            raise ValueError("num_layers and hidden_dim must be >= 1")
        if not 0.0 <= self.dropout_after_dense < 1.0:
            raise ValueError("dropout_after_dense must lie in [0, 1)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["arch"] = self.arch.value
        d["readout"] = self.readout.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


@dataclass(frozen=True)
class GraphBatch:
    """Block-diagonal union of graphs.

    ``src``/``dst``/``weight`` are the arcs of all graphs with node indices
    offset into the concatenated feature matrix; ``node_graph[i]`` is the batch
    position of node ``i``.
    """

    x: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    node_graph: np.ndarray
    num_graphs: int

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @classmethod
    def from_graphs(cls, graphs: Sequence[Graph]) -> "GraphBatch":
        if len(graphs) == 0:
            raise ValueError("empty batch")
        sizes = np.array([g.num_nodes for g in graphs])
        offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        return cls(
            x=np.vstack([g.features for g in graphs]),
            src=np.concatenate([g.src + o for g, o in zip(graphs, offsets)]),
            dst=np.concatenate([g.dst + o for g, o in zip(graphs, offsets)]),
            weight=np.concatenate([g.weights for g in graphs]),
            node_graph=np.repeat(np.arange(len(graphs)), sizes),
            num_graphs=len(graphs),
        )

    @classmethod
    def from_arcs(cls, x, src, dst, weight) -> "GraphBatch":
        """Single graph from raw arcs; weights may be zero (testing only)."""
        x = np.asarray(x, dtype=np.float64)
        return cls(x, np.asarray(src, dtype=np.int64), np.asarray(dst, dtype=np.int64),
                   np.asarray(weight, dtype=np.float64), np.zeros(x.shape[0], dtype=np.int64), 1)

    def weighted_degrees(self) -> np.ndarray:
        return 1.0 + np.bincount(self.dst, weights=self.weight, minlength=self.num_nodes)


# ---------------------------------------------------------------------------
# layers

def linear(h: Tensor, weight: Tensor, bias: Tensor | None) -> Tensor:
    out = ad.matmul(h, weight)
    return out if bias is None else ad.add(out, bias)


def gcn_propagate(h: Tensor, batch: GraphBatch) -> Tensor:
    """``sum over u in N(v) + {v} of e_uv / sqrt(d_u d_v) * h_u``."""
    deg = batch.weighted_degrees()
    inv_sqrt = 1.0 / np.sqrt(deg)
    norm = batch.weight * inv_sqrt[batch.src] * inv_sqrt[batch.dst]
    n = batch.num_nodes
    loops = np.arange(n)
    src = np.concatenate([batch.src, loops])
    dst = np.concatenate([batch.dst, loops])
    w = np.concatenate([norm, 1.0 / deg])
    return ad.scatter_weighted_sum(ad.row_gather(h, src), dst, w, n)


def gcn_layer_forward(h: Tensor, batch: GraphBatch, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """One weighted GCN layer: ``ReLU(W . normalised weighted aggregation)``."""
    if h.shape[0] != batch.num_nodes:
        raise ValueError("feature rows do not match the number of nodes")
    return ad.relu(linear(gcn_propagate(h, batch), weight, bias))


def gin_aggregate(h: Tensor, batch: GraphBatch, eps: Tensor) -> Tensor:
    """``(1 + eps) * h_v + sum over u in N(v) of e_uv * h_u``."""
    neigh = ad.scatter_weighted_sum(ad.row_gather(h, batch.src), batch.dst, batch.weight, batch.num_nodes)
    return ad.add(ad.mul(h, ad.add_scalar(eps, 1.0)), neigh)


def gin_layer_forward(h: Tensor, batch: GraphBatch, mlp: Sequence[Tensor], eps: Tensor) -> Tensor:
    """One weighted GIN layer with MLP ``Linear -> ReLU -> Linear``.

    ``mlp`` is ``(w1, b1, w2, b2)``.
    """
    if h.shape[0] != batch.num_nodes:
        raise ValueError("feature rows do not match the number of nodes")
    w1, b1, w2, b2 = mlp
    z = gin_aggregate(h, batch, eps)
    return linear(ad.relu(linear(z, w1, b1)), w2, b2)


# ---------------------------------------------------------------------------
# parameters

def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class ModelParams:
    """Named trainable tensors of one model, in a fixed order."""

    def __init__(self, config: ModelConfig, feature_dim: int, num_classes: int,
                 tensors: "OrderedDict[str, Tensor]"):
        self.config = config
        self.feature_dim = feature_dim
        self.num_classes = num_classes
        self.tensors = tensors

    @classmethod
    def init(cls, config: ModelConfig, feature_dim: int, num_classes: int, seed: int = 0) -> "ModelParams":
        rng = rng_for(seed, 0x9A2A)
        h = config.hidden_dim
        t: OrderedDict[str, Tensor] = OrderedDict()

        def weight(name, fi, fo):
            t[name] = Tensor(_glorot(rng, fi, fo), requires_grad=True, name=name)

        def bias(name, fo):
            t[name] = Tensor(np.zeros((1, fo)), requires_grad=True, name=name)

        for k in range(config.num_layers):
            d_in = feature_dim if k == 0 else h
            if config.arch is Arch.GIN:
                weight(f"gin{k}.lin1.weight", d_in, h)
                bias(f"gin{k}.lin1.bias", h)
                weight(f"gin{k}.lin2.weight", h, h)
                bias(f"gin{k}.lin2.bias", h)
                t[f"gin{k}.eps"] = Tensor(np.zeros((1, 1)), requires_grad=config.gin_epsilon_learnable,
                                          name=f"gin{k}.eps")
            else:
                weight(f"gcn{k}.weight", d_in, h)
                bias(f"gcn{k}.bias", h)
        weight("head.weight", h, num_classes)
        bias("head.bias", num_classes)
        return cls(config, feature_dim, num_classes, t)

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def trainable(self) -> list[Tensor]:
        return [t for t in self.tensors.values() if t.requires_grad]

    def zero_grad(self):
        for t in self.tensors.values():
            t.grad = None

    def copy(self) -> "ModelParams":
        tensors = OrderedDict(
            (k, Tensor(v.value.copy(), requires_grad=v.requires_grad, name=k)) for k, v in self.tensors.items())
        return ModelParams(self.config, self.feature_dim, self.num_classes, tensors)

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "feature_dim": self.feature_dim,
            "num_classes": self.num_classes,
            "params": [
                {"name": k, "shape": list(v.shape), "trainable": v.requires_grad,
                 "values": v.value.reshape(-1).tolist()}
                for k, v in self.tensors.items()
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        if d.get("format") != CHECKPOINT_FORMAT or d.get("version") != CHECKPOINT_VERSION:
            raise ValueError("not a version-1 softedge checkpoint")
        config = ModelConfig.from_dict(d["config"])
        tensors = OrderedDict()
        for p in d["params"]:
            value = np.array(p["values"], dtype=np.float64).reshape(p["shape"])
            tensors[p["name"]] = Tensor(value, requires_grad=p["trainable"], name=p["name"])
        params = cls(config, int(d["feature_dim"]), int(d["num_classes"]), tensors)
        expected = cls.init(config, params.feature_dim, params.num_classes)
        if [(k, v.shape) for k, v in expected.tensors.items()] != [(k, v.shape) for k, v in tensors.items()]:
            raise ValueError("checkpoint parameters do not match the model configuration")
        return params

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "ModelParams":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# full model

def node_embeddings(batch: GraphBatch, params: ModelParams) -> Tensor:
    cfg = params.config
    h = Tensor(batch.x)
    if batch.x.shape[1] != params.feature_dim:
        raise ValueError(f"feature dim {batch.x.shape[1]} does not match model input {params.feature_dim}")
    for k in range(cfg.num_layers):
        if cfg.arch is Arch.GIN:
            p = f"gin{k}."
            mlp = (params[p + "lin1.weight"], params[p + "lin1.bias"],
                   params[p + "lin2.weight"], params[p + "lin2.bias"])
            h = ad.relu(gin_layer_forward(h, batch, mlp, params[p + "eps"]))
        else:
            out = gcn_layer_forward(h, batch, params[f"gcn{k}.weight"], params[f"gcn{k}.bias"])
            # identity skip around every layer whose input already has hidden width
            h = out if k == 0 else ad.add(h, out)
    return h


def readout(h: Tensor, batch: GraphBatch, kind: Readout) -> Tensor:
    if kind is Readout.SUM:
        return ad.segment_sum(h, batch.node_graph, batch.num_graphs)
    if kind is Readout.MEAN:
        return ad.segment_mean(h, batch.node_graph, batch.num_graphs)
    return ad.segment_max(h, batch.node_graph, batch.num_graphs)


def forward_batch(graphs: Sequence[Graph] | GraphBatch, params: ModelParams, train_mode: bool = False,
                  rng: np.random.Generator | None = None) -> tuple[Tensor, Tensor]:
    """Logits ``B x C`` and graph embeddings ``B x hidden_dim`` for a batch."""
    batch = graphs if isinstance(graphs, GraphBatch) else GraphBatch.from_graphs(graphs)
    cfg = params.config
    h_graph = readout(node_embeddings(batch, params), batch, cfg.readout)
    z = ad.dropout(h_graph, cfg.dropout_after_dense, rng, train_mode)
    logits = linear(z, params["head.weight"], params["head.bias"])
    return logits, h_graph


def forward_graph(g: Graph, params: ModelParams, train_mode: bool = False,
                  rng: np.random.Generator | None = None) -> tuple[Tensor, Tensor]:
    """Single-graph forward; outputs are ``1 x C`` and ``1 x hidden_dim`` rows."""
    return forward_batch([g], params, train_mode, rng)


def embed(graphs: Sequence[Graph], params: ModelParams, batch_size: int = 256) -> np.ndarray:
    """Evaluation-mode graph embeddings as a ``len(graphs) x hidden_dim`` array."""
    parts = [forward_batch(graphs[i:i + batch_size], params)[1].value
             for i in range(0, len(graphs), batch_size)]
    return np.vstack(parts)


def predict(graphs: Sequence[Graph], params: ModelParams, batch_size: int = 256) -> np.ndarray:
    parts = [forward_batch(graphs[i:i + batch_size], params)[0].value
             for i in range(0, len(graphs), batch_size)]
    return np.vstack(parts).argmax(axis=1)
