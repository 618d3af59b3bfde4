"""Graph classification with random soft edges, edge/node dropping baselines and a WL collision audit."""

from .augment import AugmentSpec, Method, augment_epoch, drop_edge, drop_node, soft_edge
from .graph import Dataset, Graph
from .gnn import Arch, ModelConfig, ModelParams, Readout, forward_batch, forward_graph
from .wl import CollisionReport, WlSignature, audit_dataset, verify_lemma2, wl_refine

__version__ = "0.1.0"

__all__ = [
    "Arch", "AugmentSpec", "CollisionReport", "Dataset", "Graph", "Method", "ModelConfig",
    "ModelParams", "Readout", "WlSignature", "audit_dataset", "augment_epoch", "drop_edge",
    "drop_node", "forward_batch", "forward_graph", "soft_edge", "verify_lemma2", "wl_refine",
]
