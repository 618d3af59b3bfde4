"""Reader and writer for the TUDataset flat-file format.

Files for a dataset ``DS`` (all comma separated, 1-based ids):

* ``DS_A.txt``               one ``i, j`` row per arc (global node ids)
* ``DS_graph_indicator.txt`` line ``n`` holds the graph id of node ``n``
* ``DS_graph_labels.txt``    one integer per graph
* ``DS_node_labels.txt``     optional, one integer per node
* ``DS_node_attributes.txt`` optional, comma separated reals per node
* ``DS_edge_weights.txt``    optional sidecar, one real per ``DS_A.txt`` row

The last file is not part of the public collection; :func:`write_fixture` emits
it whenever some weight differs from 1 so that augmented datasets round-trip.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .graph import Dataset, Graph

log = logging.getLogger(__name__)

STATS_HEADER = "name,num_graphs,avg_nodes,avg_edges,feature_dim,num_classes"


class TuFormatError(ValueError):
    """Malformed or inconsistent TUDataset files."""

    def __init__(self, message: str, path: str | os.PathLike | None = None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = f"{self.path}:{line}: " if line is not None else f"{self.path}: "
        super().__init__(where + message)


@dataclass(frozen=True)
class TuDatasetFiles:
    name: str
    adjacency: Path
    graph_indicator: Path
    graph_labels: Path
    node_labels: Path | None = None
    node_attributes: Path | None = None
    edge_weights: Path | None = None

    @classmethod
    def locate(cls, directory: str | os.PathLike, name: str) -> "TuDatasetFiles":
        """Find ``name``'s files in ``directory`` or ``directory/name``."""
        base = Path(directory)
        if not (base / f"{name}_A.txt").exists() and (base / name / f"{name}_A.txt").exists():
            base = base / name

        def opt(suffix):
            p = base / f"{name}_{suffix}.txt"
            return p if p.exists() else None

        for suffix in ("edge_labels", "edge_attributes", "graph_attributes"):
            if opt(suffix) is not None:
                log.warning("%s: ignoring %s_%s.txt", name, name, suffix)
        return cls(
            name=name,
            adjacency=base / f"{name}_A.txt",
            graph_indicator=base / f"{name}_graph_indicator.txt",
            graph_labels=base / f"{name}_graph_labels.txt",
            node_labels=opt("node_labels"),
            node_attributes=opt("node_attributes"),
            edge_weights=opt("edge_weights"),
        )


@dataclass(frozen=True)
class DatasetStats:
    name: str
    num_graphs: int
    avg_nodes: float
    avg_edges: float
    feature_dim: int
    num_classes: int

    def csv_row(self) -> str:
        return (f"{self.name},{self.num_graphs},{self.avg_nodes:.4f},{self.avg_edges:.4f},"
                f"{self.feature_dim},{self.num_classes}")

    def table_row(self) -> str:
        return (f"{self.name}\t{self.num_graphs}\t{self.avg_nodes:.1f}\t{self.avg_edges:.1f}\t"
                f"{self.feature_dim}\t{self.num_classes}")


def _read_rows(path: Path, ncols: int | None, kind):
    """Parse a comma separated file; returns a list of rows (lists of ``kind``)."""
    if not path.exists():
        raise FileNotFoundError(f"missing TUDataset file: {path}")
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    # trailing blank lines are tolerated, interior ones are not
    while lines and not lines[-1].strip():
        lines.pop()
    for lineno, raw in enumerate(lines, start=1):
        parts = [p.strip() for p in raw.split(",")]
        if ncols is not None and len(parts) != ncols:
            raise TuFormatError(f"expected {ncols} comma separated values, got {len(parts)}", path, lineno)
        try:
            rows.append([kind(p) for p in parts])
        except ValueError:
            raise TuFormatError(f"cannot parse {raw.strip()!r}", path, lineno) from None
    return rows


def _as_int(s: str) -> int:
    return int(s)


def load_tudataset(files: TuDatasetFiles, use_node_attributes: bool | None = None) -> Dataset:
    """Parse TUDataset files into a :class:`Dataset` with unit edge weights.

    Node labels become one-hot columns (width ``max - min + 1``).  Continuous
    node attributes are appended only when ``use_node_attributes`` is true; by
    default they are used only if the dataset has no node labels.  Graph labels
    are remapped to ``0..C-1`` in ascending order of the original values.  Arcs
    are symmetrized and de-duplicated.
    """
    indicator = np.array([r[0] for r in _read_rows(files.graph_indicator, 1, _as_int)], dtype=np.int64)
    n_total = len(indicator)
    if n_total == 0:
        raise TuFormatError("no nodes", files.graph_indicator)
    glabels_raw = [r[0] for r in _read_rows(files.graph_labels, 1, _as_int)]
    n_graphs = len(glabels_raw)
    if np.any(np.diff(indicator) < 0):
        bad = int(np.argmax(np.diff(indicator) < 0)) + 2
        raise TuFormatError("graph ids must be non-decreasing (nodes grouped by graph)",
                            files.graph_indicator, bad)
    present = np.unique(indicator)
    if present[0] != 1 or not np.array_equal(present, np.arange(1, len(present) + 1)):
        raise TuFormatError("graph ids must be contiguous starting at 1", files.graph_indicator)
    if len(present) != n_graphs:
        raise TuFormatError(f"{len(present)} graphs in indicator but {n_graphs} graph labels",
                            files.graph_labels)

    # node_offset[g] = first global (0-based) node of graph g
    counts = np.bincount(indicator - 1, minlength=n_graphs)
    node_offset = np.concatenate([[0], np.cumsum(counts)])

    adj_rows = _read_rows(files.adjacency, 2, _as_int)
    adj = np.array(adj_rows, dtype=np.int64).reshape(-1, 2)
    if files.edge_weights is not None:
        ew = np.array([r[0] for r in _read_rows(files.edge_weights, 1, float)], dtype=np.float64)
        if len(ew) != len(adj):
            raise TuFormatError(f"{len(ew)} weights for {len(adj)} adjacency rows", files.edge_weights)
    else:
        ew = np.ones(len(adj), dtype=np.float64)
    if len(adj):
        bad = np.nonzero((adj < 1).any(axis=1) | (adj > n_total).any(axis=1))[0]
        if len(bad):
            raise TuFormatError("node id not present in graph indicator", files.adjacency, int(bad[0]) + 1)
        gu, gv = indicator[adj[:, 0] - 1], indicator[adj[:, 1] - 1]
        bad = np.nonzero(gu != gv)[0]
        if len(bad):
            raise TuFormatError("edge joins nodes of different graphs", files.adjacency, int(bad[0]) + 1)

    features, label_dim, attr_dim = _node_features(files, n_total, use_node_attributes)

    classes = sorted(set(glabels_raw))
    remap = {c: i for i, c in enumerate(classes)}

    # bucket arcs per graph
    arc_graph = indicator[adj[:, 0] - 1] - 1 if len(adj) else np.zeros(0, dtype=np.int64)
    order = np.argsort(arc_graph, kind="stable")
    arc_bounds = np.searchsorted(arc_graph[order], np.arange(n_graphs + 1))

    graphs = []
    for g in range(n_graphs):
        lo, hi = node_offset[g], node_offset[g + 1]
        sel = order[arc_bounds[g]:arc_bounds[g + 1]]
        u = adj[sel, 0] - 1 - lo
        v = adj[sel, 1] - 1 - lo
        w = ew[sel]
        graphs.append(_symmetrized_graph(features[lo:hi], u, v, w, remap[glabels_raw[g]], g, files))
    return Dataset(tuple(graphs), len(classes), files.name, label_dim, attr_dim)


def _symmetrized_graph(x, u, v, w, label, gidx, files) -> Graph:
    arcs: dict[tuple[int, int], float] = {}
    for a, b, weight in zip(u.tolist(), v.tolist(), w.tolist()):
        if a == b:
            log.warning("%s: dropping self-loop on node %d of graph %d", files.name, a, gidx + 1)
            continue
        for key in ((a, b), (b, a)):
            prev = arcs.get(key)
            if prev is not None and prev != weight:
                raise TuFormatError(f"conflicting weights for edge {a}-{b} in graph {gidx + 1}",
                                    files.edge_weights or files.adjacency)
            arcs[key] = weight
    keys = sorted(arcs)
    src = np.array([k[0] for k in keys], dtype=np.int64)
    dst = np.array([k[1] for k in keys], dtype=np.int64)
    weights = np.array([arcs[k] for k in keys], dtype=np.float64)
    return Graph(x, src, dst, weights, label)


def _node_features(files: TuDatasetFiles, n_total: int, use_node_attributes):
    blocks = []
    label_dim = attr_dim = 0
    if files.node_labels is not None:
        nl = np.array([r[0] for r in _read_rows(files.node_labels, 1, _as_int)], dtype=np.int64)
        if len(nl) != n_total:
            raise TuFormatError(f"{len(nl)} node labels for {n_total} nodes", files.node_labels)
        nl = nl - nl.min()
        label_dim = int(nl.max()) + 1
        onehot = np.zeros((n_total, label_dim))
        onehot[np.arange(n_total), nl] = 1.0
        blocks.append(onehot)
    if use_node_attributes is None:
        use_node_attributes = files.node_labels is None
    if files.node_attributes is not None and use_node_attributes:
        rows = _read_rows(files.node_attributes, None, float)
        if len(rows) != n_total:
            raise TuFormatError(f"{len(rows)} attribute rows for {n_total} nodes", files.node_attributes)
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise TuFormatError("node attribute rows differ in length", files.node_attributes)
        attrs = np.array(rows, dtype=np.float64)
        attr_dim = attrs.shape[1]
        blocks.append(attrs)
    if not blocks:
        return np.ones((n_total, 1)), 0, 0
    return np.hstack(blocks), label_dim, attr_dim


def load_dataset(directory: str | os.PathLike, name: str, use_node_attributes: bool | None = None) -> Dataset:
    return load_tudataset(TuDatasetFiles.locate(directory, name), use_node_attributes)


def compute_stats(ds: Dataset) -> DatasetStats:
    """Per-graph means; edges are counted as arcs (two per undirected edge)."""
    if len(ds) == 0:
        raise ValueError("cannot compute statistics of an empty dataset")
    nodes = np.array([g.num_nodes for g in ds], dtype=np.float64)
    arcs = np.array([g.num_arcs for g in ds], dtype=np.float64)
    return DatasetStats(ds.name, len(ds), float(nodes.mean()), float(arcs.mean()),
                        ds.feature_dim, ds.num_classes)


def write_fixture(ds: Dataset, directory: str | os.PathLike, weights: bool | None = None) -> TuDatasetFiles:
    """Write ``ds`` in TUDataset format so that :func:`load_tudataset` inverts it.

    Node labels are recovered from the one-hot columns and attributes are
    written with ``repr`` precision.  The ``_edge_weights`` sidecar (one weight
    per adjacency row) is emitted when ``weights`` is true, or, by default,
    when some weight differs from 1.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    name = ds.name
    adj_lines, ind_lines, nl_lines, attr_lines, w_lines = [], [], [], [], []
    offset = 0
    any_soft = False
    for gi, g in enumerate(ds.graphs, start=1):
        for u, v, w in zip(g.src.tolist(), g.dst.tolist(), g.weights.tolist()):
            adj_lines.append(f"{u + 1 + offset}, {v + 1 + offset}")
            w_lines.append(repr(float(w)))
            any_soft = any_soft or w != 1.0
        ind_lines.extend([str(gi)] * g.num_nodes)
        if ds.node_label_dim:
            block = g.features[:, :ds.node_label_dim]
            nl_lines.extend(str(int(i)) for i in np.argmax(block, axis=1))
        if ds.attribute_dim:
            block = g.features[:, ds.node_label_dim:ds.node_label_dim + ds.attribute_dim]
            attr_lines.extend(", ".join(repr(float(a)) for a in row) for row in block)
        offset += g.num_nodes

    def emit(suffix, lines):
        p = out / f"{name}_{suffix}.txt"
        with open(p, "w", encoding="utf-8") as fh:
            fh.write("".join(line + "\n" for line in lines))
        return p

    if weights is not None:
        any_soft = bool(weights)
    files = TuDatasetFiles(
        name=name,
        adjacency=emit("A", adj_lines),
        graph_indicator=emit("graph_indicator", ind_lines),
        graph_labels=emit("graph_labels", [str(g.label) for g in ds.graphs]),
        node_labels=emit("node_labels", nl_lines) if ds.node_label_dim else None,
        node_attributes=emit("node_attributes", attr_lines) if ds.attribute_dim else None,
        edge_weights=emit("edge_weights", w_lines) if any_soft else None,
    )
    if not any_soft:
        (out / f"{name}_edge_weights.txt").unlink(missing_ok=True)
    return files


def stats_close(stats: DatasetStats, avg_nodes: float, avg_edges: float, tol: float = 0.05) -> bool:
    return math.isclose(stats.avg_nodes, avg_nodes, abs_tol=tol) and math.isclose(
        stats.avg_edges, avg_edges, abs_tol=tol)
