"""1-WL colour refinement and the sample-collision audit.

Colours are 128-bit BLAKE2b digests, so the colour of a node depends only on
its own refinement history and can be compared across graphs without a shared
relabelling table.  In the weighted variant a neighbour contributes the pair
(colour, exact bit pattern of the edge weight).

Refinement stops early once a graph's colour partition is stable.  Two graphs
whose histograms agree at the stable round keep agreeing forever, and graphs
that differ keep differing, so the signature ``(stable round, digest)`` induces
exactly the same equivalence as running all ``k`` rounds.
"""

from __future__ import annotations

import hashlib
import struct
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .augment import AugmentSpec, Method, augment_epoch, rng_for, soft_edge
from .graph import Dataset, Graph


def _digest(*chunks: bytes) -> bytes:
    h = hashlib.blake2b(digest_size=16)
    for c in chunks:
        h.update(c)
    return h.digest()


@dataclass(frozen=True)
class WlSignature:
    rounds: int
    weighted: bool
    hash: bytes

    def hex(self) -> str:
        return self.hash.hex()


def node_colors(g: Graph, k: int, weighted: bool = False) -> tuple[list[bytes], int]:
    """Refine for at most ``k`` rounds; returns final colours and the round reached."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = g.num_nodes
    colors = [_digest(b"x", row.tobytes()) for row in g.features]
    n_classes = len(set(colors))
    indptr = g._indptr
    dst = g.dst.tolist()
    wbytes = [struct.pack("<d", w) for w in g.weights.tolist()] if weighted else None
    done = 0
    for r in range(1, k + 1):
        new = []
        for v in range(n):
            lo, hi = indptr[v], indptr[v + 1]
            if weighted:
                msgs = sorted(colors[dst[a]] + wbytes[a] for a in range(lo, hi))
            else:
                msgs = sorted(colors[dst[a]] for a in range(lo, hi))
            new.append(_digest(b"r", colors[v], struct.pack("<q", len(msgs)), *msgs))
        colors = new
        done = r
        c = len(set(colors))
        if c == n_classes:
            break
        n_classes = c
    return colors, done


def wl_refine(g: Graph, k: int, weighted: bool = False) -> WlSignature:
    """Isomorphism-invariant digest of the colour multiset after ``k`` rounds."""
    colors, reached = node_colors(g, k, weighted)
    body = b"".join(sorted(colors))
    h = _digest(b"G", struct.pack("<qq?", g.num_nodes, reached, weighted), body)
    return WlSignature(k, weighted, h)


def wl_equivalent_bruteforce(g: Graph, h: Graph, k: int | None = None) -> bool:
    """Reference 1-WL test on the disjoint union with explicit integer colours.

    Colours are renumbered each round by sorting the exact signature tuples, so
    no digest is involved.  ``k`` defaults to ``g.num_nodes + h.num_nodes``,
    enough for the joint partition to stabilise.
    """
    if g.num_nodes != h.num_nodes:
        return False
    graphs = (g, h)
    offsets = (0, g.num_nodes)
    total = g.num_nodes + h.num_nodes
    adj: list[list[int]] = [[] for _ in range(total)]
    feats = []
    for off, gr in zip(offsets, graphs):
        for u, v in zip(gr.src.tolist(), gr.dst.tolist()):
            adj[u + off].append(v + off)
        feats.extend(tuple(row) for row in gr.features.tolist())
    palette = {f: i for i, f in enumerate(sorted(set(feats)))}
    colors = [palette[f] for f in feats]
    rounds = total if k is None else k

    def histograms_equal(cols):
        a = sorted(cols[:g.num_nodes])
        b = sorted(cols[g.num_nodes:])
        return a == b

    if not histograms_equal(colors):
        return False
    for _ in range(rounds):
        sigs = [(colors[v], tuple(sorted(colors[u] for u in adj[v]))) for v in range(total)]
        table = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [table[s] for s in sigs]
        if not histograms_equal(new):
            return False
        if len(table) == len(set(colors)):
            return True
        colors = new
    return True


def default_rounds(ds: Dataset) -> int:
    return max(1, max(g.num_nodes for g in ds))


# ---------------------------------------------------------------------------
# collision audit

@dataclass(frozen=True)
class GraphRef:
    """An original graph (``epoch is None``) or its augmented copy from ``epoch``."""

    index: int
    epoch: int | None = None

    def to_dict(self) -> dict:
        if self.epoch is None:
            return {"graph": self.index}
        return {"graph": self.index, "epoch": self.epoch}


@dataclass
class CollisionReport:
    dataset: str
    spec: AugmentSpec
    k: int
    epochs: int
    counts: dict[str, int] = field(default_factory=lambda: {"type1": 0, "type2": 0, "type3": 0})
    type1: list[tuple[GraphRef, GraphRef]] = field(default_factory=list)
    type2: list[tuple[GraphRef, GraphRef]] = field(default_factory=list)
    type3: list[tuple[GraphRef, GraphRef]] = field(default_factory=list)
    max_witnesses: int | None = None

    NOTE = ("Collisions are detected at the input level: two graphs collide when their 1-WL "
            "signatures agree and labels differ. This is stricter than overlap of learned "
            "embeddings, which also depends on the trained model.")

    def to_dict(self) -> dict:
        def pairs(lst):
            return [[a.to_dict(), b.to_dict()] for a, b in lst]

        return {
            "dataset": self.dataset,
            "augment": self.spec.to_dict(),
            "k": self.k,
            "epochs": self.epochs,
            "counts": dict(self.counts),
            "witnesses": {"type1": pairs(self.type1), "type2": pairs(self.type2),
                          "type3": pairs(self.type3)},
            "max_witnesses": self.max_witnesses,
            "note": self.NOTE,
        }

    def table(self) -> str:
        s = self.spec
        lines = [
            f"dataset {self.dataset}  method {s.method.value}  ratio {s.ratio}  seed {s.seed}  "
            f"k {self.k}  epochs {self.epochs}",
            "type   description                          pairs",
            f"1      synthetic vs original               {self.counts['type1']:>8}",
            f"2      synthetic vs synthetic              {self.counts['type2']:>8}",
            f"3      WL-indistinguishable originals      {self.counts['type3']:>8}",
        ]
        return "\n".join(lines)


def _cross_label_pairs(members_a, members_b=None):
    """Count / enumerate pairs with differing labels.

    ``members_*`` are lists of ``(ref, label)``.  With one list, unordered pairs
    within it; with two, pairs across them.
    """
    if members_b is None:
        by_label = defaultdict(int)
        for _, lab in members_a:
            by_label[lab] += 1
        total = len(members_a)
        same = sum(c * (c - 1) // 2 for c in by_label.values())
        count = total * (total - 1) // 2 - same
        gen = ((a[0], b[0]) for a, b in combinations(members_a, 2) if a[1] != b[1])
    else:
        la, lb = defaultdict(int), defaultdict(int)
        for _, lab in members_a:
            la[lab] += 1
        for _, lab in members_b:
            lb[lab] += 1
        count = len(members_a) * len(members_b) - sum(c * lb.get(l, 0) for l, c in la.items())
        gen = ((a[0], b[0]) for a in members_a for b in members_b if a[1] != b[1])
    return count, gen


def _take(gen, limit):
    out = []
    for item in gen:
        if limit is not None and len(out) >= limit:
            break
        out.append(item)
    return out


def audit_dataset(ds: Dataset, spec: AugmentSpec, k: int | None = None, epochs: int = 1,
                  max_witnesses: int | None = 100) -> CollisionReport:
    """Detect the three collision types for ``epochs`` augmented copies of ``ds``.

    Type 3 uses unit-weight signatures of the originals.  Types 1 and 2 compare
    weight-aware signatures, computed for every graph of the pool and for the
    originals; on unit-weight graphs the weighted test is equivalent to the
    plain one.  Pairs are found by grouping on signature, so counts are exact;
    only the stored witness lists are truncated to ``max_witnesses``.
    """
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    k = default_rounds(ds) if k is None else k
    if k < 1:
        raise ValueError("k must be >= 1")
    report = CollisionReport(ds.name, spec, k, epochs, max_witnesses=max_witnesses)

    plain = defaultdict(list)
    orig_w = defaultdict(list)
    for i, g in enumerate(ds):
        plain[wl_refine(g, k, weighted=False).hash].append((GraphRef(i), g.label))
        orig_w[wl_refine(g, k, weighted=True).hash].append((GraphRef(i), g.label))
    for members in plain.values():
        count, gen = _cross_label_pairs(members)
        report.counts["type3"] += count
        report.type3.extend(_take(gen, _remaining(report.type3, max_witnesses)))

    if spec.method is Method.NONE or spec.ratio == 0.0:
        return report

    pool = defaultdict(list)
    for epoch in range(epochs):
        aug = augment_epoch(ds, spec, epoch)
        for i, g in enumerate(aug):
            pool[wl_refine(g, k, weighted=True).hash].append((GraphRef(i, epoch), g.label))
    for key in sorted(pool):
        members = pool[key]
        count, gen = _cross_label_pairs(members)
        report.counts["type2"] += count
        report.type2.extend(_take(gen, _remaining(report.type2, max_witnesses)))
        if key in orig_w:
            count, gen = _cross_label_pairs(members, orig_w[key])
            report.counts["type1"] += count
            report.type1.extend(_take(gen, _remaining(report.type1, max_witnesses)))
    return report


def _remaining(lst, limit):
    return None if limit is None else max(0, limit - len(lst))


def recheck_pair(ds: Dataset, spec: AugmentSpec, k: int, a: GraphRef, b: GraphRef,
                 weighted: bool) -> bool:
    """True when the two referenced graphs share a signature and differ in label."""

    def resolve(ref):
        if ref.epoch is None:
            return ds[ref.index]
        return augment_epoch(ds, spec, ref.epoch, indices=[ref.index])[0]

    ga, gb = resolve(a), resolve(b)
    return ga.label != gb.label and wl_refine(ga, k, weighted) == wl_refine(gb, k, weighted)


# ---------------------------------------------------------------------------
# empirical checks of collision freeness

@dataclass(frozen=True)
class Lemma2Result:
    trials: int
    collisions: int
    identity: bool

    @property
    def ok(self) -> bool:
        return self.identity or self.collisions == 0


def verify_lemma2(g: Graph, ratio: float, trials: int, seed: int = 0) -> Lemma2Result:
    """Draw ``trials`` SoftEdge weight vectors and count identical pairs.

    With ``ratio == 0`` the transform is the identity, every pair coincides and
    the result is flagged accordingly.
    """
    if trials < 2:
        raise ValueError("trials must be >= 2")
    if ratio == 0.0:
        return Lemma2Result(trials, trials * (trials - 1) // 2, True)
    seen = defaultdict(int)
    for t in range(trials):
        w = soft_edge(g, ratio, rng_for(seed, t)).weights
        seen[w.tobytes()] += 1
    collisions = sum(c * (c - 1) // 2 for c in seen.values())
    return Lemma2Result(trials, collisions, False)
