"""Self-check suites shared by ``softedge verify`` and the acceptance tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .augment import AugmentSpec, Method, augment_graph, rng_for, soft_edge
from .fixtures import decalin_pair, random_graph
from .gnn import Arch, GraphBatch, ModelConfig, ModelParams, forward_batch
from .graph import Graph
from .wl import verify_lemma2, wl_refine


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def lemma2_suite(g: Graph, ratio: float = 0.2, trials: int = 10_000, seed: int = 0) -> SuiteResult:
    res = verify_lemma2(g, ratio, trials, seed)
    detail = f"{res.collisions} collisions over {trials} SoftEdge draws (ratio {ratio})"
    if res.identity:
        detail += "; ratio 0 is the identity transform"
    return SuiteResult("lemma2", res.collisions == 0, detail)


def _embedding(g: Graph, params: ModelParams) -> np.ndarray:
    return forward_batch([g], params)[1].value[0]


def lemma3_suite(trials: int = 1000, ratio: float = 0.2, seed: int = 0, arch: Arch = Arch.GIN,
                 layers: int = 3, hidden: int = 16, k: int = 10) -> SuiteResult:
    """Decalin vs Bicyclopentyl: equal without weights, separated by SoftEdge."""
    pair = decalin_pair()
    a, b = pair[0], pair[1]
    cfg = ModelConfig(arch, layers, hidden)
    plain_equal = wl_refine(a, k) == wl_refine(b, k)
    p0 = ModelParams.init(cfg, 1, 2, seed=seed)
    plain_gap = float(np.abs(_embedding(a, p0) - _embedding(b, p0)).max())
    separated = 0
    for t in range(trials):
        sa = soft_edge(a, ratio, rng_for(seed, t, 0))
        sb = soft_edge(b, ratio, rng_for(seed, t, 1))
        params = ModelParams.init(cfg, 1, 2, seed=seed + 1 + t)
        wl_diff = wl_refine(sa, k, weighted=True) != wl_refine(sb, k, weighted=True)
        gap = float(np.linalg.norm(_embedding(sa, params) - _embedding(sb, params)))
        separated += wl_diff and gap > 1e-6
    ok = plain_equal and plain_gap <= 1e-9 and separated >= int(np.ceil(0.999 * trials))
    detail = (f"unit weights: WL equal={plain_equal}, max embedding gap {plain_gap:.2e}; "
              f"SoftEdge separated {separated}/{trials}")
    return SuiteResult("lemma3", ok, detail)


def _random_case(rng: np.random.Generator, n_max: int = 7):
    n = int(rng.integers(2, n_max + 1))
    g = random_graph(rng, n, p=0.5, feature_dim=3)
    m = g.num_edges
    drop = rng.random(m) < 0.5
    return g, drop


def dropedge_equivalence(g: Graph, drop: np.ndarray, params: ModelParams) -> float:
    """Max gap between zero-weighting the edges in ``drop`` and deleting them."""
    u, v, w = g.undirected_edges()
    w0 = np.where(drop, 0.0, w)
    zero = GraphBatch.from_arcs(g.features, np.r_[u, v], np.r_[v, u], np.r_[w0, w0])
    keep = ~drop
    deleted = GraphBatch.from_arcs(g.features, np.r_[u[keep], v[keep]], np.r_[v[keep], u[keep]],
                                   np.r_[w[keep], w[keep]])
    la, ea = forward_batch(zero, params)
    lb, eb = forward_batch(deleted, params)
    return max(float(np.abs(la.value - lb.value).max()), float(np.abs(ea.value - eb.value).max()))


def dropedge_suite(trials: int = 1000, seed: int = 0, tol: float = 1e-12) -> SuiteResult:
    rng = rng_for(seed, 0xD70E)
    worst = 0.0
    for t in range(trials):
        g, drop = _random_case(rng)
        for arch in (Arch.GIN, Arch.RESGCN):
            params = ModelParams.init(ModelConfig(arch, 3, 8), g.feature_dim, 2, seed=seed + t)
            worst = max(worst, dropedge_equivalence(g, drop, params))
    return SuiteResult("dropedge", worst <= tol,
                       f"max |zero-weight - deleted| = {worst:.2e} over {trials} cases x 2 archs")


def gradient_check(g: Graph, params: ModelParams, label: int = 0, h: float = 1e-5) -> float:
    """Worst per-tensor relative error between tape and central-difference gradients."""
    batch = GraphBatch.from_graphs([g])

    def loss_value():
        return float(ad.softmax_cross_entropy(forward_batch(batch, params)[0], [label]).value)

    params.zero_grad()
    ad.softmax_cross_entropy(forward_batch(batch, params)[0], [label]).backward()
    worst = 0.0
    for t in params.trainable():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.value)
        worst = max(worst, ad.relative_error(analytic, ad.numeric_grad(loss_value, t, h)))
    return worst


def gradcheck_suite(seeds: int = 100, hidden: int = 4, tol: float = 1e-4) -> SuiteResult:
    worst = {}
    for arch in (Arch.GIN, Arch.RESGCN):
        cfg = ModelConfig(arch, 3, hidden)
        errs = []
        for s in range(seeds):
            rng = rng_for(s, 0x6C)
            g = random_graph(rng, 5, p=0.5, feature_dim=3, categorical=False)
            g = augment_graph(g, AugmentSpec(Method.SOFTEDGE, 0.5, s), 0, 0)
            params = ModelParams.init(cfg, 3, 3, seed=s)
            # zero biases put dead rows exactly on the ReLU kink; move off it
            for t in params.trainable():
                if t.name.endswith(("bias", "eps")):
                    t.value[...] = rng.normal(scale=0.1, size=t.shape)
            errs.append(gradient_check(g, params, label=int(rng.integers(0, 3))))
        worst[arch.value] = max(errs)
    ok = all(e < tol for e in worst.values())
    return SuiteResult("gradcheck", ok, ", ".join(f"{k} worst rel. err {v:.2e}" for k, v in worst.items())
                       + f" over {seeds} seeds")
