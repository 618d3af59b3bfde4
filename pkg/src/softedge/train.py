"""Cross-validated training with per-epoch augmentation.

Protocol: stratified k-fold split, AdamW with a step decay that halves the
learning rate every ``lr_half_period`` epochs, fresh augmentation of the
training graphs every epoch, evaluation on the untouched held-out graphs.

Random streams are keyed by ``(seed, repeat, fold, purpose)`` so that each fold
is reproducible on its own and the result does not depend on how folds are
scheduled across workers.
"""

from __future__ import annotations

import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .augment import AugmentSpec, Method, augment_epoch, rng_for
from .gnn import GraphBatch, ModelConfig, ModelParams, embed, forward_batch, predict
from .graph import Dataset

log = logging.getLogger(__name__)

# stream purposes
_SPLIT, _INIT, _SHUFFLE, _DROPOUT, _AUGMENT = range(5)


@dataclass(frozen=True)
class AdamWConfig:
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.01


@dataclass
class AdamWState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def zeros_like(cls, params) -> "AdamWState":
        return cls(0, [np.zeros_like(p.value) for p in params], [np.zeros_like(p.value) for p in params])


def adamw_step(params, grads, state: AdamWState, lr: float, betas=(0.9, 0.999), eps: float = 1e-8,
               weight_decay: float = 0.01) -> AdamWState:
    """One in-place AdamW update of ``params`` (tensors) given ``grads`` (arrays).

    Weight decay is decoupled: ``theta -= lr * wd * theta`` happens before and
    independently of the bias-corrected Adam step.
    """
    b1, b2 = betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = np.zeros_like(p.value)
        if weight_decay:
            p.value *= 1.0 - lr * weight_decay
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.value -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


def lr_schedule(epoch: int, lr0: float, half_period: int = 50) -> float:
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return lr0 * 0.5 ** (epoch // half_period)


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    lr0: float = 0.0005
    batch_size: int = 32
    epochs: int = 350
    lr_half_period: int = 50
    folds: int = 10
    repeats: int = 3
    seed: int = 0
    optimizer: AdamWConfig = field(default_factory=AdamWConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats < 1 or self.batch_size < 1 or self.lr0 <= 0 or self.lr_half_period < 1:
            raise ValueError("repeats, batch_size, lr0 and lr_half_period must be positive")

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "augment": self.augment.to_dict(),
            "lr0": self.lr0,
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "lr_half_period": self.lr_half_period,
            "folds": self.folds,
            "repeats": self.repeats,
            "seed": self.seed,
            "optimizer": {"betas": list(self.optimizer.betas), "eps": self.optimizer.eps,
                          "weight_decay": self.optimizer.weight_decay},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        kw = {}
        if "model" in d:
            kw["model"] = ModelConfig.from_dict(d.pop("model"))
        if "augment" in d:
            kw["augment"] = AugmentSpec.from_dict(d.pop("augment"))
        if "optimizer" in d:
            o = d.pop("optimizer")
            kw["optimizer"] = AdamWConfig(tuple(o.get("betas", (0.9, 0.999))), o.get("eps", 1e-8),
                                          o.get("weight_decay", 0.01))
        unknown = set(d) - {"lr0", "batch_size", "epochs", "lr_half_period", "folds", "repeats", "seed"}
        if unknown:
            raise ValueError(f"unknown run-config fields: {sorted(unknown)}")
        return cls(**kw, **d)


@dataclass
class FoldResult:
    repeat: int
    fold: int
    test_indices: list[int]
    train_loss: list[float]
    test_acc: list[float]

    @property
    def final_acc(self) -> float:
        return self.test_acc[-1]

    @property
    def best_acc(self) -> float:
        return max(self.test_acc)


@dataclass
class RunResult:
    config: RunConfig
    dataset: str
    folds: list[FoldResult]
    stratified: bool = True
    wall_clock_s: float = 0.0

    def repeat_means(self, metric: str = "final") -> list[float]:
        out = []
        for r in range(self.config.repeats):
            vals = [f.final_acc if metric == "final" else f.best_acc for f in self.folds if f.repeat == r]
            out.append(float(np.mean(vals)))
        return out

    @property
    def mean_acc(self) -> float:
        return float(np.mean(self.repeat_means()))

    @property
    def std_acc(self) -> float:
        return float(np.std(self.repeat_means()))

    def to_dict(self) -> dict:
        """Deterministic JSON payload; wall-clock time is deliberately excluded."""
        best = self.repeat_means("best")
        return {
            "dataset": self.dataset,
            "config": self.config.to_dict(),
            "stratified": self.stratified,
            "mean_acc": self.mean_acc,
            "std_acc": self.std_acc,
            "mean_best_epoch_acc": float(np.mean(best)),
            "std_best_epoch_acc": float(np.std(best)),
            "repeat_mean_acc": self.repeat_means(),
            "folds": [
                {"repeat": f.repeat, "fold": f.fold, "test_indices": f.test_indices,
                 "final_acc": f.final_acc, "best_acc": f.best_acc,
                 "train_loss": f.train_loss, "test_acc": f.test_acc}
                for f in self.folds
            ],
        }

    def summary_row(self) -> str:
        m = self.config.model
        a = self.config.augment
        return (f"{self.dataset},{m.arch.value},{m.num_layers},{a.method.value},{a.ratio},"
                f"{self.mean_acc:.6f},{self.std_acc:.6f}")


SUMMARY_HEADER = "dataset,arch,layers,method,lambda,mean_acc,std_acc"


def dumps(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def stratified_folds(labels, folds: int, rng: np.random.Generator) -> tuple[list[np.ndarray], bool]:
    """Split indices into ``folds`` test sets preserving class proportions.

    Each class is shuffled and dealt round-robin, continuing where the previous
    class stopped so that fold sizes stay balanced.  When some class has fewer
    members than ``folds`` the split falls back to an unstratified shuffle.
    """
    labels = np.asarray(labels)
    if len(labels) < folds:
        raise ValueError(f"dataset of size {len(labels)} cannot be split into {folds} folds")
    classes, counts = np.unique(labels, return_counts=True)
    buckets: list[list[int]] = [[] for _ in range(folds)]
    if counts.min() < folds:
        log.warning("a class has fewer than %d members; using an unstratified split", folds)
        for pos, i in enumerate(rng.permutation(len(labels))):
            buckets[pos % folds].append(int(i))
        stratified = False
    else:
        pos = 0
        for c in classes:
            for i in rng.permutation(np.nonzero(labels == c)[0]):
                buckets[pos % folds].append(int(i))
                pos += 1
        stratified = True
    return [np.array(sorted(b), dtype=np.int64) for b in buckets], stratified


def fit(ds: Dataset, train_idx, cfg: RunConfig, run_key: tuple[int, ...], test_idx=None,
        params: ModelParams | None = None):
    """Train one model; returns ``(params, train_loss_curve, test_acc_curve)``."""
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if params is None:
        params = ModelParams.init(cfg.model, ds.feature_dim, ds.num_classes,
                                  seed=_derive(cfg.seed, *run_key, _INIT))
    trainable = params.trainable()
    state = AdamWState.zeros_like(trainable)
    shuffle_rng = rng_for(cfg.seed, *run_key, _SHUFFLE)
    dropout_rng = rng_for(cfg.seed, *run_key, _DROPOUT)
    aug_spec = replace(cfg.augment, seed=_derive(cfg.augment.seed, cfg.seed, *run_key, _AUGMENT))
    test_graphs = [ds[i] for i in test_idx] if test_idx is not None else None
    test_labels = np.array([g.label for g in test_graphs]) if test_graphs else None
    opt = cfg.optimizer
    losses, accs = [], []
    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg.lr0, cfg.lr_half_period)
        if aug_spec.method is Method.NONE:
            pool = [ds[i] for i in train_idx]
        else:
            pool = list(augment_epoch(ds, aug_spec, epoch, indices=train_idx))
        order = shuffle_rng.permutation(len(pool))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            chunk = [pool[i] for i in order[start:start + cfg.batch_size]]
            params.zero_grad()
            logits, _ = forward_batch(GraphBatch.from_graphs(chunk), params, train_mode=True, rng=dropout_rng)
            loss = ad.softmax_cross_entropy(logits, [g.label for g in chunk])
            loss.backward()
            adamw_step(trainable, [p.grad for p in trainable], state, lr, opt.betas, opt.eps, opt.weight_decay)
            epoch_loss += float(loss.value) * len(chunk)
        losses.append(epoch_loss / len(pool))
        if test_graphs:
            accs.append(float(np.mean(predict(test_graphs, params) == test_labels)))
    return params, losses, accs


def _derive(*keys: int) -> int:
    seq = np.random.SeedSequence([int(k) & ((1 << 64) - 1) for k in keys])
    return int(seq.generate_state(1, np.uint64)[0])


def _fold_job(args):
    ds, cfg, repeat, fold, train_idx, test_idx = args
    _, losses, accs = fit(ds, train_idx, cfg, (repeat, fold), test_idx)
    return FoldResult(repeat, fold, [int(i) for i in test_idx], losses, accs)


def cross_validate(ds: Dataset, cfg: RunConfig, jobs: int = 1) -> RunResult:
    """Repeated k-fold cross-validation; repeats re-split and re-seed everything."""
    t0 = time.perf_counter()
    tasks = []
    stratified = True
    for r in range(cfg.repeats):
        test_sets, strat = stratified_folds(ds.labels, cfg.folds, rng_for(cfg.seed, r, _SPLIT))
        stratified = stratified and strat
        all_idx = np.arange(len(ds))
        for f, test_idx in enumerate(test_sets):
            train_idx = np.setdiff1d(all_idx, test_idx)
            tasks.append((ds, cfg, r, f, train_idx, test_idx))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            folds = list(pool.map(_fold_job, tasks))
    else:
        folds = [_fold_job(t) for t in tasks]
    return RunResult(cfg, ds.name, folds, stratified, time.perf_counter() - t0)


# run key of the model fitted on the whole dataset; fold keys are (repeat, fold)
_FULL_KEY = (0xF0, 0x11)


def fit_full(ds: Dataset, cfg: RunConfig) -> tuple[ModelParams, list[float]]:
    """Train on every graph, e.g. to checkpoint a model for embedding export."""
    params, losses, _ = fit(ds, np.arange(len(ds)), cfg, _FULL_KEY)
    return params, losses


# ---------------------------------------------------------------------------
# grid

DEFAULT_GRID = {
    "lr0": (0.01, 0.0005),
    "batch_size": (32, 128),
    "dropout_after_dense": (0.0, 0.5),
    "num_layers": (3, 5, 8, 16, 32, 64, 100),
    "drop_ratio": (0.2, 0.4),
}


def grid_configs(base: RunConfig, grid: dict | None = None) -> list[RunConfig]:
    """Expand the hyperparameter grid around ``base``.

    ``drop_ratio`` only applies to DropEdge and DropNode; SoftEdge keeps the
    ratio from ``base``.
    """
    grid = dict(DEFAULT_GRID if grid is None else grid)
    ratios = grid.pop("drop_ratio", (base.augment.ratio,))
    if base.augment.method not in (Method.DROPEDGE, Method.DROPNODE):
        ratios = (base.augment.ratio,)
    keys = ["lr0", "batch_size", "dropout_after_dense", "num_layers"]
    values = [tuple(grid.get(k, (_get(base, k),))) for k in keys]
    out = []
    for lr0, bs, dp, layers, ratio in itertools.product(*values, ratios):
        model = replace(base.model, dropout_after_dense=dp, num_layers=layers)
        out.append(replace(base, lr0=lr0, batch_size=bs, model=model,
                           augment=replace(base.augment, ratio=ratio)))
    return out


def _get(cfg: RunConfig, key: str):
    if key in ("dropout_after_dense", "num_layers"):
        return getattr(cfg.model, key)
    return getattr(cfg, key)


@dataclass
class GridResult:
    runs: list[RunResult]

    @property
    def best(self) -> RunResult:
        return max(self.runs, key=lambda r: r.mean_acc)

    def to_dict(self, per_config: bool = False) -> dict:
        d = {"best": self.best.to_dict(), "num_configs": len(self.runs)}
        if per_config:
            d["configs"] = [{"config": r.config.to_dict(), "mean_acc": r.mean_acc, "std_acc": r.std_acc}
                            for r in self.runs]
        return d


def run_grid(ds: Dataset, base: RunConfig, grid: dict | None = None, jobs: int = 1) -> GridResult:
    """Cross-validate every grid point; the best mean accuracy is reported, as in the protocol."""
    return GridResult([cross_validate(ds, c, jobs) for c in grid_configs(base, grid)])


# ---------------------------------------------------------------------------
# embeddings

def export_embeddings(ds: Dataset, params: ModelParams) -> list[list]:
    """One row ``[graph_index, label, e_0 .. e_{h-1}]`` per original graph."""
    emb = embed(list(ds.graphs), params)
    return [[i, g.label, *emb[i].tolist()] for i, g in enumerate(ds.graphs)]


def embeddings_csv(rows, hidden_dim: int) -> str:
    header = ",".join(["graph_index", "label"] + [f"e{j}" for j in range(hidden_dim)])
    lines = [header] + [",".join([str(r[0]), str(r[1])] + [repr(float(v)) for v in r[2:]]) for r in rows]
    return "\n".join(lines) + "\n"
