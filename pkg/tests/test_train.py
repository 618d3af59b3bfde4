import json
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softedge.augment import AugmentSpec, Method, rng_for
from softedge.autodiff import Tensor
from softedge.fixtures import decalin_pair, size_separable
from softedge.gnn import Arch, ModelConfig
from softedge.graph import Dataset
from softedge.train import (DEFAULT_GRID, AdamWState, RunConfig, adamw_step, cross_validate, dumps,
                            embeddings_csv, export_embeddings, fit, fit_full, grid_configs, lr_schedule,
                            run_grid, stratified_folds)
from softedge.tudataset import load_dataset

from conftest import triangle

SMALL = ModelConfig(Arch.GIN, 3, 16)


def _step(theta, grad, lr, wd=0.0):
    t = Tensor(np.array([[theta]], dtype=float))
    state = AdamWState.zeros_like([t])
    adamw_step([t], [np.array([[grad]], dtype=float)], state, lr, weight_decay=wd)
    return float(t.value[0, 0])


def test_adamw_examples():
    assert _step(0.7, 0.0, 0.1) == 0.7
    assert abs(_step(0.0, 1.0, 0.1) - (-0.1)) < 1e-8
    assert _step(1.0, 0.0, 0.1, wd=0.01) == pytest.approx(0.999, abs=1e-15)


def test_adamw_matches_reference_trajectory():
    rng = np.random.default_rng(0)
    theta = rng.normal(size=(3, 2))
    grads = [rng.normal(size=(3, 2)) for _ in range(6)]
    lr, b1, b2, eps, wd = 0.05, 0.9, 0.999, 1e-8, 0.01
    ref, m, v = theta.copy(), np.zeros_like(theta), np.zeros_like(theta)
    for t, g in enumerate(grads, start=1):
        ref = ref - lr * wd * ref
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g ** 2
        ref = ref - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    p = Tensor(theta.copy())
    state = AdamWState.zeros_like([p])
    for g in grads:
        adamw_step([p], [g], state, lr, (b1, b2), eps, wd)
    np.testing.assert_allclose(p.value, ref, rtol=0, atol=1e-15)
    assert state.step == 6


def test_lr_schedule_examples():
    assert lr_schedule(0, 0.01) == 0.01
    assert lr_schedule(50, 0.01) == 0.005
    assert lr_schedule(349, 0.0005) == 0.0005 / 64
    with pytest.raises(ValueError):
        lr_schedule(-1, 0.01)


@given(st.integers(0, 1000), st.floats(1e-5, 1.0))
def test_lr_schedule_monotone_and_halving(epoch, lr0):
    assert lr_schedule(epoch + 1, lr0) <= lr_schedule(epoch, lr0)
    if (epoch + 1) % 50 == 0:
        assert lr_schedule(epoch + 1, lr0) == lr_schedule(epoch, lr0) / 2


def test_stratified_two_folds_balanced():
    folds, strat = stratified_folds([0, 0, 1, 1], 2, rng_for(0))
    assert strat
    for f in folds:
        assert sorted(np.array([0, 0, 1, 1])[f].tolist()) == [0, 1]


@given(st.lists(st.integers(0, 3), min_size=12, max_size=60), st.integers(2, 6), st.integers(0, 100))
def test_folds_partition_indices(labels, k, seed):
    folds, _ = stratified_folds(labels, k, rng_for(seed))
    joined = np.sort(np.concatenate(folds))
    np.testing.assert_array_equal(joined, np.arange(len(labels)))
    sizes = [len(f) for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_stratified_preserves_proportions():
    labels = np.repeat([0, 1, 2], [30, 20, 50])
    folds, strat = stratified_folds(labels, 10, rng_for(1))
    assert strat
    for f in folds:
        counts = np.bincount(labels[f], minlength=3)
        assert np.all(np.abs(counts - [3, 2, 5]) <= 1)


def test_unstratified_fallback_warns(caplog):
    with caplog.at_level(logging.WARNING):
        folds, strat = stratified_folds([0] * 9 + [1], 5, rng_for(0))
    assert not strat and "unstratified" in caplog.text
    with pytest.raises(ValueError):
        stratified_folds([0, 1], 3, rng_for(0))


def test_run_config_round_trip_and_validation():
    cfg = RunConfig(ModelConfig(Arch.RESGCN, 8, 32), AugmentSpec(Method.DROPNODE, 0.2, 5), lr0=0.01,
                    batch_size=128, epochs=10, folds=5, repeats=2, seed=3)
    assert RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ValueError):
        RunConfig.from_dict({"epoch": 3})
    with pytest.raises(ValueError):
        RunConfig(epochs=0)
    with pytest.raises(ValueError):
        RunConfig(folds=1)


def test_toy_memorization():
    ds = size_separable()
    cfg = RunConfig(SMALL, lr0=0.01, epochs=200)
    _, losses, _ = fit(ds, np.arange(len(ds)), cfg, (0, 0))
    assert losses[-1] < 0.05


def test_cross_validate_structure_and_determinism():
    ds = size_separable(6)
    cfg = RunConfig(SMALL, AugmentSpec(Method.SOFTEDGE, 0.2), lr0=0.01, epochs=5, folds=3, repeats=2, seed=7)
    a, b = cross_validate(ds, cfg), cross_validate(ds, cfg)
    assert dumps(a.to_dict()) == dumps(b.to_dict())
    assert len(a.folds) == 6
    for r in range(2):
        tests = [set(f.test_indices) for f in a.folds if f.repeat == r]
        assert set().union(*tests) == set(range(len(ds)))
        assert sum(len(t) for t in tests) == len(ds)
    assert a.repeat_means() == [np.mean([f.final_acc for f in a.folds if f.repeat == r]) for r in range(2)]
    assert a.mean_acc == pytest.approx(np.mean(a.repeat_means()))
    assert a.std_acc == pytest.approx(np.std(a.repeat_means()))
    d = a.to_dict()
    assert "wall_clock_s" not in json.dumps(d)
    assert all(len(f["train_loss"]) == 5 for f in d["folds"])
    # repeats re-split
    splits = [tuple(f.test_indices) for f in a.folds]
    assert splits[:3] != splits[3:]


def test_parallel_folds_match_serial():
    ds = size_separable(6)
    cfg = RunConfig(SMALL, epochs=3, folds=2, repeats=1, seed=1)
    assert dumps(cross_validate(ds, cfg).to_dict()) == dumps(cross_validate(ds, cfg, jobs=2).to_dict())


def test_evaluation_uses_original_graphs(monkeypatch):
    import softedge.train as train_mod

    seen = []
    real = train_mod.predict

    def spy(graphs, params, *a, **kw):
        seen.extend(graphs)
        return real(graphs, params, *a, **kw)

    monkeypatch.setattr(train_mod, "predict", spy)
    ds = size_separable(6)
    cfg = RunConfig(SMALL, AugmentSpec(Method.DROPNODE, 0.9), epochs=3, folds=2, repeats=1)
    res = cross_validate(ds, cfg)
    originals = {id(g) for g in ds}
    assert seen and all(id(g) in originals for g in seen)
    for f in res.folds:
        train = set(range(len(ds))) - set(f.test_indices)
        assert train.isdisjoint(f.test_indices)


def test_mutag_loss_decreases_first_ten_epochs(mutag_dir):
    ds = load_dataset(mutag_dir, "MUTAG")
    for arch in (Arch.GIN, Arch.RESGCN):
        cfg = RunConfig(ModelConfig(arch, 3, 32), epochs=10)
        _, losses, _ = fit(ds, np.arange(len(ds)), cfg, (0, 0))
        assert losses[-1] < losses[0]


def test_grid_expansion():
    base = RunConfig(augment=AugmentSpec(Method.DROPEDGE, 0.2))
    assert len(grid_configs(base)) == 2 * 2 * 2 * 7 * 2
    soft = RunConfig(augment=AugmentSpec(Method.SOFTEDGE, 0.3))
    configs = grid_configs(soft)
    assert len(configs) == 56 and {c.augment.ratio for c in configs} == {0.3}
    assert {c.model.num_layers for c in configs} == set(DEFAULT_GRID["num_layers"])


def test_run_grid_reports_max():
    ds = size_separable(6)
    base = RunConfig(SMALL, epochs=4, folds=2, repeats=1)
    res = run_grid(ds, base, {"lr0": (0.01, 0.0005)})
    assert len(res.runs) == 2
    assert res.best.mean_acc == max(r.mean_acc for r in res.runs)
    assert len(res.to_dict(per_config=True)["configs"]) == 2


def test_export_embeddings_rows_and_invariance():
    ds = Dataset((triangle(), triangle().permute([2, 1, 0]), triangle()), 1, "T")
    params, _ = fit_full(ds, RunConfig(SMALL, epochs=2, folds=2))
    rows = export_embeddings(ds, params)
    assert len(rows) == 3 and [r[0] for r in rows] == [0, 1, 2]
    np.testing.assert_allclose(rows[0][2:], rows[1][2:], rtol=0, atol=1e-9)
    text = embeddings_csv(rows, 16)
    assert text.splitlines()[0].startswith("graph_index,label,e0,") and len(text.splitlines()) == 4


def test_decalin_rows_identical_even_after_softedge_training():
    ds = decalin_pair()
    for spec in (AugmentSpec(), AugmentSpec(Method.SOFTEDGE, 0.2, 1)):
        params, _ = fit_full(ds, RunConfig(SMALL, spec, lr0=0.01, epochs=20, folds=2))
        rows = export_embeddings(ds, params)
        np.testing.assert_allclose(rows[0][2:], rows[1][2:], rtol=0, atol=1e-9)
