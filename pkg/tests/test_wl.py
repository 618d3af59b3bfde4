from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from softedge.augment import AugmentSpec, Method, rng_for, soft_edge
from softedge.fixtures import (COLLISION_PAIRS, bicyclopentyl, collision_cores, collision_pairs, decalin,
                               decalin_pair, random_graph)
from softedge.graph import Dataset, Graph
from softedge.tudataset import load_dataset
from softedge.wl import (GraphRef, audit_dataset, default_rounds, recheck_pair, verify_lemma2,
                         wl_equivalent_bruteforce, wl_refine)

from conftest import graph_and_perm, graphs, triangle


def test_isomorphic_triangles_equal():
    a = triangle()
    b = a.permute([2, 0, 1])
    for k in (1, 3, 10):
        assert wl_refine(a, k) == wl_refine(b, k)


def test_decalin_pair_unweighted_equal():
    a, b = decalin(), bicyclopentyl()
    assert a.num_edges == b.num_edges == 11
    assert wl_refine(a, 10) == wl_refine(b, 10)
    assert wl_equivalent_bruteforce(a, b)


def test_decalin_pair_softedge_separates():
    a, b = decalin(), bicyclopentyl()
    diff = 0
    for t in range(200):
        sa = soft_edge(a, 0.2, rng_for(9, t, 0))
        sb = soft_edge(b, 0.2, rng_for(9, t, 1))
        diff += wl_refine(sa, 10, weighted=True) != wl_refine(sb, 10, weighted=True)
    assert diff == 200


def test_weighted_equals_plain_structure_on_unit_weights():
    # same partition either way; the digests differ only by the weighted flag
    a, b = decalin(), bicyclopentyl()
    assert wl_refine(a, 10, weighted=True) == wl_refine(b, 10, weighted=True)
    assert wl_refine(a, 10, weighted=True) != wl_refine(a, 10)


def test_distinguishes_simple_pairs():
    x = np.ones((4, 1))
    path = Graph.from_edges(x, [(0, 1), (1, 2), (2, 3)])
    star = Graph.from_edges(x, [(0, 1), (0, 2), (0, 3)])
    assert wl_refine(path, 4) != wl_refine(star, 4)
    assert not wl_equivalent_bruteforce(path, star)
    # node count enters the signature
    assert wl_refine(Graph.from_edges(np.ones((1, 1)), []), 3) != wl_refine(
        Graph.from_edges(np.ones((2, 1)), []), 3)


def test_hexagon_vs_two_triangles_is_classic_wl_failure():
    x = np.ones((6, 1))
    hexagon = Graph.from_edges(x, [(i, (i + 1) % 6) for i in range(6)])
    triangles = Graph.from_edges(x, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    assert wl_refine(hexagon, 6) == wl_refine(triangles, 6)
    assert wl_equivalent_bruteforce(hexagon, triangles)


def test_k_must_be_positive():
    with pytest.raises(ValueError):
        wl_refine(triangle(), 0)


@given(graph_and_perm(weighted=True), st.booleans())
def test_permutation_invariance(case, weighted):
    g, perm = case
    k = g.num_nodes
    assert wl_refine(g, k, weighted) == wl_refine(g.permute(perm), k, weighted)


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(graphs(n, n, feature_dim=2), graphs(n, n, feature_dim=2))))
def test_soundness_against_bruteforce(pair):
    g, h = pair
    k = g.num_nodes
    assert (wl_refine(g, k) == wl_refine(h, k)) == wl_equivalent_bruteforce(g, h)


@given(graphs(max_nodes=7), graphs(max_nodes=7), st.integers(1, 6))
def test_monotone_in_rounds(g, h, k):
    if wl_refine(g, k) != wl_refine(h, k):
        assert wl_refine(g, k + 1) != wl_refine(h, k + 1)


def test_audit_none_on_mutag_is_clean(mutag_dir):
    rep = audit_dataset(load_dataset(mutag_dir, "MUTAG"), AugmentSpec())
    assert rep.counts == {"type1": 0, "type2": 0, "type3": 0}


def test_audit_decalin_type3():
    rep = audit_dataset(decalin_pair(), AugmentSpec(), k=10)
    assert rep.counts["type3"] == 1
    (a, b), = rep.type3
    assert (a.index, b.index) == (0, 1)
    assert recheck_pair(decalin_pair(), rep.spec, 10, a, b, weighted=False)


def test_audit_detects_type1_with_dropedge():
    # a triangle (label 0) and a 3-path (label 1): deleting one triangle edge gives the path
    x = np.ones((3, 1))
    ds = Dataset((triangle(), Graph.from_edges(x, [(0, 1), (1, 2)], label=1)), 2)
    rep = audit_dataset(ds, AugmentSpec(Method.DROPEDGE, 0.3, 0), k=3, epochs=2)
    assert rep.counts["type1"] >= 2  # each epoch's dropped triangle matches the path
    for a, b in rep.type1:
        assert recheck_pair(ds, rep.spec, 3, a, b, weighted=True)


def test_collision_fixture_cores_identical():
    for ga, gb in collision_cores():
        assert ga.label != gb.label
        assert np.array_equal(ga.src, gb.src) and np.array_equal(ga.dst, gb.dst)


def test_collision_fixture_bruteforce_outcome_exists():
    """Enumerate every 40% DropEdge outcome of the first pair: some pair of outcomes collides."""
    ds = collision_pairs()
    a, b = ds[0], ds[1]
    k = 10

    def outcomes(g):
        u, v, _ = g.undirected_edges()
        sigs = set()
        for drop in combinations(range(g.num_edges), 4):
            keep = [e for e in range(g.num_edges) if e not in drop]
            h = Graph.from_edges(g.features, [(u[e], v[e]) for e in keep])
            sigs.add(wl_refine(h, k, weighted=True).hash)
        return sigs

    assert outcomes(a) & outcomes(b)
    rep = audit_dataset(ds, AugmentSpec(Method.DROPEDGE, 0.4, 0), k=k, epochs=50)
    assert rep.counts["type2"] > 0
    for x, y in rep.type2[:10]:
        assert recheck_pair(ds, rep.spec, k, x, y, weighted=True)


def test_collision_fixture_layout():
    assert len(COLLISION_PAIRS) == 3
    ds = collision_pairs()
    assert [g.label for g in ds] == [0, 1, 0, 1, 0, 1]
    assert all(g.num_nodes == 10 and g.num_edges == 10 for g in ds)


def test_softedge_audit_is_collision_free():
    for ds in (decalin_pair(), collision_pairs()):
        rep = audit_dataset(ds, AugmentSpec(Method.SOFTEDGE, 0.2, 4), k=10, epochs=20)
        assert rep.counts["type1"] == 0 and rep.counts["type2"] == 0


def test_witness_cap_keeps_exact_counts():
    ds = collision_pairs()
    full = audit_dataset(ds, AugmentSpec(Method.DROPEDGE, 0.6, 0), k=10, epochs=20, max_witnesses=None)
    capped = audit_dataset(ds, AugmentSpec(Method.DROPEDGE, 0.6, 0), k=10, epochs=20, max_witnesses=5)
    assert full.counts == capped.counts
    assert len(capped.type2) == min(5, full.counts["type2"]) and len(full.type2) == full.counts["type2"]


def test_report_json_shape():
    rep = audit_dataset(decalin_pair(), AugmentSpec(Method.SOFTEDGE, 0.2, 1), k=10, epochs=2)
    d = rep.to_dict()
    assert d["augment"] == {"method": "softedge", "ratio": 0.2, "seed": 1}
    assert d["k"] == 10 and d["epochs"] == 2
    assert d["witnesses"]["type3"] == [[{"graph": 0}, {"graph": 1}]]
    assert "type" in rep.table()


def test_default_rounds():
    assert default_rounds(collision_pairs()) == 10


def test_lemma2_examples():
    one_edge = Graph.from_edges(np.ones((2, 1)), [(0, 1)])
    assert verify_lemma2(one_edge, 0.999, 2).collisions == 0
    res = verify_lemma2(one_edge, 0.0, 5)
    assert res.identity and res.collisions == 10
    g = random_graph(rng_for(1), 8, p=0.5)
    assert verify_lemma2(g, 0.2, 2000).collisions == 0
    with pytest.raises(ValueError):
        verify_lemma2(g, 0.2, 1)


def test_equality_unit_weight_vs_soft_weight_differs():
    g = decalin()
    s = soft_edge(g, 0.2, rng_for(0))
    assert wl_refine(s, 10, weighted=True) != wl_refine(g, 10, weighted=True)
