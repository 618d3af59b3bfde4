import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from softedge.fixtures import decalin_pair
from softedge.graph import Dataset, Graph
from softedge.tudataset import (TuDatasetFiles, TuFormatError, compute_stats, load_dataset, load_tudataset,
                                stats_close, write_fixture)

from conftest import graphs, triangle


def _write(tmp_path, name, **files):
    for suffix, text in files.items():
        (tmp_path / f"{name}_{suffix}.txt").write_text(text)
    return TuDatasetFiles.locate(tmp_path, name)


def _tiny(tmp_path, **overrides):
    files = dict(A="1, 2\n2, 1\n2, 3\n3, 2\n4, 5\n5, 4\n", graph_indicator="1\n1\n1\n2\n2\n",
                 graph_labels="-1\n1\n", node_labels="3\n4\n3\n5\n3\n")
    files.update(overrides)
    return _write(tmp_path, "TINY", **files)


def test_load_tiny(tmp_path):
    ds = load_tudataset(_tiny(tmp_path))
    assert len(ds) == 2 and ds.num_classes == 2
    assert [g.label for g in ds] == [0, 1]  # -1 -> 0, 1 -> 1
    assert ds.feature_dim == 3              # labels 3..5
    np.testing.assert_array_equal(ds[0].features, [[1, 0, 0], [0, 1, 0], [1, 0, 0]])
    assert ds[0].num_edges == 2 and ds[1].num_edges == 1
    assert np.all(ds[0].weights == 1.0)


def test_symmetrizes_one_directional_rows(tmp_path):
    ds = load_tudataset(_tiny(tmp_path, A="1,2\n2,3\n4,5\n1, 2\n"))
    assert ds[0].num_arcs == 4 and ds[1].num_arcs == 2


def test_whitespace_and_trailing_blank_lines(tmp_path):
    ds = load_tudataset(_tiny(tmp_path, A=" 1 ,2\n2,  3\n4,5\n\n\n"))
    assert ds[0].num_edges == 2


def test_edgeless_graph_kept(tmp_path):
    ds = load_tudataset(_tiny(tmp_path, A="1, 2\n"))
    assert ds[1].num_edges == 0 and ds[1].num_nodes == 2


@pytest.mark.parametrize("override,line", [
    (dict(A="1, 2\n2, x\n"), 2),
    (dict(A="1, 2\n2\n"), 2),
    (dict(A="1, 2\n3, 4\n"), 2),      # cross-graph edge
    (dict(A="1, 2\n1, 9\n"), 2),      # id not in indicator
])
def test_bad_adjacency_reports_line(tmp_path, override, line):
    with pytest.raises(TuFormatError) as err:
        load_tudataset(_tiny(tmp_path, **override))
    assert err.value.line == line
    assert f":{line}:" in str(err.value)


def test_node_id_gap(tmp_path):
    with pytest.raises(TuFormatError):
        load_tudataset(_tiny(tmp_path, graph_indicator="1\n1\n1\n3\n3\n"))
    with pytest.raises(TuFormatError):
        load_tudataset(_tiny(tmp_path, graph_indicator="1\n2\n1\n2\n2\n"))


def test_label_count_mismatch(tmp_path):
    with pytest.raises(TuFormatError):
        load_tudataset(_tiny(tmp_path, graph_labels="1\n"))
    with pytest.raises(TuFormatError):
        load_tudataset(_tiny(tmp_path, node_labels="1\n2\n"))


def test_missing_file(tmp_path):
    files = _tiny(tmp_path)
    files.graph_labels.unlink()
    with pytest.raises(FileNotFoundError):
        load_tudataset(files)


def test_attributes_only_and_combined(tmp_path):
    files = _tiny(tmp_path, node_attributes="0.5, 1\n1.5, 2\n2.5, 3\n3.5, 4\n4.5, 5\n")
    assert load_tudataset(files).feature_dim == 3
    assert load_tudataset(files, use_node_attributes=True).feature_dim == 5
    files.node_labels.unlink()
    ds = load_tudataset(TuDatasetFiles.locate(tmp_path, "TINY"))
    assert ds.feature_dim == 2 and ds.attribute_dim == 2
    np.testing.assert_array_equal(ds[1].features, [[3.5, 4], [4.5, 5]])


def test_ignored_files_warn(tmp_path, caplog):
    _tiny(tmp_path, edge_labels="1\n1\n1\n1\n1\n1\n")
    TuDatasetFiles.locate(tmp_path, "TINY")
    assert "ignoring TINY_edge_labels.txt" in caplog.text


def test_self_loop_dropped_with_warning(tmp_path, caplog):
    ds = load_tudataset(_tiny(tmp_path, A="1, 2\n2, 2\n4, 5\n"))
    assert ds[0].num_edges == 1
    assert "self-loop" in caplog.text


def test_stats_triangle():
    st_ = compute_stats(Dataset((triangle(),), 1, "TRI"))
    assert (st_.num_graphs, st_.avg_nodes, st_.avg_edges) == (1, 3.0, 6.0)
    assert st_.csv_row() == "TRI,1,3.0000,6.0000,1,1"
    with pytest.raises(ValueError):
        compute_stats(Dataset((), 1))


def test_mutag_table_row(mutag_dir):
    ds = load_dataset(mutag_dir, "MUTAG")
    s = compute_stats(ds)
    assert s.num_graphs == 188 and s.feature_dim == 7 and s.num_classes == 2
    assert stats_close(s, 17.9, 39.6)
    assert s.table_row().split("\t") == ["MUTAG", "188", "17.9", "39.6", "7", "2"]
    for g in ds:  # parsed graphs satisfy the graph invariants (Graph validates on construction)
        assert np.all(g.weights == 1.0)


def test_round_trip_decalin_pair(tmp_path):
    ds = decalin_pair()
    files = write_fixture(ds, tmp_path)
    back = load_tudataset(files)
    assert back == ds
    assert [g.num_nodes for g in back] == [10, 10] and [g.num_edges for g in back] == [11, 11]
    assert files.node_labels is None and files.edge_weights is None


def test_round_trip_single_featureless_graph(tmp_path):
    ds = Dataset((Graph.from_edges(np.ones((1, 1)), []),), 1, "ONE")
    assert load_tudataset(write_fixture(ds, tmp_path)) == ds


def test_attributes_only_fixture_has_no_label_file(tmp_path):
    g = Graph.from_edges(np.array([[0.1, 1 / 3], [2.5, -1e-7]]), [(0, 1)])
    ds = Dataset((g,), 1, "ATTR", attribute_dim=2)
    files = write_fixture(ds, tmp_path)
    assert files.node_labels is None and files.node_attributes is not None
    assert not (tmp_path / "ATTR_node_labels.txt").exists()
    assert load_tudataset(files) == ds


def test_weights_sidecar_round_trip(tmp_path):
    g = Graph.from_edges(np.ones((3, 1)), [(0, 1), (1, 2)], weights=[0.125, 1 / 3])
    ds = Dataset((g,), 1, "W")
    files = write_fixture(ds, tmp_path)
    assert files.edge_weights is not None
    lines = files.edge_weights.read_text().splitlines()
    assert len(lines) == len(files.adjacency.read_text().splitlines()) == 4
    assert load_tudataset(files) == ds


@settings(max_examples=25)
@given(st.lists(graphs(min_nodes=1, max_nodes=6, feature_dim=3, weighted=True), min_size=1, max_size=4))
def test_round_trip_property(tmp_path_factory, glist):
    # every label column must occur for the one-hot width to survive the trip
    x = np.eye(3)
    glist = list(glist) + [Graph.from_edges(x, [(0, 1)], label=1)]
    glist[0] = Graph(glist[0].features, glist[0].src, glist[0].dst, glist[0].weights, 0)
    ds = Dataset(tuple(glist), 2, "PROP", node_label_dim=3)
    out = tmp_path_factory.mktemp("rt")
    assert load_tudataset(write_fixture(ds, out)) == ds
