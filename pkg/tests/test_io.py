import io
import json

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphrewire.autodiff import ParameterSet
from graphrewire.errors import DataIOError, FormatError, GraphError, ShapeError
from graphrewire.graph import build_graph, gen_er
from graphrewire.io import (REPORT_SCHEMA, dumps, format_edge_list, load_checkpoint, load_edge_list, load_tu_dataset,
                            make_report, parse_edge_list, results_schema, save_checkpoint, save_edge_list, to_jsonable)

MALFORMED = [
    ("0 1\n", "header 'n <count>' at line 1"),
    ("n 3\n0 1\n1 1\n", "self-loop at line 3"),
    ("n 3\n0 1\n1 0\n", "duplicate edge at line 3"),
    ("n 3\n\n# c\n0 5\n", "out-of-range index at line 4"),
    ("n 3\n0 1 -2\n", "non-positive weight at line 2"),
    ("n 3\n0 1 nan\n", "non-finite weight at line 2"),
    ("n 3\n0 x\n", "line 2"),
    ("n 3\n0 1 2 3\n", "expected 'u v [weight]' at line 2"),
    ("n 2\n0 1\nfeatures 2\n1 2\n", "exactly 2 rows"),
    ("n 2\n0 1\nfeatures 2\n1 2\n3\n", "expected 2 feature values at line 5"),
    ("", "header"),
]


@pytest.mark.parametrize("text, msg", MALFORMED)
def test_malformed_edge_lists(text, msg):
    with pytest.raises((FormatError, GraphError), match=msg.replace("[", r"\[").replace("(", r"\(")):
        parse_edge_list(text)


def test_parse_weights_features_and_comments():
    g = parse_edge_list("# header\nn 3\n0 1 2.5  # heavy\n1 2\nfeatures 1\n1\n2\n3\n")
    assert g.adjacency[0, 1] == 2.5 and g.adjacency[1, 2] == 1
    assert g.features.shape == (3, 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.floats(0.2, 1.0), st.integers(0, 10 ** 6), st.booleans())
def test_round_trip(n, p, seed, weighted):
    g = gen_er(n, p, seed)
    if weighted:
        rng = np.random.default_rng(seed)
        g = build_graph(n, [(u, v, float(rng.uniform(0.1, 3))) for u, v, _ in g.edges()],
                        features=rng.standard_normal((n, 2)))
    g2 = parse_edge_list(format_edge_list(g))
    assert np.array_equal(g.adjacency, g2.adjacency)
    if weighted:
        assert np.array_equal(g.features, g2.features)
    assert format_edge_list(g2) == format_edge_list(g)


def test_file_io(tmp_path, named):
    path = tmp_path / "g.txt"
    save_edge_list(named["C4"], path)
    assert np.array_equal(load_edge_list(path).adjacency, named["C4"].adjacency)
    assert np.array_equal(load_edge_list(io.StringIO(path.read_text())).adjacency, named["C4"].adjacency)
    with pytest.raises(DataIOError, match="cannot read"):
        load_edge_list(tmp_path / "missing.txt")


def write_tu(d, edges, indicator, labels, attrs=None):
    d.mkdir(exist_ok=True)
    (d / "DS_A.txt").write_text("".join(f"{u}, {v}\n" for u, v in edges))
    (d / "DS_graph_indicator.txt").write_text("".join(f"{i}\n" for i in indicator))
    (d / "DS_graph_labels.txt").write_text("".join(f"{l}\n" for l in labels))
    if attrs is not None:
        (d / "DS_node_attributes.txt").write_text("".join(", ".join(map(str, r)) + "\n" for r in attrs))
    return d


def test_tu_loader(tmp_path):
    # graph 1: triangle on nodes 1-3, graph 2: path 4-5
    edges = [(1, 2), (2, 1), (2, 3), (3, 2), (1, 3), (3, 1), (4, 5), (5, 4)]
    ds = load_tu_dataset(write_tu(tmp_path / "ds", edges, [1, 1, 1, 2, 2], [-1, 1]))
    assert [g.n for g in ds.graphs] == [3, 2]
    assert [g.label for g in ds.graphs] == [0, 1] and ds.label_map == {-1: 0, 1: 1}
    assert ds.graphs[0].num_edges == 3
    assert np.allclose(ds.graphs[0].features[:, 0], 2)


def test_tu_attributes(tmp_path):
    d = write_tu(tmp_path / "ds", [(1, 2)], [1, 1], [0], attrs=[[0.5, 1], [2, 3]])
    assert np.allclose(load_tu_dataset(d).graphs[0].features, [[0.5, 1], [2, 3]])


def test_tu_errors(tmp_path):
    d = write_tu(tmp_path / "x", [(1, 3)], [1, 1, 2], [0, 1])
    with pytest.raises(GraphError, match="crosses graphs"):
        load_tu_dataset(d)
    d = write_tu(tmp_path / "y", [(1, 9)], [1, 1], [0])
    with pytest.raises(FormatError, match="out of range"):
        load_tu_dataset(d)
    (tmp_path / "z").mkdir()
    with pytest.raises(DataIOError, match="missing"):
        load_tu_dataset(tmp_path / "z")


def test_json_non_finite_and_exact_floats():
    x = np.array([0.1, 1 / 3, np.inf, np.nan, 2.0 ** -1074])
    doc = json.loads(dumps({"m": x}))
    assert doc["m"]["shape"] == [5]
    data = doc["m"]["data"]
    assert data[2] is None and data[3] is None
    assert data[0] == 0.1 and data[1] == 1 / 3 and data[4] == 2.0 ** -1074


def test_to_jsonable_rejects_unknown():
    with pytest.raises(TypeError):
        to_jsonable(object())


def test_report_schema():
    rep = make_report("curvature", 3, {"a": 1}, {"node": [0.5], "edges": []})
    jsonschema.validate(rep, REPORT_SCHEMA)
    jsonschema.validate(rep["results"], results_schema("curvature"))
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"node": [1]}, results_schema("curvature"))


def test_checkpoint_round_trip(tmp_path):
    params = ParameterSet({"w": np.random.default_rng(0).standard_normal((3, 2)), "b": np.zeros((1, 2))})
    path = tmp_path / "c.json"
    save_checkpoint(path, "ct", {"k": 2}, params, {"in_dim": 3})
    ck = load_checkpoint(path, {"w": (3, 2), "b": (1, 2)})
    assert ck.kind == "ct" and ck.config == {"k": 2} and ck.extra == {"in_dim": 3}
    assert np.array_equal(ck.params["w"], params["w"])


def test_checkpoint_errors(tmp_path):
    params = ParameterSet({"w": np.ones((3, 2))})
    path = tmp_path / "c.json"
    save_checkpoint(path, "ct", {}, params)
    with pytest.raises(ShapeError, match="'w' has shape"):
        load_checkpoint(path, {"w": (2, 3)})
    with pytest.raises(ShapeError, match="'v' missing"):
        load_checkpoint(path, {"w": (3, 2), "v": (1, 1)})
    with pytest.raises(ShapeError, match="unexpected parameter 'w'"):
        load_checkpoint(path, {})
    path.write_text(path.read_text()[:40])
    with pytest.raises(FormatError, match="truncated"):
        load_checkpoint(path)
    path.write_text('{"format": "other"}')
    with pytest.raises(FormatError):
        load_checkpoint(path)
