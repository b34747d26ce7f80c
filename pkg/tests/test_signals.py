"""Signal loading, correlation matrices, windowing, and graph formation."""

import numpy as np
import pytest

from graphcorr.errors import (ConfigurationError, ContractError, DataError,
                              DegenerateSignalError, InsufficientFramesError)
from graphcorr.signals import (GraphTopology, TimeSeriesMatrix, form_graph,
                               load_dataset, load_manifest, load_subject_csv,
                               retained_pair_count, single_window, static_fc,
                               window_signals, windowed_fc)

from oracles import max_rel_err, naive_static_fc, naive_windowed_fc


def make_ts(values, sid="s", label=0):
    return TimeSeriesMatrix(np.asarray(values, dtype=np.float64), subject_id=sid,
                            label=label)


# ---------------------------------------------------------------------------
# static connectivity
# ---------------------------------------------------------------------------

def test_static_fc_known_value():
    ts = make_ts([[1.0, 2.0, 3.0], [1.0, 3.0, 2.0]])
    c = static_fc(ts)
    assert abs(c[0, 1] - 0.5) < 1e-12
    assert c[0, 1] == c[1, 0]  # exact symmetry
    np.testing.assert_array_equal(np.diag(c), [1.0, 1.0])


def test_static_fc_matches_naive(rng):
    ts = make_ts(rng.normal(size=(7, 40)))
    c = static_fc(ts)
    assert max_rel_err(c, naive_static_fc(ts.values), floor=1e-9) < 1e-12
    np.testing.assert_array_equal(c, c.T)
    assert c.max() <= 1.0 and c.min() >= -1.0


def test_static_fc_degenerate_row_named():
    ts = make_ts([[1.0, 1.0, 1.0], [0.0, 1.0, 2.0]])
    with pytest.raises(DegenerateSignalError, match="index 0"):
        static_fc(ts)


def test_time_series_validation():
    with pytest.raises(DataError, match="2-D"):
        make_ts(np.zeros(5))
    with pytest.raises(DataError, match="2 frames"):
        make_ts(np.zeros((3, 1)))
    with pytest.raises(DataError, match="non-finite"):
        make_ts([[0.0, np.nan]])
    with pytest.raises(DataError, match="roi names"):
        TimeSeriesMatrix(np.zeros((2, 4)), roi_names=["only-one"])


# ---------------------------------------------------------------------------
# windowing
# ---------------------------------------------------------------------------

def test_window_count_formula(rng):
    # W = floor((T - T_w) / s)
    ts = make_ts(rng.normal(size=(3, 1200)))
    assert window_signals(ts, 50, 30).window_count == 38
    ts = make_ts(rng.normal(size=(3, 240)))
    assert window_signals(ts, 40, 15).window_count == 13


def test_window_contents(rng):
    ts = make_ts(rng.normal(size=(2, 23)))
    fs = window_signals(ts, 6, 4)
    assert fs.signals.shape == (2, 6, fs.window_count)
    for w in range(fs.window_count):
        np.testing.assert_array_equal(fs.signals[:, :, w],
                                      ts.values[:, w * 4: w * 4 + 6])


def test_window_size_equal_to_scan_is_insufficient(rng):
    ts = make_ts(rng.normal(size=(2, 100)))
    with pytest.raises(InsufficientFramesError):
        window_signals(ts, 100, 30)
    with pytest.raises(InsufficientFramesError):
        window_signals(ts, 120, 30)


def test_window_parameter_validation(rng):
    ts = make_ts(rng.normal(size=(2, 50)))
    with pytest.raises(ConfigurationError):
        window_signals(ts, 1, 10)
    with pytest.raises(ConfigurationError):
        window_signals(ts, 10, 0)


def test_single_window_spans_whole_scan(rng):
    ts = make_ts(rng.normal(size=(4, 60)))
    fs = single_window(ts)
    assert fs.window_count == 1 and fs.window_size == 60
    np.testing.assert_array_equal(fs.signals[:, :, 0], ts.values)


def test_single_window_fc_equals_static_fc(rng):
    ts = make_ts(rng.normal(size=(5, 80)))
    fc = windowed_fc(single_window(ts))
    np.testing.assert_allclose(fc[:, :, 0], static_fc(ts), atol=1e-12)


def test_windowed_fc_matches_naive(rng):
    ts = make_ts(rng.normal(size=(4, 37)))
    fs = window_signals(ts, 9, 5)
    fc = windowed_fc(fs)
    want = naive_windowed_fc(fs.signals)
    assert max_rel_err(fc, want, floor=1e-9) < 1e-12
    assert fs.fc is fc


def test_windowed_fc_degenerate_span_names_node_and_window(rng):
    vals = rng.normal(size=(3, 20))
    vals[1, 5:10] = 4.0  # constant inside window 1 (frames 5..9)
    ts = make_ts(vals)
    fs = window_signals(ts, 5, 5)
    with pytest.raises(DegenerateSignalError, match="node 1 in window 1"):
        windowed_fc(fs)


# ---------------------------------------------------------------------------
# graph formation
# ---------------------------------------------------------------------------

def test_retained_pair_count_exact_rational():
    # 2% of C(400, 2) = 0.02 * 79800 = 1596 exactly; float ceil would give 1597
    assert retained_pair_count(400, 2.0) == 1596
    assert retained_pair_count(4, 34.0) == 3  # ceil(0.34 * 6) = ceil(2.04)
    assert retained_pair_count(4, 100.0) == 6
    assert retained_pair_count(4, 0.001) == 1
    assert retained_pair_count(10, 50.0) == 23  # ceil(22.5)


def test_form_graph_keeps_top_pairs_with_lexicographic_ties():
    c = np.eye(4)
    pairs = {(0, 1): 0.9, (0, 2): 0.9, (0, 3): 0.5, (1, 2): 0.5,
             (1, 3): 0.1, (2, 3): -0.2}
    for (i, j), v in pairs.items():
        c[i, j] = c[j, i] = v
    topo = form_graph(c, 50.0)  # keep ceil(3) = 3 pairs
    assert topo.edges == [(0, 1), (0, 2), (0, 3), (1, 0), (2, 0), (3, 0)]
    assert topo.edge_count == 6
    assert topo.neighbors[0] == [1, 2, 3]
    assert topo.neighbors[1] == [0]


def test_form_graph_absolute_ranking():
    c = np.eye(4)
    c[0, 1] = c[1, 0] = 0.6
    c[2, 3] = c[3, 2] = -0.95
    c[0, 2] = c[2, 0] = 0.3
    topo_signed = form_graph(c, 17.0)    # keep 2: (0, 1) then (0, 2)
    assert topo_signed.edges == [(0, 1), (0, 2), (1, 0), (2, 0)]
    topo_abs = form_graph(c, 17.0, rank="absolute")  # |−0.95| ranks first
    assert topo_abs.edges == [(0, 1), (1, 0), (2, 3), (3, 2)]


def test_form_graph_validation():
    c = np.eye(3)
    with pytest.raises(ContractError, match="symmetric"):
        bad = c.copy()
        bad[0, 1] = 0.5
        form_graph(bad, 10.0)
    with pytest.raises(ConfigurationError):
        form_graph(c, 0.0)
    with pytest.raises(ConfigurationError):
        form_graph(c, 101.0)
    with pytest.raises(ConfigurationError):
        form_graph(c, 10.0, rank="best")
    with pytest.raises(ContractError):
        form_graph(np.zeros((2, 3)), 10.0)


def test_topology_validation_errors():
    with pytest.raises(ContractError, match="reverse"):
        GraphTopology(3, [(0, 1)])
    with pytest.raises(ContractError, match="self loop"):
        GraphTopology(3, [(1, 1)])
    with pytest.raises(ContractError, match="out of range"):
        GraphTopology(2, [(0, 2), (2, 0)])
    with pytest.raises(ContractError, match="sorted"):
        GraphTopology(2, [(1, 0), (0, 1)])


def test_topology_targets_sources():
    topo = GraphTopology(3, [(0, 1), (1, 0), (1, 2), (2, 1)])
    np.testing.assert_array_equal(topo.targets(), [0, 1, 1, 2])
    np.testing.assert_array_equal(topo.sources(), [1, 0, 2, 1])


# ---------------------------------------------------------------------------
# file loading
# ---------------------------------------------------------------------------

def test_load_subject_csv_with_roi_names(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("# roi_names: A, B\n1.0,2.0,3.0\n4.0,5.0,6.0\n")
    ts = load_subject_csv(p, subject_id="s1", label=1)
    assert ts.roi_names == ["A", "B"]
    assert ts.values.shape == (2, 3)
    assert ts.label == 1


def test_load_subject_csv_errors(tmp_path):
    ragged = tmp_path / "r.csv"
    ragged.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(DataError, match="ragged"):
        load_subject_csv(ragged)
    empty = tmp_path / "e.csv"
    empty.write_text("\n")
    with pytest.raises(DataError, match="no signal rows"):
        load_subject_csv(empty)
    bad = tmp_path / "b.csv"
    bad.write_text("1.0,2.0\n1.0,oops\n")
    with pytest.raises(DataError, match="line 2"):
        load_subject_csv(bad)
    with pytest.raises(DataError, match="cannot read"):
        load_subject_csv(tmp_path / "missing.csv")


def test_load_manifest_and_dataset(tmp_path):
    (tmp_path / "a.csv").write_text("1.0,2.0,3.0\n2.0,1.0,3.0\n")
    (tmp_path / "b.csv").write_text("0.0,1.0,0.5\n1.0,0.0,0.5\n")
    m = tmp_path / "manifest.json"
    m.write_text('[{"id": "a", "path": "a.csv", "label": 0},'
                 ' {"id": "b", "path": "b.csv", "label": 1}]')
    entries = load_manifest(m)
    assert [e["id"] for e in entries] == ["a", "b"]
    assert all(str(tmp_path) in e["path"] for e in entries)
    subjects = load_dataset(m)
    assert [ts.label for ts in subjects] == [0, 1]


def test_load_manifest_errors(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text('[{"id": "a",]')
    with pytest.raises(DataError, match="byte offset"):
        load_manifest(bad_json)
    not_array = tmp_path / "obj.json"
    not_array.write_text('{"id": "a"}')
    with pytest.raises(DataError, match="array"):
        load_manifest(not_array)
    bad_label = tmp_path / "lab.json"
    bad_label.write_text('[{"id": "a", "path": "a.csv", "label": 2}]')
    with pytest.raises(DataError, match="label"):
        load_manifest(bad_label)
    dup = tmp_path / "dup.json"
    dup.write_text('[{"id": "a", "path": "a.csv", "label": 0},'
                   ' {"id": "a", "path": "b.csv", "label": 1}]')
    with pytest.raises(DataError, match="duplicate"):
        load_manifest(dup)
