import json

import numpy as np
import pytest

from ricci_sbm.graph import Labels, build_graph
from ricci_sbm.meanfield import benchmark_trajectory
from ricci_sbm.pipeline import (ExperimentRefused, IterationAborted, benchmark_weights,
                                hall_check_edges, ricci_iterate, run_experiment, sample_edges,
                                tracking_error)
from ricci_sbm.sbm import SbmParams, sample_sbm


def complete(n):
    return build_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def test_triangle_iterates():
    states = ricci_iterate(complete(3), 2)
    assert [s.t for s in states] == [0, 1, 2]
    assert states[1].weights == pytest.approx([1.5] * 3, abs=1e-12)
    assert states[2].weights == pytest.approx([1.5] * 3, abs=1e-12)
    assert states[2].min_wdeg == pytest.approx(3.0)


def test_k4_one_step():
    assert ricci_iterate(complete(4), 1)[1].weights == pytest.approx([4 / 3] * 6, abs=1e-12)


def test_abort_on_zero_degree():
    cycle = build_graph(6, [(i, (i + 1) % 6) for i in range(6)])
    with pytest.raises(IterationAborted) as info:
        ricci_iterate(cycle, 2)
    assert info.value.step == 1 and info.value.vertex == 0
    assert "step 1" in str(info.value)


def test_abort_on_negative_weight():
    # two 3-leaf stars joined at their centres: the bridge is negatively curved
    edges = [(0, 1), (0, 2), (0, 3), (4, 5), (4, 6), (4, 7), (0, 4)]
    g = build_graph(8, edges)
    with pytest.raises(IterationAborted) as info:
        ricci_iterate(g, 2)
    assert info.value.step == 1 and info.value.edge == g.edge_index(0, 4)


def test_benchmark_weights():
    g, lab = sample_sbm(SbmParams(20, 0.6, 0.2, 1))
    tr = benchmark_trajectory(20, 0.6, 0.2, 2)
    assert np.array_equal(benchmark_weights(g, lab, tr, 0), np.ones(g.n_edges))
    w1 = benchmark_weights(g, lab, tr, 1)
    mask = lab.within_mask(g)
    assert np.all(w1[mask] == tr.w_in[1]) and np.all(w1[~mask] == tr.w_out[1])
    two = build_graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    assert np.all(benchmark_weights(two, Labels.balanced(3), tr, 2) == tr.w_in[2])
    with pytest.raises(ValueError, match="labels"):
        benchmark_weights(g, None, tr, 1)
    with pytest.raises(ValueError):
        benchmark_weights(g, lab, tr, 3)


def test_tracking_error_trivial_cases():
    g, lab = sample_sbm(SbmParams(20, 0.6, 0.2, 1))
    tr = benchmark_trajectory(20, 0.6, 0.2, 1)
    bench = [benchmark_weights(g, lab, tr, t) for t in range(2)]
    recs = tracking_error(g, bench, bench, tr)
    assert all(r.delta_t == 0 and r.lap_dev == 0 for r in recs)
    assert recs[0].gap_t == recs[0].gap_star_t
    assert recs[1].gap_pop_t == pytest.approx(tr.delta[1])
    with pytest.raises(ValueError):
        tracking_error(g, bench, bench[:1], tr)
    with pytest.raises(ValueError):
        tracking_error(g, [np.ones(3), np.ones(3)], bench, tr)


def test_iterates_track_and_stay_positive():
    g, lab = sample_sbm(SbmParams(40, 0.8, 0.4, 2))
    states = ricci_iterate(g, 2)
    assert all(s.min_weight > 0 for s in states)
    tr = benchmark_trajectory(40, 0.8, 0.4, 2)
    recs = tracking_error(g, states, [benchmark_weights(g, lab, tr, t) for t in range(3)], tr)
    assert recs[0].delta_t == 0
    for r in recs:
        assert abs(r.gap_t - r.gap_star_t) <= 2 * r.lap_dev + 1e-12


def test_sample_edges_seeded():
    g, _ = sample_sbm(SbmParams(30, 0.5, 0.2, 0))
    a = sample_edges(g, 50, 7)
    assert np.array_equal(a, sample_edges(g, 50, 7))
    assert len(set(a.tolist())) == 50 and np.all(np.diff(a) > 0)
    assert not np.array_equal(a, sample_edges(g, 50, 8))
    assert np.array_equal(sample_edges(g, None, 7), np.arange(g.n_edges))


def test_hall_check_counts():
    g, lab = sample_sbm(SbmParams(40, 0.8, 0.4, 0))
    res = hall_check_edges(g, lab, range(20))
    assert res["checked"] == 20 and 0 <= res["passed"] <= 20


SMALL = {"n": 30, "p0": 0.7, "p1": 0.3, "seeds": [1, 2], "subsample_edges": 100, "T": 2,
         "hall_edges": 20}


@pytest.mark.parametrize("kind", ["concentration", "one-step", "iterate"])
def test_reports_reproducible(kind, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    ra = run_experiment(kind, SMALL, a, force=True)
    run_experiment(kind, SMALL, b, force=True)
    assert a.read_bytes() == b.read_bytes()
    doc = json.loads(a.read_text())
    assert doc["config"]["thresholds"] and doc["kind"] == kind
    assert [s["seed"] for s in doc["seeds"]] == [1, 2]
    assert all({"name", "value", "threshold", "passed"} <= set(r) for r in doc["rules"])
    assert doc["passed"] == ra.passed


def test_threshold_override_echoed():
    cfg = dict(SMALL, thresholds={"err_max": -1.0})
    rep = run_experiment("one-step", cfg)
    assert rep.config["thresholds"]["err_max"] == -1.0
    assert rep.config["thresholds"]["gain_ratio_lo"] == 0.3
    assert not rep.passed


def test_concentration_disjoint_cliques(tmp_path):
    cfg = {"n": 6, "p0": 1 - 1e-12, "p1": 1e-12, "seeds": [0], "write_edges": True}
    rep = run_experiment("concentration", cfg, tmp_path / "r.json")
    s = rep.seeds[0]
    assert s["n_cross"] == 0 and s["mean_within"] == pytest.approx(6 / 5, abs=1e-12)
    rows = (tmp_path / "r.seed0.edges.csv").read_text().splitlines()
    assert len(rows) == 31 and rows[1].endswith(",1")


def test_iterate_refused_outside_window():
    cfg = {"n": 30, "p0": 0.3, "p1": 0.1, "seeds": [0], "T": 3}
    with pytest.raises(ExperimentRefused):
        run_experiment("iterate", cfg)


def test_unknown_kind_and_missing_keys():
    with pytest.raises(ValueError):
        run_experiment("bogus", SMALL)
    with pytest.raises(ValueError, match="p0"):
        run_experiment("one-step", {"n": 10, "p1": 0.1})
