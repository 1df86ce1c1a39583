import json
import math

import numpy as np
import pytest

from ricci_sbm.graph import pair_stats
from ricci_sbm.sbm import SbmParams, check_window, pair_uniforms, sample_sbm

NEAR1, NEAR0 = 1 - 1e-12, 1e-12


def test_deterministic_limits():
    g, lab = sample_sbm(SbmParams(3, NEAR1, NEAR0, seed=5))
    assert g.edges.tolist() == [[0, 1], [0, 2], [1, 2], [3, 4], [3, 5], [4, 5]]
    assert lab.assignment.tolist() == [1, 1, 1, 2, 2, 2]
    g, _ = sample_sbm(SbmParams(3, NEAR1, 1 - 2e-12, seed=5))
    assert g.n_edges == 15


@pytest.mark.parametrize("bad", [dict(p0=0.3, p1=0.5), dict(p0=1.0, p1=0.5), dict(p0=0.5, p1=0.0),
                                 dict(p0=0.5, p1=0.5)])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        SbmParams(10, **bad)


def test_mean_degree():
    g, _ = sample_sbm(SbmParams(200, 0.5, 0.25, seed=11))
    d0 = 199 * 0.5 + 200 * 0.25
    assert abs(g.degrees.mean() - d0) <= 3 * math.sqrt(d0)


def test_reproducible_and_chunk_independent():
    p = SbmParams(60, 0.4, 0.1, seed=2 ** 63 + 7)
    a, _ = sample_sbm(p)
    b, _ = sample_sbm(p, chunk=37)
    assert a.edges.tobytes() == b.edges.tobytes()
    c, _ = sample_sbm(SbmParams(60, 0.4, 0.1, seed=8))
    assert a.edges.tobytes() != c.edges.tobytes()


def test_pair_uniforms_counter_based():
    full = pair_uniforms(9, 0, 103)
    for start in (0, 1, 3, 4, 5, 50, 99):
        assert np.array_equal(pair_uniforms(9, start, 103 - start), full[start:])


def test_window_examples():
    w = check_window(SbmParams(300, 0.5, 0.25), 0.2, 1)
    assert w.rho_check and w.contrast_ratio == 0.5
    assert w.mdt_ratio == pytest.approx(300 * 0.375 ** 3 / math.log(300))
    assert w.mdt_ratio == pytest.approx(2.77, abs=0.005)
    assert w.eps_n == pytest.approx(0.2252, abs=5e-5)
    assert w.eta_n == pytest.approx(w.eps_n / 0.375)
    assert w.d0 == pytest.approx(224.5)
    w2 = check_window(SbmParams(150, 0.8, 0.4), 0.2, 2)
    assert w2.mdt_T_ratio == pytest.approx(2.33, abs=0.005)
    assert w2.eta_nT == pytest.approx(w2.eps_n / 0.6 ** 2)
    doc = json.loads(w2.to_json())
    assert doc["threshold_ratio"] == 2.0 and doc["mdt_T_ok"]
    assert not check_window(SbmParams(300, 0.9, 0.1), 0.2, 1).rho_check


def test_window_preconditions():
    with pytest.raises(ValueError):
        check_window(SbmParams(10, 0.5, 0.2), 0.6, 1)
    with pytest.raises(ValueError):
        check_window(SbmParams(10, 0.5, 0.2), 0.2, 0)


def test_blockwise_degree_concentration():
    n, p0, p1 = 300, 0.5, 0.25
    pb = (p0 + p1) / 2
    bound = 5 * math.sqrt(n * pb * math.log(n))
    for seed in range(10):
        g, lab = sample_sbm(SbmParams(n, p0, p1, seed))
        A = g.adjacency_dense()
        home = np.concatenate([A[:n, :n].sum(1), A[n:, n:].sum(1)])
        assert np.abs(home - (n - 1) * p0).max() <= bound


def test_codegree_mean():
    # per-seed averages over all within pairs are independent across seeds
    n, p0, p1 = 100, 0.5, 0.25
    means = []
    for seed in range(12):
        g, lab = sample_sbm(SbmParams(n, p0, p1, seed))
        A = g.adjacency_dense()
        C = A @ A
        within = np.equal.outer(lab.assignment, lab.assignment)
        np.fill_diagonal(within, False)
        means.append(C[within].mean())
    means = np.array(means)
    expect = (n - 2) * p0 ** 2 + n * p1 ** 2
    assert abs(means.mean() - expect) <= 3 * means.std(ddof=1) / math.sqrt(means.size)
    x, y = 0, 1
    assert pair_stats(g, None, x, y).codeg == C[x, y]
