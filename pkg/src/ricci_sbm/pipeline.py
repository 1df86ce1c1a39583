"""Ricci reweighting iteration, benchmark tracking and the canonical experiments."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ._io import atomic_write_text, fmt, write_csv
from .curvature import CurvatureError, curvature_all_edges, dump_curvature_csv
from .graph import Graph, Labels, hall_matching_check, pair_stats
from .meanfield import MeanFieldTrajectory, benchmark_trajectory, contrast_summary, population_levels
from .sbm import SbmParams, check_window, sample_sbm
from .spectral import (block_gap, block_matrix, block_vector, eigs_bottom, laplacian_from_matrix,
                       normalized_laplacian, op_norm, sign_cluster)

__all__ = [
    "DEFAULT_THRESHOLDS",
    "ExperimentRefused",
    "ExperimentReport",
    "IterateState",
    "IterationAborted",
    "TrackingRecord",
    "benchmark_weights",
    "hall_check_edges",
    "ricci_iterate",
    "run_experiment",
    "sample_edges",
    "tracking_error",
]

logger = logging.getLogger(__name__)

KINDS = ("concentration", "one-step", "iterate")

DEFAULT_THRESHOLDS = {
    "concentration": {"level_tol": 0.5, "min_kappa": 0.0},
    "one-step": {"err_max": 0.02, "gain_ratio_lo": 0.3, "gain_ratio_hi": 3.0},
    "iterate": {"delta_factor": 3.0, "gap_slack": 0.05, "hall_rate": 1.0},
}

DEFAULT_CONFIG = {"T": 1, "rho": 0.2, "seeds": [0], "subsample_edges": 2000, "hall_edges": 200,
                  "full_sweep": False, "write_edges": False}


class IterationAborted(RuntimeError):
    """Weighted degrees or weights left the positive regime mid-iteration."""

    def __init__(self, message: str, step: int, vertex: int | None = None, edge: int | None = None):
        super().__init__(message)
        self.step = step
        self.vertex = vertex
        self.edge = edge


class ExperimentRefused(ValueError):
    """Configuration lies outside the regime the experiment is meant for."""


@dataclass(frozen=True)
class IterateState:
    t: int
    weights: np.ndarray
    min_weight: float
    max_weight: float
    min_wdeg: float


def _state(g: Graph, t: int, w: np.ndarray) -> IterateState:
    wdeg = g.weighted_degrees(w)
    return IterateState(t, w, float(w.min(initial=math.inf)), float(w.max(initial=-math.inf)),
                        float(wdeg.min(initial=math.inf)))


def ricci_iterate(g: Graph, T: int, *, workers: int = 1, **curv_kw) -> list[IterateState]:
    """``W0 = A`` and ``W(t+1) = kappa_{W(t)}`` on the fixed edge support.

    Raises
    ------
    IterationAborted
        When some vertex has weighted degree <= 0, or some edge weight is
        negative, at a step that still has to be swept.
    """
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    w = np.ones(g.n_edges)
    states = [_state(g, 0, w)]
    for t in range(T):
        _check_positive(g, w, t)
        try:
            w = curvature_all_edges(g, w, workers=workers, **curv_kw)
        except CurvatureError as exc:
            raise IterationAborted(f"step {t}: {exc}", t) from exc
        states.append(_state(g, t + 1, w))
        logger.info("step %d: weights in [%.6g, %.6g]", t + 1, states[-1].min_weight, states[-1].max_weight)
    _check_positive(g, w, T)
    return states


def _check_positive(g: Graph, w: np.ndarray, t: int) -> None:
    neg = np.flatnonzero(w < 0)
    if neg.size:
        e = int(neg[0])
        raise IterationAborted(f"step {t}: edge {e} {tuple(g.edges[e])} has negative weight {w[e]}", t, edge=e)
    wdeg = g.weighted_degrees(w)
    bad = np.flatnonzero(~(wdeg > 0))
    if bad.size:
        v = int(bad[0])
        raise IterationAborted(f"step {t}: vertex {v} has weighted degree {wdeg[v]}", t, vertex=v)


def benchmark_weights(g: Graph, labels: Labels | None, trajectory: MeanFieldTrajectory, t: int) -> np.ndarray:
    """Two-level benchmark ``K(t) o A``: ``w_in(t)`` within blocks, ``w_out(t)`` across."""
    if labels is None:
        raise ValueError("benchmark weights need block labels")
    if not 0 <= t <= trajectory.T:
        raise ValueError(f"step {t} outside the trajectory (T={trajectory.T})")
    a, b = trajectory.levels(t)
    return np.where(labels.within_mask(g), a, b)


@dataclass(frozen=True)
class TrackingRecord:
    t: int
    delta_t: float
    lap_dev: float
    gap_t: float
    gap_star_t: float
    gap_pop_t: float
    gap_pop_exact_t: float


def tracking_error(g: Graph, iterates, benchmarks, trajectory: MeanFieldTrajectory) -> list[TrackingRecord]:
    """Max-norm and Laplacian deviations of iterates from their benchmarks, plus gap chains."""
    if len(iterates) != len(benchmarks):
        raise ValueError(f"{len(iterates)} iterates vs {len(benchmarks)} benchmarks")
    n, p0, p1 = trajectory.n, trajectory.p0, trajectory.p1
    out = []
    for t, (it, bw) in enumerate(zip(iterates, benchmarks)):
        w = it.weights if isinstance(it, IterateState) else np.asarray(it)
        bw = np.asarray(bw)
        if w.shape != (g.n_edges,) or bw.shape != (g.n_edges,):
            raise ValueError(f"step {t}: weights not aligned to the {g.n_edges}-edge index")
        L = normalized_laplacian(g, w)
        Ls = normalized_laplacian(g, bw)
        a, b = trajectory.levels(t)
        out.append(TrackingRecord(
            t=t,
            delta_t=float(np.abs(w - bw).max(initial=0.0)),
            lap_dev=op_norm(L.matrix - Ls.matrix),
            gap_t=eigs_bottom(L, 3).gap,
            gap_star_t=eigs_bottom(Ls, 3).gap,
            gap_pop_t=float(trajectory.delta[t]),
            gap_pop_exact_t=block_gap(n, p0 * a, p1 * b),
        ))
    return out


def sample_edges(g: Graph, k: int | None, seed: int) -> np.ndarray:
    """Seeded sorted subset of ``k`` edge indices (all edges if ``k`` is None or too large)."""
    if k is None or k >= g.n_edges:
        return np.arange(g.n_edges)
    rng = np.random.default_rng([seed, 0x5EED])
    return np.sort(rng.choice(g.n_edges, size=k, replace=False))


def hall_check_edges(g: Graph, labels: Labels, edges) -> dict:
    """Matching check on the in/out type-split bipartite graphs of each edge."""
    passed = 0
    failures = []
    for e in edges:
        x, y = map(int, g.edges[e])
        ps = pair_stats(g, labels, x, y)
        ok = (hall_matching_check(g, ps.u_in, ps.v_in).saturating_matching
              and hall_matching_check(g, ps.u_out, ps.v_out).saturating_matching)
        passed += ok
        if not ok:
            failures.append(int(e))
    total = len(edges)
    return {"checked": total, "passed": passed, "rate": passed / total if total else 1.0,
            "failed_edges": failures}


@dataclass
class ExperimentReport:
    kind: str
    config: dict
    window: dict
    seeds: list = field(default_factory=list)
    aggregate: dict = field(default_factory=dict)
    rules: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.rules)

    def rule(self, name: str, value, threshold, passed: bool) -> None:
        self.rules.append({"name": name, "value": value, "threshold": threshold, "passed": bool(passed)})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(_clean(self.to_dict()), indent=2, sort_keys=True)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _resolve_config(kind: str, config: dict) -> dict:
    cfg = dict(DEFAULT_CONFIG)
    cfg.update({k: v for k, v in config.items() if k != "thresholds"})
    for key in ("n", "p0", "p1"):
        if key not in cfg:
            raise ValueError(f"config is missing {key!r}")
    th = dict(DEFAULT_THRESHOLDS[kind])
    th.update(config.get("thresholds") or {})
    cfg["thresholds"] = th
    cfg["seeds"] = [int(s) for s in cfg["seeds"]]
    return cfg


def run_experiment(kind: str, config: dict, out=None, *, force: bool = False, workers: int = 1
                   ) -> ExperimentReport:
    """Run one of ``concentration``, ``one-step`` or ``iterate`` over the configured seeds.

    The report echoes the resolved config and thresholds and is written
    atomically to ``out`` when given. Window violations become warnings.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
    cfg = _resolve_config(kind, config)
    n, p0, p1, T = int(cfg["n"]), float(cfg["p0"]), float(cfg["p1"]), int(cfg["T"])
    window = check_window(SbmParams(n, p0, p1), float(cfg["rho"]), T)
    report = ExperimentReport(kind, cfg, window.to_dict())
    if not window.rho_check:
        report.warnings.append("contrast window violated (rho check)")
    if not window.mdt_ok:
        report.warnings.append(f"density ratio {window.mdt_ratio:.4g} below {2.0}")
    if kind == "iterate":
        if not window.mdt_T_ok:
            report.warnings.append(f"horizon density ratio {window.mdt_T_ratio:.4g} below {2.0}")
        if window.mdt_T_ratio < 1 and not force:
            raise ExperimentRefused(
                f"n p_bar^(2T+1)/log n = {window.mdt_T_ratio:.4g} < 1 at T={T}; pass force to run anyway")
    runner = {"concentration": _concentration, "one-step": _one_step, "iterate": _iterate}[kind]
    runner(report, cfg, window, out, workers)
    if out is not None:
        atomic_write_text(out, report.to_json() + "\n")
    return report


def _side_path(out, suffix: str) -> Path | None:
    if out is None:
        return None
    out = Path(out)
    return out.with_name(f"{out.stem}.{suffix}")


def _concentration(report, cfg, window, out, workers):
    n, p0, p1 = cfg["n"], cfg["p0"], cfg["p1"]
    th = cfg["thresholds"]
    w_in, w_out = population_levels(n, p0, p1)
    eps = window.eps_n
    tol = th["level_tol"] * (w_in - w_out)
    k = None if cfg["full_sweep"] else cfg["subsample_edges"]
    for seed in cfg["seeds"]:
        g, labels = sample_sbm(SbmParams(n, p0, p1, seed))
        idx = sample_edges(g, k, seed)
        kappa = curvature_all_edges(g, edges=idx, workers=workers)
        within = labels.within_mask(g)[idx]
        kin, kout = kappa[within], kappa[~within]
        row = {
            "seed": seed, "n_edges": g.n_edges, "sampled": int(idx.size),
            "n_within": int(kin.size), "n_cross": int(kout.size),
            "mean_within": _mean(kin), "mean_cross": _mean(kout),
            "max_dev_within": _maxdev(kin, w_in), "max_dev_cross": _maxdev(kout, w_out),
            "min_kappa": float(kappa.min()),
        }
        row["max_dev_within_eps"] = row["max_dev_within"] / eps
        row["max_dev_cross_eps"] = row["max_dev_cross"] / eps
        report.seeds.append(row)
        if cfg["write_edges"] and out is not None:
            dump_curvature_csv(_side_path(out, f"seed{seed}.edges.csv"), g, kappa, labels, idx)
    S = report.seeds
    report.aggregate = {"w_in": w_in, "w_out": w_out, "eps_n": eps, "level_tolerance": tol,
                        "mean_within": _mean([s["mean_within"] for s in S]),
                        "mean_cross": _mean([s["mean_cross"] for s in S]),
                        "max_dev_within": max((s["max_dev_within"] for s in S), default=0.0),
                        "max_dev_cross": max((s["max_dev_cross"] for s in S), default=0.0)}
    worst_in = max((abs(s["mean_within"] - w_in) for s in S), default=0.0)
    worst_out = max((abs(s["mean_cross"] - w_out) for s in S), default=0.0)
    report.rule("mean_within_near_level", worst_in, tol, worst_in <= tol)
    report.rule("mean_cross_near_level", worst_out, tol, worst_out <= tol)
    sep = min((s["mean_within"] - s["mean_cross"] for s in S), default=0.0)
    report.rule("within_above_cross", sep, 0.0, sep > 0)
    mk = min((s["min_kappa"] for s in S), default=0.0)
    report.rule("min_kappa_positive", mk, th["min_kappa"], mk > th["min_kappa"])


def _mean(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(x.mean()) if x.size else math.nan


def _maxdev(x, level) -> float:
    x = np.asarray(x)
    return float(np.abs(x - level).max()) if x.size else 0.0


def _one_step(report, cfg, window, out, workers):
    n, p0, p1 = cfg["n"], cfg["p0"], cfg["p1"]
    th = cfg["thresholds"]
    cs = contrast_summary(n, p0, p1)
    w_in, w_out = population_levels(n, p0, p1)
    L0pop = laplacian_from_matrix(block_matrix(n, p0, p1))
    L1pop = laplacian_from_matrix(block_matrix(n, p0 * w_in, p1 * w_out))
    g0pop = block_gap(n, p0, p1)
    g1pop = block_gap(n, p0 * w_in, p1 * w_out)
    for seed in cfg["seeds"]:
        g, labels = sample_sbm(SbmParams(n, p0, p1, seed))
        f = block_vector(labels)
        L0 = normalized_laplacian(g)
        kappa = curvature_all_edges(g, workers=workers)
        if not (kappa > 0).all():
            report.warnings.append(f"seed {seed}: {int((kappa <= 0).sum())} nonpositive curvature weights")
        L1 = normalized_laplacian(g, kappa)
        s0, s1 = eigs_bottom(L0, 3, f), eigs_bottom(L1, 3, f)
        c0, c1 = sign_cluster(s0.v2, labels), sign_cluster(s1.v2, labels)
        d0, d1 = op_norm(L0.matrix - L0pop.matrix), op_norm(L1.matrix - L1pop.matrix)
        report.seeds.append({
            "seed": seed, "n_edges": g.n_edges,
            "gap0": s0.gap, "gap1": s1.gap, "gain": s1.gap - s0.gap,
            "lambda0": s0.eigenvalues.tolist(), "lambda1": s1.eigenvalues.tolist(),
            "gap0_pop": g0pop, "gap1_pop": g1pop,
            "delta0": d0, "delta1": d1,
            "dk_ratio0_sq": (d0 / g0pop) ** 2, "dk_ratio1_sq": (d1 / g1pop) ** 2,
            "err0": c0.err, "err1": c1.err, "tan2_0": c0.tan_angle_sq, "tan2_1": c1.tan_angle_sq,
            "min_kappa": float(kappa.min()),
        })
    S = report.seeds
    mean_gain = _mean([s["gain"] for s in S])
    ratio = mean_gain / cs.mf_gain
    report.aggregate = {"contrast": asdict(cs), "mean_gain": mean_gain, "predicted_gain": cs.mf_gain,
                        "gain_ratio": ratio, "gap0_pop": g0pop, "gap1_pop": g1pop,
                        "mean_err0": _mean([s["err0"] for s in S]), "mean_err1": _mean([s["err1"] for s in S])}
    worst_gain = min((s["gain"] for s in S), default=0.0)
    report.rule("gap_increases_every_seed", worst_gain, 0.0, worst_gain > 0)
    report.rule("gain_ratio_in_band", ratio, [th["gain_ratio_lo"], th["gain_ratio_hi"]],
                th["gain_ratio_lo"] <= ratio <= th["gain_ratio_hi"])
    e_max = max((max(s["err0"], s["err1"]) for s in S), default=0.0)
    report.rule("err_small", e_max, th["err_max"], e_max <= th["err_max"])
    slack = min((min(s["tan2_0"] - s["err0"], s["tan2_1"] - s["err1"]) for s in S), default=0.0)
    report.rule("err_below_tan2", slack, 0.0, slack >= 0)


def _iterate(report, cfg, window, out, workers):
    n, p0, p1, T = cfg["n"], cfg["p0"], cfg["p1"], cfg["T"]
    th = cfg["thresholds"]
    eps, pb = window.eps_n, window.p_bar
    traj = benchmark_trajectory(n, p0, p1, T)
    limits = [0.0] + [th["delta_factor"] * eps / pb ** (t - 1) for t in range(1, T + 1)]
    for seed in cfg["seeds"]:
        g, labels = sample_sbm(SbmParams(n, p0, p1, seed))
        states = ricci_iterate(g, T, workers=workers)
        bench = [benchmark_weights(g, labels, traj, t) for t in range(T + 1)]
        recs = tracking_error(g, states, bench, traj)
        hall = hall_check_edges(g, labels, sample_edges(g, cfg["hall_edges"], seed))
        report.seeds.append({
            "seed": seed, "n_edges": g.n_edges,
            "tracking": [asdict(r) for r in recs],
            "delta_ratio": [r.delta_t * pb ** (r.t - 1) / eps for r in recs],
            "min_weight": [s.min_weight for s in states],
            "min_wdeg": [s.min_wdeg for s in states],
            "hall": hall,
        })
        if out is not None and cfg["write_edges"]:
            rows = [(e, int(g.edges[e, 0]), int(g.edges[e, 1]), *(fmt(s.weights[e]) for s in states))
                    for e in range(g.n_edges)]
            write_csv(_side_path(out, f"seed{seed}.iterates.csv"),
                      ("edge_index", "u", "v", *(f"w{t}" for t in range(T + 1))), rows)
    S = report.seeds
    report.aggregate = {"eps_n": eps, "p_bar": pb, "delta_limits": limits,
                        "trajectory": {"w_in": traj.w_in.tolist(), "w_out": traj.w_out.tolist(),
                                       "s": traj.s.tolist(), "delta": traj.delta.tolist(),
                                       "s_star": traj.s_star}}
    d0 = max((s["tracking"][0]["delta_t"] for s in S), default=0.0)
    report.rule("delta0_zero", d0, 0.0, d0 == 0.0)
    for t in range(1, T + 1):
        dt = max((s["tracking"][t]["delta_t"] for s in S), default=0.0)
        report.rule(f"delta{t}_tracked", dt, limits[t], dt <= limits[t])
    for t in range(1, T + 1):
        drop = min((s["tracking"][t]["gap_t"] - s["tracking"][t - 1]["gap_t"] for s in S), default=0.0)
        report.rule(f"gap{t}_monotone", drop, -th["gap_slack"], drop >= -th["gap_slack"])
    chain = max((abs(r["gap_t"] - r["gap_star_t"]) - 2 * r["lap_dev"] for s in S for r in s["tracking"]),
                default=0.0)
    report.rule("gap_chain_within_weyl", chain, 0.0, chain <= 1e-12)
    rate = min((s["hall"]["rate"] for s in S), default=1.0)
    report.rule("hall_rate", rate, th["hall_rate"], rate >= th["hall_rate"])
