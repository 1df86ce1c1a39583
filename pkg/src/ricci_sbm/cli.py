"""Command-line entry point: ``ricci-sbm <subcommand>``.

Exit codes: 0 success (all acceptance rules passed), 1 some rule failed,
2 runtime or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ._io import atomic_write_text, fmt, write_csv
from .curvature import curvature_all_edges, dump_curvature_csv
from .graph import Graph, load_graph_json, save_graph_json
from .pipeline import KINDS, ricci_iterate, run_experiment
from .sbm import SbmParams, sample_sbm
from .spectral import block_vector, eigs_bottom, normalized_laplacian, sign_cluster

logger = logging.getLogger("ricci_sbm")


def read_weights(path, g: Graph) -> np.ndarray:
    """Read per-edge weights from a CSV with ``edge_index`` and ``weight`` or ``kappa`` columns."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        col = "weight" if "weight" in cols else "kappa" if "kappa" in cols else None
        if col is None or "edge_index" not in cols:
            raise ValueError(f"{path}: need columns edge_index and weight (or kappa), got {cols}")
        w = np.full(g.n_edges, np.nan)
        for row in reader:
            e = int(row["edge_index"])
            if not 0 <= e < g.n_edges:
                raise ValueError(f"{path}: edge_index {e} out of range")
            w[e] = float(row[col])
    missing = np.flatnonzero(np.isnan(w))
    if missing.size:
        raise ValueError(f"{path}: no weight for edges {missing[:10].tolist()}")
    return w


def _generate(args) -> int:
    g, labels = sample_sbm(SbmParams(args.n, args.p0, args.p1, args.seed))
    save_graph_json(args.out, g, labels)
    logger.info("wrote %d vertices, %d edges to %s", g.n_vertices, g.n_edges, args.out)
    return 0


def _curvature(args) -> int:
    g, labels = load_graph_json(args.graph)
    w = read_weights(args.weights, g) if args.weights else None
    kappa = curvature_all_edges(g, w, workers=args.workers)
    dump_curvature_csv(args.out, g, kappa, labels)
    return 0


def _iterate(args) -> int:
    g, _ = load_graph_json(args.graph)
    states = ricci_iterate(g, args.T, workers=args.workers)
    rows = [(e, int(g.edges[e, 0]), int(g.edges[e, 1]), *(fmt(s.weights[e]) for s in states))
            for e in range(g.n_edges)]
    write_csv(args.out, ("edge_index", "u", "v", *(f"w{s.t}" for s in states)), rows)
    return 0


def _cluster(args) -> int:
    g, labels = load_graph_json(args.graph)
    w = read_weights(args.weights, g) if args.weights else None
    L = normalized_laplacian(g, w)
    ref = block_vector(labels) if labels is not None else None
    summary = eigs_bottom(L, 3, reference=ref)
    res = sign_cluster(summary.v2, labels)
    doc = {"labels": res.labels.tolist(), **summary.to_dict()}
    if labels is not None:
        doc["err"] = res.err
        doc["tan_angle_sq"] = res.tan_angle_sq
    atomic_write_text(args.out, json.dumps(doc) + "\n")
    return 0


def _experiment(args) -> int:
    config = json.loads(Path(args.config).read_text())
    report = run_experiment(args.kind, config, args.out, force=args.force, workers=args.workers)
    for r in report.rules:
        logger.info("%s %s: value=%s threshold=%s", "PASS" if r["passed"] else "FAIL",
                    r["name"], r["value"], r["threshold"])
    for w in report.warnings:
        logger.warning(w)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ricci-sbm", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--workers", type=int, default=1, help="threads for per-edge curvature")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("generate", help="sample a balanced two-block SBM")
    s.add_argument("--n", type=int, required=True, help="vertices per block")
    s.add_argument("--p0", type=float, required=True)
    s.add_argument("--p1", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_generate)

    s = sub.add_parser("curvature", help="LLY curvature on every edge")
    s.add_argument("--graph", required=True)
    s.add_argument("--weights")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_curvature)

    s = sub.add_parser("iterate", help="Ricci reweighting iterates W0..WT")
    s.add_argument("--graph", required=True)
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_iterate)

    s = sub.add_parser("cluster", help="spectral sign clustering")
    s.add_argument("--graph", required=True)
    s.add_argument("--weights")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cluster)

    s = sub.add_parser("experiment", help="run a configured experiment")
    s.add_argument("kind", choices=KINDS)
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--force", action="store_true", help="run iterate outside its density window")
    s.set_defaults(func=_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - surfaced as exit code 2
        logger.error("%s: %s", type(exc).__name__, exc, exc_info=args.verbose)
        return 2


if __name__ == "__main__":
    sys.exit(main())
