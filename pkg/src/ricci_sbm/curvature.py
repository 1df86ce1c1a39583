"""Lazy random-walk measures, Ollivier and Lin-Lu-Yau curvature on edges.

Weights change the random walk, never the metric: every transport cost is the
unweighted graph distance. Curvature is only defined on edges here.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _backend
from ._io import fmt, write_csv
from .graph import Graph, GraphError, Labels
from .transport import SparseMeasure

__all__ = [
    "CurvatureError",
    "CurvatureValue",
    "OverlapStats",
    "curvature_all_edges",
    "dump_curvature_csv",
    "kappa_alpha",
    "lazy_measure",
    "lly_curvature",
    "overlap_stats",
    "probe_alpha",
    "unit_weights",
]

logger = logging.getLogger(__name__)

#: Consecutive-probe agreement required to accept an LLY value.
EXTRACTION_TOL = 1e-9
#: Largest probe exponent k (alpha_k = 1 - 2**-k).
MAX_PROBES = 40


class CurvatureError(ValueError):
    """Curvature requested where it is undefined, or extraction failed."""


def unit_weights(g: Graph) -> np.ndarray:
    return np.ones(g.n_edges)


def probe_alpha(k: int) -> float:
    return 1.0 - math.ldexp(1.0, -k)


def _check_weights(g: Graph, w) -> np.ndarray:
    w = unit_weights(g) if w is None else np.asarray(w, dtype=np.float64)
    if w.shape != (g.n_edges,):
        raise CurvatureError(f"weights have shape {w.shape}, expected ({g.n_edges},)")
    if not np.isfinite(w).all() or (w < 0).any():
        bad = np.flatnonzero(~np.isfinite(w) | (w < 0))
        raise CurvatureError(f"weights must be finite and nonnegative; bad edge indices {bad[:10].tolist()}")
    return w


def _check_degree(wdeg: np.ndarray, v: int) -> None:
    if not wdeg[v] > 0:
        raise CurvatureError(f"vertex {v} is isolated under the given weights (weighted degree {wdeg[v]})")


def lazy_measure(g: Graph, w, x: int, alpha, exact: bool = False) -> SparseMeasure:
    """``alpha * delta_x + (1 - alpha) * sum_u (w_xu / d_x(w)) delta_u``."""
    if not 0 <= alpha < 1:
        raise CurvatureError(f"alpha must lie in [0, 1), got {alpha}")
    w = _check_weights(g, w)
    nbrs = g.neighbors(x)
    slots = range(g.indptr[x], g.indptr[x + 1])
    if exact:
        alpha = Fraction(alpha)
        ws = [Fraction(float(w[g.csr_edge[k]])) for k in slots]
    else:
        ws = [float(w[g.csr_edge[k]]) for k in slots]
    total = sum(ws)
    if not total > 0:
        raise CurvatureError(f"vertex {x} is isolated under the given weights")
    atoms = {x: alpha}
    for u, wu in zip(nbrs, ws):
        atoms[int(u)] = atoms.get(int(u), 0) + (1 - alpha) * wu / total
    return SparseMeasure(atoms)


def _edge_arrays(g: Graph, w):
    w = _check_weights(g, w)
    return g.csr_weights(w), g.weighted_degrees(w)


def kappa_alpha(g: Graph, w, x: int, y: int, alpha, exact: bool = False):
    """alpha-Ollivier curvature ``1 - W1(m_x^alpha, m_y^alpha)`` of edge ``{x, y}``.

    With ``exact=True`` the computation runs in rational arithmetic and
    returns a :class:`~fractions.Fraction`.
    """
    if not g.has_edge(x, y):
        raise CurvatureError(f"({x}, {y}) is not an edge; curvature is only evaluated on edges")
    if not 0 <= alpha < 1:
        raise CurvatureError(f"alpha must lie in [0, 1), got {alpha}")
    x, y = min(x, y), max(x, y)
    cw, wdeg = _edge_arrays(g, w)
    _check_degree(wdeg, x)
    _check_degree(wdeg, y)
    dist = g.two_hop_distances
    if exact:
        fcw = [Fraction(float(c)) for c in cw]
        fdeg = [Fraction(0)] * g.n_vertices
        for v in (x, y):
            fdeg[v] = sum(fcw[g.indptr[v]:g.indptr[v + 1]], Fraction(0))
        w1 = _backend.pure.edge_wasserstein(g.indptr, g.indices, fcw, fdeg, dist, x, y,
                                            Fraction(alpha), eps=0)
        return 1 - w1
    w1 = _backend.kernels.edge_wasserstein(g.indptr, g.indices, cw, wdeg, dist, x, y, float(alpha))
    return 1.0 - w1


@dataclass(frozen=True)
class CurvatureValue:
    """LLY curvature with its probe history.

    ``probes[k-1]`` is ``h(alpha_k) = kappa_alpha / (1 - alpha)`` at
    ``alpha_k = alpha_used[k-1]``.
    """

    value: float
    alpha_used: tuple
    probes: tuple
    converged: bool


def lly_curvature(g: Graph, w, x: int, y: int, *, tol: float = EXTRACTION_TOL,
                  max_k: int = MAX_PROBES, exact: bool = False) -> CurvatureValue:
    """Lin-Lu-Yau curvature by probing ``h(alpha) = kappa_alpha / (1 - alpha)``.

    Probes ``alpha_k = 1 - 2**-k`` for ``k = 1, 2, ...`` and stops once two
    consecutive values agree within ``tol``. ``h`` is nondecreasing in alpha
    and constant past the last breakpoint of the piecewise-linear value
    function, so agreement pins the limit. A result with ``converged=False`` is
    returned rather than raised when the cap is hit.
    """
    alphas, hs = [], []
    for k in range(1, max_k + 1):
        if exact:
            alpha = 1 - Fraction(1, 2 ** k)
        else:
            alpha = probe_alpha(k)
        h = kappa_alpha(g, w, x, y, alpha, exact=exact) / (1 - alpha)
        alphas.append(alpha)
        hs.append(h)
        if k >= 2 and abs(hs[-1] - hs[-2]) <= tol:
            return CurvatureValue(hs[-1], tuple(alphas), tuple(hs), True)
    return CurvatureValue(hs[-1], tuple(alphas), tuple(hs), False)


def curvature_all_edges(g: Graph, w=None, *, tol: float = EXTRACTION_TOL, max_k: int = MAX_PROBES,
                        edges=None, workers: int = 1, kernels=None) -> np.ndarray:
    """LLY curvature on every edge (or the given edge indices) under weights ``w``.

    Each edge is computed independently, so the result does not depend on
    ``workers`` or chunking.

    Returns
    -------
    numpy.ndarray
        Values aligned to ``edges`` (default: the canonical edge index).

    Raises
    ------
    CurvatureError
        On zero weighted degree at an edge endpoint, or when extraction fails
        to converge on any edge (all failing indices are listed).
    """
    kern = kernels or _backend.kernels
    cw, wdeg = _edge_arrays(g, w)
    idx = np.arange(g.n_edges) if edges is None else np.asarray(edges, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= g.n_edges):
        raise GraphError("edge index out of range")
    eu = np.ascontiguousarray(g.edges[idx, 0])
    ev = np.ascontiguousarray(g.edges[idx, 1])
    ends = np.union1d(eu, ev)
    zero = ends[~(wdeg[ends] > 0)]
    if zero.size:
        raise CurvatureError(f"vertex {int(zero[0])} is isolated under the given weights")
    m = idx.size
    value = np.zeros(m)
    hprev = np.zeros(m)
    probes = np.zeros(m, dtype=np.int32)
    conv = np.zeros(m, dtype=np.int8)
    dist = g.two_hop_distances

    def run(lo, hi):
        kern.lly_edges(g.indptr, g.indices, cw, wdeg, dist, eu[lo:hi], ev[lo:hi], tol, max_k,
                       value[lo:hi], probes[lo:hi], conv[lo:hi], hprev[lo:hi])

    if workers <= 1 or m < 2 * workers:
        run(0, m)
    else:
        bounds = np.linspace(0, m, 4 * workers + 1).astype(int)
        with ThreadPoolExecutor(workers) as pool:
            for fut in [pool.submit(run, a, b) for a, b in zip(bounds[:-1], bounds[1:])]:
                fut.result()
    failed = np.flatnonzero(conv == 0)
    if failed.size:
        raise CurvatureError(
            f"LLY extraction did not converge on {failed.size} edges: {idx[failed][:20].tolist()}")
    return value


@dataclass(frozen=True)
class OverlapStats:
    overlap: float
    p_max: float
    deg_mismatch: float
    imbalance: int | None = None


def overlap_stats(g: Graph, w, labels: Labels | None, x: int, y: int) -> OverlapStats:
    """Overlap functional, largest neighbor probability and degree mismatch.

    ``overlap = p_x(y) + p_y(x) + sum_{z common} min(p_x(z), p_y(z))`` is an
    upper bound on the weighted LLY curvature of the edge.
    """
    if not g.has_edge(x, y):
        raise CurvatureError(f"({x}, {y}) is not an edge")
    w = _check_weights(g, w)
    dx, dy = {}, {}
    for v, store in ((x, dx), (y, dy)):
        for k in range(g.indptr[v], g.indptr[v + 1]):
            store[int(g.indices[k])] = float(w[g.csr_edge[k]])
    tx, ty = sum(dx.values()), sum(dy.values())
    if not (tx > 0 and ty > 0):
        raise CurvatureError(f"edge ({x}, {y}) has an endpoint isolated under the given weights")
    px = {u: v / tx for u, v in dx.items()}
    py = {u: v / ty for u, v in dy.items()}
    ov = px[y] + py[x] + sum(min(px[z], py[z]) for z in px.keys() & py.keys())
    p_max = max(max(px.values()), max(py.values()))
    mismatch = abs(tx - ty) / min(tx, ty)
    imbalance = None
    if labels is not None:
        from .graph import pair_stats

        imbalance = pair_stats(g, labels, x, y).imbalance_total
    return OverlapStats(ov, p_max, mismatch, imbalance)


def dump_curvature_csv(path, g: Graph, kappa: np.ndarray, labels: Labels | None = None,
                       edges=None) -> None:
    """Write ``edge_index,u,v,kappa,within_block`` rows."""
    idx = np.arange(g.n_edges) if edges is None else np.asarray(edges)
    within = labels.within_mask(g) if labels is not None else None
    rows = []
    for e, k in zip(idx, kappa):
        u, v = g.edges[e]
        tag = "na" if within is None else str(int(within[e]))
        rows.append((int(e), int(u), int(v), fmt(k), tag))
    write_csv(path, ("edge_index", "u", "v", "kappa", "within_block"), rows)
