"""Immutable simple graphs and the neighborhood combinatorics used by curvature.

Vertices are ``0..n_vertices-1``. Adjacency is stored in CSR form (``indptr``,
``indices``) with sorted neighbor lists, and every unordered edge ``{u, v}``
with ``u < v`` has a canonical index given by lexicographic order. Edge weight
vectors throughout the package are aligned to that index.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "BEYOND_CAP",
    "Graph",
    "GraphError",
    "HallResult",
    "Labels",
    "PairStats",
    "build_graph",
    "hall_matching_check",
    "hopcroft_karp",
    "load_graph_json",
    "pair_stats",
    "save_graph_json",
    "truncated_distance",
]

#: Sentinel returned by :func:`truncated_distance` when the distance exceeds the cap.
BEYOND_CAP = -1


class GraphError(ValueError):
    """Invalid graph construction or query."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph in compressed sparse row form.

    Use :func:`build_graph` rather than the constructor; it validates input
    and assigns the canonical edge index.
    """

    n_vertices: int
    indptr: np.ndarray
    indices: np.ndarray
    edges: np.ndarray  # (|E|, 2) int64, rows (u, v) with u < v, lexicographic
    csr_edge: np.ndarray  # edge index of every CSR slot
    _lookup: dict = field(repr=False)

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        self._check_vertex(v)
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        self._check_vertex(v)
        return int(self.indptr[v + 1] - self.indptr[v])

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._lookup

    def edge_index(self, u: int, v: int) -> int:
        """Canonical index of edge ``{u, v}``; raises if absent."""
        try:
            return self._lookup[(min(u, v), max(u, v))]
        except KeyError:
            raise GraphError(f"({u}, {v}) is not an edge") from None

    def adjacency_dense(self, weights: np.ndarray | None = None) -> np.ndarray:
        """Dense symmetric (weighted) adjacency matrix."""
        n = self.n_vertices
        mat = np.zeros((n, n))
        w = np.ones(self.n_edges) if weights is None else np.asarray(weights, dtype=float)
        u, v = self.edges[:, 0], self.edges[:, 1]
        mat[u, v] = w
        mat[v, u] = w
        return mat

    def csr_weights(self, weights: np.ndarray) -> np.ndarray:
        """Expand an edge-indexed weight vector to one value per CSR slot."""
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape != (self.n_edges,):
            raise GraphError(f"weight vector has shape {weights.shape}, expected ({self.n_edges},)")
        return weights[self.csr_edge]

    def weighted_degrees(self, weights: np.ndarray | None = None) -> np.ndarray:
        if weights is None:
            return self.degrees.astype(float)
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (self.n_edges,):
            raise GraphError(f"weight vector has shape {w.shape}, expected ({self.n_edges},)")
        n = self.n_vertices
        return (np.bincount(self.edges[:, 0], weights=w, minlength=n)
                + np.bincount(self.edges[:, 1], weights=w, minlength=n))

    @cached_property
    def two_hop_distances(self) -> np.ndarray:
        """All-pairs distance truncated at 3, as an ``int8`` matrix.

        Entries are 0 on the diagonal, 1 for adjacent pairs, 2 for pairs with a
        common neighbor and 3 otherwise. The value 3 is the exact distance for
        every pair inside ``Gamma(x) | Gamma(y)`` of an edge ``{x, y}`` (path
        s-x-y-t), which is all curvature ever needs; elsewhere 3 means ">= 3".
        """
        n = self.n_vertices
        adj = np.zeros((n, n), dtype=np.float32)
        u, v = self.edges[:, 0], self.edges[:, 1]
        adj[u, v] = 1.0
        adj[v, u] = 1.0
        common = adj @ adj
        dist = np.full((n, n), 3, dtype=np.int8)
        dist[common > 0.5] = 2
        dist[adj > 0.5] = 1
        np.fill_diagonal(dist, 0)
        return dist

    def _check_vertex(self, v: int) -> None:
        if not 0 <= v < self.n_vertices:
            raise GraphError(f"vertex {v} out of range [0, {self.n_vertices})")


@dataclass(frozen=True)
class Labels:
    """Two-block assignment; ``assignment[v]`` is 1 or 2."""

    assignment: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.ndim != 1 or not np.isin(a, (1, 2)).all():
            raise GraphError("labels must be a 1-d sequence of values in {1, 2}")
        object.__setattr__(self, "assignment", a)

    @classmethod
    def balanced(cls, n: int) -> "Labels":
        return cls(np.repeat([1, 2], n))

    @property
    def block_sizes(self) -> tuple[int, int]:
        return int((self.assignment == 1).sum()), int((self.assignment == 2).sum())

    def __len__(self) -> int:
        return len(self.assignment)

    def __getitem__(self, v):
        return self.assignment[v]

    def within_mask(self, g: Graph) -> np.ndarray:
        """Boolean vector over edges: True where both endpoints share a block."""
        return self.assignment[g.edges[:, 0]] == self.assignment[g.edges[:, 1]]


def build_graph(n_vertices: int, edges: Iterable[Sequence[int]]) -> Graph:
    """Build a :class:`Graph`, deduplicating edges and sorting adjacency.

    Raises
    ------
    GraphError
        On a self-loop or an out-of-range endpoint; the message names the pair.
    """
    n_vertices = int(n_vertices)
    if n_vertices < 0:
        raise GraphError("n_vertices must be nonnegative")
    arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GraphError("edges must be a sequence of (u, v) pairs")
    bad = (arr < 0) | (arr >= n_vertices)
    if bad.any():
        u, v = arr[np.flatnonzero(bad.any(axis=1))[0]]
        raise GraphError(f"edge ({u}, {v}) has an endpoint outside [0, {n_vertices})")
    loops = arr[:, 0] == arr[:, 1]
    if loops.any():
        u, v = arr[np.flatnonzero(loops)[0]]
        raise GraphError(f"self-loop ({u}, {v}) is not allowed")

    canon = np.unique(np.sort(arr, axis=1), axis=0)
    m = canon.shape[0]
    # both orientations, sorted by (source, target) -> CSR with sorted neighbor lists
    src = np.concatenate([canon[:, 0], canon[:, 1]])
    dst = np.concatenate([canon[:, 1], canon[:, 0]])
    eid = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((dst, src))
    src, dst, eid = src[order], dst[order], eid[order]
    indptr = np.zeros(n_vertices + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n_vertices), out=indptr[1:])
    lookup = {(int(u), int(v)): i for i, (u, v) in enumerate(canon)}
    for a in (indptr, dst, canon, eid):
        a.flags.writeable = False
    return Graph(n_vertices, indptr, dst, canon, eid, lookup)


def truncated_distance(g: Graph, u: int, v: int, cap: int = 3) -> int:
    """Shortest-path distance from ``u`` to ``v`` by BFS truncated at depth ``cap``.

    Returns :data:`BEYOND_CAP` when ``v`` is not reached within ``cap`` steps.
    """
    g._check_vertex(u)
    g._check_vertex(v)
    if cap < 1:
        raise GraphError("cap must be >= 1")
    if u == v:
        return 0
    seen = {u}
    frontier = [u]
    for depth in range(1, cap + 1):
        nxt = []
        for w in frontier:
            for z in g.neighbors(w):
                z = int(z)
                if z == v:
                    return depth
                if z not in seen:
                    seen.add(z)
                    nxt.append(z)
        if not nxt:
            break
        frontier = nxt
    return BEYOND_CAP


def bfs_distances(g: Graph, source: int, cap: int | None = None) -> dict[int, int]:
    """Distances from ``source`` to every vertex reached within ``cap`` steps."""
    g._check_vertex(source)
    dist = {source: 0}
    queue = deque([source])
    while queue:
        w = queue.popleft()
        if cap is not None and dist[w] >= cap:
            continue
        for z in g.neighbors(w):
            z = int(z)
            if z not in dist:
                dist[z] = dist[w] + 1
                queue.append(z)
    return dist


@dataclass(frozen=True)
class PairStats:
    """Neighborhood combinatorics of an ordered vertex pair ``(x, y)``.

    ``exclusive_x`` is ``Gamma(x) \\ (Gamma(y) | {y})`` and symmetrically for y.
    The type split is relative to each endpoint's own block: ``u_in`` are the
    exclusive neighbors of x in x's block, ``v_in`` those of y in y's block.
    """

    deg_x: int
    deg_y: int
    codeg: int
    exclusive_x: frozenset
    exclusive_y: frozenset
    u_in: frozenset | None = None
    u_out: frozenset | None = None
    v_in: frozenset | None = None
    v_out: frozenset | None = None

    @property
    def imbalance_in(self) -> int | None:
        if self.u_in is None:
            return None
        return abs(len(self.u_in) - len(self.v_in))

    @property
    def imbalance_out(self) -> int | None:
        if self.u_out is None:
            return None
        return abs(len(self.u_out) - len(self.v_out))

    @property
    def imbalance_total(self) -> int | None:
        if self.u_in is None:
            return None
        return self.imbalance_in + self.imbalance_out


def pair_stats(g: Graph, labels: Labels | None, x: int, y: int) -> PairStats:
    if x == y:
        raise GraphError("pair_stats needs distinct vertices")
    gx = set(map(int, g.neighbors(x)))
    gy = set(map(int, g.neighbors(y)))
    ux = frozenset(gx - gy - {y})
    uy = frozenset(gy - gx - {x})
    stats = dict(deg_x=len(gx), deg_y=len(gy), codeg=len(gx & gy), exclusive_x=ux, exclusive_y=uy)
    if labels is not None:
        lab = labels.assignment
        bx, by = lab[x], lab[y]
        stats.update(
            u_in=frozenset(u for u in ux if lab[u] == bx),
            u_out=frozenset(u for u in ux if lab[u] != bx),
            v_in=frozenset(v for v in uy if lab[v] == by),
            v_out=frozenset(v for v in uy if lab[v] != by),
        )
    return PairStats(**stats)


def hopcroft_karp(adj: Sequence[Sequence[int]], n_right: int) -> list[int]:
    """Maximum bipartite matching.

    Parameters
    ----------
    adj : sequence of sequences
        ``adj[i]`` lists the right-vertex indices adjacent to left vertex ``i``.
    n_right : int
        Number of right vertices.

    Returns
    -------
    list of int
        ``match[i]`` is the right partner of left vertex ``i`` or -1.
    """
    n_left = len(adj)
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    inf = n_left + 1
    dist = [0] * n_left

    def bfs() -> bool:
        queue = deque()
        for i in range(n_left):
            if match_l[i] == -1:
                dist[i] = 0
                queue.append(i)
            else:
                dist[i] = inf
        found = False
        while queue:
            i = queue.popleft()
            for j in adj[i]:
                k = match_r[j]
                if k == -1:
                    found = True
                elif dist[k] == inf:
                    dist[k] = dist[i] + 1
                    queue.append(k)
        return found

    def dfs(i: int) -> bool:
        # iterative DFS along the layered graph; avoids recursion limits
        stack = [(i, iter(adj[i]))]
        path = []
        while stack:
            node, it = stack[-1]
            advanced = False
            for j in it:
                k = match_r[j]
                if k == -1:
                    path.append((node, j))
                    for a, b in path:
                        match_l[a] = b
                        match_r[b] = a
                    return True
                if dist[k] == dist[node] + 1:
                    path.append((node, j))
                    stack.append((k, iter(adj[k])))
                    advanced = True
                    break
            if not advanced:
                dist[node] = inf
                stack.pop()
                if path:
                    path.pop()
        return False

    while bfs():
        for i in range(n_left):
            if match_l[i] == -1:
                dfs(i)
    return match_l


@dataclass(frozen=True)
class HallResult:
    saturating_matching: bool
    matching: list[tuple[int, int]]


def hall_matching_check(g: Graph, left: Iterable[int], right: Iterable[int]) -> HallResult:
    """Does the bipartite graph ``g[left x right]`` saturate its smaller side?"""
    left = sorted(set(map(int, left)))
    right = sorted(set(map(int, right)))
    overlap = set(left) & set(right)
    if overlap:
        raise GraphError(f"left and right sides overlap at {sorted(overlap)}")
    r_index = {v: j for j, v in enumerate(right)}
    adj = [[r_index[int(z)] for z in g.neighbors(u) if int(z) in r_index] for u in left]
    match = hopcroft_karp(adj, len(right))
    pairs = [(left[i], right[j]) for i, j in enumerate(match) if j >= 0]
    return HallResult(len(pairs) == min(len(left), len(right)), pairs)


def save_graph_json(path, g: Graph, labels: Labels | None = None) -> None:
    from ._io import atomic_write_text

    doc = {"n_vertices": g.n_vertices, "edges": g.edges.tolist()}
    if labels is not None:
        doc["labels"] = labels.assignment.tolist()
    atomic_write_text(path, json.dumps(doc))


def load_graph_json(path) -> tuple[Graph, Labels | None]:
    doc = json.loads(Path(path).read_text())
    g = build_graph(doc["n_vertices"], doc["edges"])
    labels = Labels(doc["labels"]) if doc.get("labels") is not None else None
    if labels is not None and len(labels) != g.n_vertices:
        raise GraphError(f"{len(labels)} labels for {g.n_vertices} vertices")
    return g, labels
