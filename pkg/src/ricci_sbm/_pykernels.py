"""Pure-Python transport and curvature kernels.

Reference implementation of the primal-dual transportation solver used by the
compiled ``_ckernels`` module. Arithmetic is generic: pass
:class:`fractions.Fraction` masses with ``eps=0`` for exact results.
"""
from __future__ import annotations

import math

import numpy as np

EPS = 1e-14
_INF = 1 << 40


def transport(supply, demand, cost, eps=EPS):
    """Min-cost transport between ``supply`` and ``demand`` with integer ``cost``.

    Returns ``(total_cost, flow, pot_supply, pot_demand, leftover)``. The
    potentials satisfy ``pot_demand[j] - pot_supply[i] <= cost[i][j]`` with
    equality wherever ``flow[i][j] > 0``.
    """
    P, Q = len(supply), len(demand)
    C = [[int(c) for c in row] for row in cost]
    if any(c < 0 for row in C for c in row):
        raise ValueError("costs must be nonnegative")
    cmax = max((c for row in C for c in row), default=0)
    zero = supply[0] * 0 if P else 0
    rs = list(supply)
    rd = list(demand)
    F = [[zero] * Q for _ in range(P)]
    ps = [0] * P
    pd = [0] * Q

    def rcost(i, j):
        return C[i][j] + ps[i] - pd[j]

    while True:
        dstar, ds, dd = _dial(P, Q, cmax, rs, rd, F, rcost, eps)
        if dstar is None:
            break
        for i in range(P):
            ps[i] += min(ds[i], dstar)
        for j in range(Q):
            pd[j] += min(dd[j], dstar)
        while True:
            lt, lev_s, lev_d = _levels(P, Q, rs, rd, F, rcost, eps)
            if lt < 0:
                break
            it_s = [0] * P
            it_d = [0] * Q
            for i in range(P):
                if lev_s[i] != 0:
                    continue
                while rs[i] > eps:
                    pushed = _push_supply(i, rs[i], lt, P, Q, rd, F, lev_s, lev_d, it_s, it_d, rcost, eps)
                    if not pushed > 0:
                        break
                    rs[i] -= pushed
    total = sum((F[i][j] * C[i][j] for i in range(P) for j in range(Q)), zero)
    leftover = sum((r for r in rs if r > 0), zero)
    return total, F, ps, pd, leftover


def _dial(P, Q, cmax, rs, rd, F, rcost, eps):
    ds = [_INF] * P
    dd = [_INF] * Q
    fin_s = [False] * P
    fin_d = [False] * Q
    buckets = [[] for _ in range(cmax + 1)]
    for i in range(P):
        if rs[i] > eps:
            ds[i] = 0
            buckets[0].append(("s", i))
    for L in range(cmax + 1):
        k = 0
        bucket = buckets[L]
        while k < len(bucket):
            side, node = bucket[k]
            k += 1
            if side == "s":
                if fin_s[node] or ds[node] != L:
                    continue
                fin_s[node] = True
                for j in range(Q):
                    if fin_d[j]:
                        continue
                    nd = L + rcost(node, j)
                    if nd < dd[j] and nd <= cmax:
                        dd[j] = nd
                        buckets[nd].append(("d", j))
            else:
                if fin_d[node] or dd[node] != L:
                    continue
                fin_d[node] = True
                if rd[node] > eps:
                    return L, ds, dd
                for i in range(P):
                    if not fin_s[i] and F[i][node] > eps and ds[i] > L:
                        ds[i] = L
                        bucket.append(("s", i))
    return None, ds, dd


def _levels(P, Q, rs, rd, F, rcost, eps):
    lev_s = [-1] * P
    lev_d = [-1] * Q
    queue = [("s", i) for i in range(P) if rs[i] > eps]
    for _, i in queue:
        lev_s[i] = 0
    lt = -1
    head = 0
    while head < len(queue):
        side, node = queue[head]
        head += 1
        if side == "s":
            lev = lev_s[node] + 1
            if 0 <= lt < lev:
                break
            for j in range(Q):
                if lev_d[j] < 0 and rcost(node, j) == 0:
                    lev_d[j] = lev
                    if rd[j] > eps:
                        lt = lev
                    queue.append(("d", j))
        else:
            lev = lev_d[node] + 1
            if 0 <= lt < lev:
                break
            for i in range(P):
                if lev_s[i] < 0 and F[i][node] > eps and rcost(i, node) == 0:
                    lev_s[i] = lev
                    queue.append(("s", i))
    return lt, lev_s, lev_d


def _push_supply(i, cap, lt, P, Q, rd, F, lev_s, lev_d, it_s, it_d, rcost, eps):
    nxt = lev_s[i] + 1
    while it_s[i] < Q:
        j = it_s[i]
        if lev_d[j] == nxt and rcost(i, j) == 0:
            pushed = _push_demand(j, cap, lt, P, Q, rd, F, lev_s, lev_d, it_s, it_d, rcost, eps)
            if pushed > 0:
                F[i][j] += pushed
                return pushed
        it_s[i] += 1
    return 0


def _push_demand(j, cap, lt, P, Q, rd, F, lev_s, lev_d, it_s, it_d, rcost, eps):
    if lev_d[j] == lt:
        if rd[j] > eps:
            amt = min(cap, rd[j])
            rd[j] -= amt
            return amt
        return 0
    nxt = lev_d[j] + 1
    while it_d[j] < P:
        i = it_d[j]
        f = F[i][j]
        if lev_s[i] == nxt and f > eps and rcost(i, j) == 0:
            pushed = _push_supply(i, min(cap, f), lt, P, Q, rd, F, lev_s, lev_d, it_s, it_d, rcost, eps)
            if pushed > 0:
                F[i][j] -= pushed
                return pushed
        it_d[j] += 1
    return 0


def _signed_lazy_difference(indptr, indices, csr_weights, wdeg, x, y, alpha):
    beta = 1 - alpha
    mass = {x: alpha, y: -alpha}
    for k in range(indptr[x], indptr[x + 1]):
        v = int(indices[k])
        mass[v] = mass.get(v, 0) + beta * csr_weights[k] / wdeg[x]
    for k in range(indptr[y], indptr[y + 1]):
        v = int(indices[k])
        mass[v] = mass.get(v, 0) - beta * csr_weights[k] / wdeg[y]
    return mass


def edge_wasserstein(indptr, indices, csr_weights, wdeg, dist, x, y, alpha, eps=EPS):
    """W1 between the alpha-lazy measures at the ends of edge (x, y).

    Only the signed difference of the two measures is transported; shared mass
    cancels without cost.
    """
    tiny = 1e-15 if eps else 0
    mass = _signed_lazy_difference(indptr, indices, csr_weights, wdeg, x, y, alpha)
    pos = [(v, m) for v, m in mass.items() if m > tiny]
    neg = [(v, -m) for v, m in mass.items() if m < -tiny]
    if not pos or not neg:
        return alpha * 0
    cost = [[int(dist[u][v]) for v, _ in neg] for u, _ in pos]
    total, _, _, _, left = transport([m for _, m in pos], [m for _, m in neg], cost, eps)
    if eps and left >= 1e-10:
        raise RuntimeError(f"transport for edge ({x}, {y}) left unshipped mass")
    return total


def lly_edges(indptr, indices, csr_weights, wdeg, dist, eu, ev, tol, max_k,
              out_value, out_probes, out_converged, out_hprev):
    """Batch LLY extraction; same contract as ``_ckernels.lly_edges``."""
    for e in range(len(eu)):
        x, y = int(eu[e]), int(ev[e])
        h = hprev = 0.0
        out_converged[e] = 0
        for k in range(1, max_k + 1):
            beta = math.ldexp(1.0, -k)
            alpha = 1.0 - beta
            w1 = edge_wasserstein(indptr, indices, csr_weights, wdeg, dist, x, y, alpha)
            hprev, h = h, (1.0 - w1) / beta
            out_probes[e] = k
            if k >= 2 and abs(h - hprev) <= tol:
                out_converged[e] = 1
                break
        out_value[e] = h
        out_hprev[e] = hprev


def as_arrays(*arrays):
    return tuple(np.ascontiguousarray(a) for a in arrays)
