# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled transport and curvature kernels.

Exact min-cost transportation with small integer costs by the primal-dual
method: Dial shortest paths on reduced costs give integer potentials, then a
Dinic blocking flow saturates the zero-reduced-cost subgraph. Every phase
raises the shortest augmenting-path cost by at least one, so the number of
phases is bounded by the largest cost (3 for curvature workloads).

Mirrors ``_pykernels`` exactly; that module is the reference.
"""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memset
from libc.math cimport ldexp

cnp.import_array()

cdef long long INF = 1099511627776

cdef double EPS = 1e-14


cdef struct Work:
    Py_ssize_t cap_p, cap_q, cap_pq, cap_b
    double* F
    int* C
    double* rs
    double* rd
    long long* ps
    long long* pd
    long long* ds
    long long* dd
    int* lev_s
    int* lev_d
    int* it_s
    int* it_d
    char* fin_s
    char* fin_d
    int* queue
    int* bucket
    int* bucket_len
    # curvature scratch
    double* mass
    int* pos_v
    int* neg_v


cdef int work_reserve(Work* w, Py_ssize_t P, Py_ssize_t Q, int cmax) nogil:
    cdef Py_ssize_t V = P + Q
    cdef void* tmp
    if P > w.cap_p:
        w.rs = <double*>realloc(w.rs, P * sizeof(double))
        w.ps = <long long*>realloc(w.ps, P * sizeof(long long))
        w.ds = <long long*>realloc(w.ds, P * sizeof(long long))
        w.lev_s = <int*>realloc(w.lev_s, P * sizeof(int))
        w.it_s = <int*>realloc(w.it_s, P * sizeof(int))
        w.fin_s = <char*>realloc(w.fin_s, P * sizeof(char))
        w.cap_p = P
    if Q > w.cap_q:
        w.rd = <double*>realloc(w.rd, Q * sizeof(double))
        w.pd = <long long*>realloc(w.pd, Q * sizeof(long long))
        w.dd = <long long*>realloc(w.dd, Q * sizeof(long long))
        w.lev_d = <int*>realloc(w.lev_d, Q * sizeof(int))
        w.it_d = <int*>realloc(w.it_d, Q * sizeof(int))
        w.fin_d = <char*>realloc(w.fin_d, Q * sizeof(char))
        w.cap_q = Q
    if P * Q > w.cap_pq:
        w.F = <double*>realloc(w.F, P * Q * sizeof(double))
        w.C = <int*>realloc(w.C, P * Q * sizeof(int))
        w.cap_pq = P * Q
    if V * (cmax + 1) > w.cap_b:
        w.bucket = <int*>realloc(w.bucket, V * (cmax + 1) * sizeof(int))
        w.queue = <int*>realloc(w.queue, V * sizeof(int))
        w.cap_b = V * (cmax + 1)
    w.bucket_len = <int*>realloc(w.bucket_len, (cmax + 1) * sizeof(int))
    if (w.rs == NULL or w.rd == NULL or w.F == NULL or w.C == NULL or w.bucket == NULL
            or w.bucket_len == NULL or w.queue == NULL):
        return -1
    return 0


cdef void work_free(Work* w) nogil:
    free(w.F); free(w.C); free(w.rs); free(w.rd); free(w.ps); free(w.pd)
    free(w.ds); free(w.dd); free(w.lev_s); free(w.lev_d); free(w.it_s); free(w.it_d)
    free(w.fin_s); free(w.fin_d); free(w.queue); free(w.bucket); free(w.bucket_len)
    free(w.mass); free(w.pos_v); free(w.neg_v)


cdef inline long long rc(Work* w, int Q, int i, int j) nogil:
    return w.C[i * Q + j] + w.ps[i] - w.pd[j]


cdef long long dial(Work* w, int P, int Q, int cmax) nogil:
    """Shortest reduced-cost distances from open sources; returns D* (or INF)."""
    cdef int i, j, L, k, node, nb
    cdef long long nd
    cdef int V = P + Q
    for i in range(P):
        w.fin_s[i] = 0
        w.ds[i] = INF
    for j in range(Q):
        w.fin_d[j] = 0
        w.dd[j] = INF
    for k in range(cmax + 1):
        w.bucket_len[k] = 0
    for i in range(P):
        if w.rs[i] > EPS:
            w.ds[i] = 0
            w.bucket[w.bucket_len[0]] = i
            w.bucket_len[0] += 1
    for L in range(cmax + 1):
        k = 0
        while k < w.bucket_len[L]:
            node = w.bucket[L * V + k]
            k += 1
            if node < P:
                i = node
                if w.fin_s[i] or w.ds[i] != L:
                    continue
                w.fin_s[i] = 1
                for j in range(Q):
                    if w.fin_d[j]:
                        continue
                    nd = L + rc(w, Q, i, j)
                    if nd < w.dd[j] and nd <= cmax:
                        w.dd[j] = nd
                        nb = <int>nd
                        w.bucket[nb * V + w.bucket_len[nb]] = P + j
                        w.bucket_len[nb] += 1
            else:
                j = node - P
                if w.fin_d[j] or w.dd[j] != L:
                    continue
                w.fin_d[j] = 1
                if w.rd[j] > EPS:
                    return L
                for i in range(P):
                    if not w.fin_s[i] and w.F[i * Q + j] > EPS and w.ds[i] > L:
                        w.ds[i] = L
                        w.bucket[L * V + w.bucket_len[L]] = i
                        w.bucket_len[L] += 1
    return INF


cdef int bfs_levels(Work* w, int P, int Q) nogil:
    """Dinic levels on the admissible graph; returns sink level or -1."""
    cdef int head = 0, tail = 0, node, i, j, lt = -1, lev
    for i in range(P):
        w.lev_s[i] = -1
    for j in range(Q):
        w.lev_d[j] = -1
    for i in range(P):
        if w.rs[i] > EPS:
            w.lev_s[i] = 0
            w.queue[tail] = i
            tail += 1
    while head < tail:
        node = w.queue[head]
        head += 1
        if node < P:
            i = node
            lev = w.lev_s[i] + 1
            if lt >= 0 and lev > lt:
                break
            for j in range(Q):
                if w.lev_d[j] < 0 and rc(w, Q, i, j) == 0:
                    w.lev_d[j] = lev
                    if w.rd[j] > EPS:
                        lt = lev
                    w.queue[tail] = P + j
                    tail += 1
        else:
            j = node - P
            lev = w.lev_d[j] + 1
            if lt >= 0 and lev > lt:
                break
            for i in range(P):
                if w.lev_s[i] < 0 and w.F[i * Q + j] > EPS and rc(w, Q, i, j) == 0:
                    w.lev_s[i] = lev
                    w.queue[tail] = i
                    tail += 1
    return lt


cdef double dfs_supply(Work* w, int P, int Q, int i, double cap, int lt) nogil:
    cdef int j
    cdef double pushed
    cdef int nxt = w.lev_s[i] + 1
    while w.it_s[i] < Q:
        j = w.it_s[i]
        if w.lev_d[j] == nxt and rc(w, Q, i, j) == 0:
            pushed = dfs_demand(w, P, Q, j, cap, lt)
            if pushed > 0:
                w.F[i * Q + j] += pushed
                return pushed
        w.it_s[i] += 1
    return 0.0


cdef double dfs_demand(Work* w, int P, int Q, int j, double cap, int lt) nogil:
    cdef int i
    cdef double pushed, amt, f
    cdef int nxt
    if w.lev_d[j] == lt:
        if w.rd[j] > EPS:
            amt = cap if cap < w.rd[j] else w.rd[j]
            w.rd[j] -= amt
            return amt
        return 0.0
    nxt = w.lev_d[j] + 1
    while w.it_d[j] < P:
        i = w.it_d[j]
        f = w.F[i * Q + j]
        if w.lev_s[i] == nxt and f > EPS and rc(w, Q, i, j) == 0:
            pushed = dfs_supply(w, P, Q, i, cap if cap < f else f, lt)
            if pushed > 0:
                w.F[i * Q + j] -= pushed
                return pushed
        w.it_d[j] += 1
    return 0.0


cdef double solve(Work* w, int P, int Q, int cmax, double* leftover) nogil:
    """Transport w.rs -> w.rd under costs w.C; flow left in w.F, duals in ps/pd."""
    cdef int i, j, lt
    cdef long long dstar, d
    cdef double pushed, cost = 0.0, left = 0.0
    memset(w.F, 0, P * Q * sizeof(double))
    for i in range(P):
        w.ps[i] = 0
    for j in range(Q):
        w.pd[j] = 0
    while True:
        dstar = dial(w, P, Q, cmax)
        if dstar >= INF:
            break
        for i in range(P):
            d = w.ds[i]
            w.ps[i] += d if d < dstar else dstar
        for j in range(Q):
            d = w.dd[j]
            w.pd[j] += d if d < dstar else dstar
        while True:
            lt = bfs_levels(w, P, Q)
            if lt < 0:
                break
            for i in range(P):
                w.it_s[i] = 0
            for j in range(Q):
                w.it_d[j] = 0
            for i in range(P):
                if w.lev_s[i] != 0:
                    continue
                while w.rs[i] > EPS:
                    pushed = dfs_supply(w, P, Q, i, w.rs[i], lt)
                    if pushed <= 0:
                        break
                    w.rs[i] -= pushed
    for i in range(P):
        if w.rs[i] > 0:
            left += w.rs[i]
        for j in range(Q):
            cost += w.F[i * Q + j] * w.C[i * Q + j]
    leftover[0] = left
    return cost


def transport(double[::1] supply, double[::1] demand, long long[:, ::1] cost):
    """Min-cost transport; returns ``(cost, flow, pot_supply, pot_demand, leftover)``.

    Duals satisfy ``pot_demand[j] - pot_supply[i] <= cost[i, j]`` with equality
    on the support of ``flow``.
    """
    cdef int P = supply.shape[0], Q = demand.shape[0]
    cdef int i, j, cmax = 0
    cdef Work w
    cdef double total, left
    memset(&w, 0, sizeof(Work))
    for i in range(P):
        for j in range(Q):
            if cost[i, j] < 0:
                raise ValueError("costs must be nonnegative")
            if cost[i, j] > cmax:
                cmax = <int>cost[i, j]
    if work_reserve(&w, max(P, 1), max(Q, 1), cmax) != 0:
        work_free(&w)
        raise MemoryError()
    try:
        for i in range(P):
            w.rs[i] = supply[i]
            for j in range(Q):
                w.C[i * Q + j] = <int>cost[i, j]
        for j in range(Q):
            w.rd[j] = demand[j]
        with nogil:
            total = solve(&w, P, Q, cmax, &left)
        flow = np.empty((P, Q))
        ps = np.empty(P, dtype=np.int64)
        pd = np.empty(Q, dtype=np.int64)
        for i in range(P):
            ps[i] = w.ps[i]
            for j in range(Q):
                flow[i, j] = w.F[i * Q + j]
        for j in range(Q):
            pd[j] = w.pd[j]
        return total, flow, ps, pd, left
    finally:
        work_free(&w)


cdef double edge_w1(Work* w, const long long* indptr, const long long* indices,
                    const double* cw, const double* wdeg, const signed char* dist,
                    long long N, int x, int y, double alpha, int* ok) nogil:
    """W1 between the alpha-lazy measures of x and y (positive vs negative part)."""
    cdef double beta = 1.0 - alpha, m, left
    cdef long long k, v
    cdef int P = 0, Q = 0, i, j, pi
    cdef double tiny = 1e-15
    # accumulate signed mass on {x, y} | Gamma(x) | Gamma(y)
    w.mass[x] += alpha
    w.mass[y] -= alpha
    for k in range(indptr[x], indptr[x + 1]):
        w.mass[indices[k]] += beta * cw[k] / wdeg[x]
    for k in range(indptr[y], indptr[y + 1]):
        w.mass[indices[k]] -= beta * cw[k] / wdeg[y]
    # collect support; visit each touched vertex once, then clear it
    for pi in range(3):
        if pi == 0:
            v = x
            m = w.mass[v]
            w.mass[v] = 0.0
            if m > tiny:
                w.pos_v[P] = <int>v
                w.rs[P] = m
                P += 1
            elif m < -tiny:
                w.neg_v[Q] = <int>v
                w.rd[Q] = -m
                Q += 1
        elif pi == 1:
            v = y
            m = w.mass[v]
            w.mass[v] = 0.0
            if m > tiny:
                w.pos_v[P] = <int>v
                w.rs[P] = m
                P += 1
            elif m < -tiny:
                w.neg_v[Q] = <int>v
                w.rd[Q] = -m
                Q += 1
        else:
            for k in range(indptr[x], indptr[x + 1]):
                v = indices[k]
                m = w.mass[v]
                w.mass[v] = 0.0
                if m > tiny:
                    w.pos_v[P] = <int>v
                    w.rs[P] = m
                    P += 1
                elif m < -tiny:
                    w.neg_v[Q] = <int>v
                    w.rd[Q] = -m
                    Q += 1
            for k in range(indptr[y], indptr[y + 1]):
                v = indices[k]
                m = w.mass[v]
                w.mass[v] = 0.0
                if m > tiny:
                    w.pos_v[P] = <int>v
                    w.rs[P] = m
                    P += 1
                elif m < -tiny:
                    w.neg_v[Q] = <int>v
                    w.rd[Q] = -m
                    Q += 1
    if P == 0 or Q == 0:
        ok[0] = 1
        return 0.0
    for i in range(P):
        for j in range(Q):
            w.C[i * Q + j] = dist[w.pos_v[i] * N + w.neg_v[j]]
    m = solve(w, P, Q, 3, &left)
    ok[0] = 1 if left < 1e-10 else 0
    return m


cdef int reserve_edge(Work* w, long long maxdeg, long long N) nogil:
    cdef Py_ssize_t S = 2 * maxdeg + 2
    if work_reserve(w, S, S, 3) != 0:
        return -1
    w.pos_v = <int*>realloc(w.pos_v, S * sizeof(int))
    w.neg_v = <int*>realloc(w.neg_v, S * sizeof(int))
    if w.mass == NULL:
        w.mass = <double*>malloc(N * sizeof(double))
        if w.mass != NULL:
            memset(w.mass, 0, N * sizeof(double))
    if w.pos_v == NULL or w.neg_v == NULL or w.mass == NULL:
        return -1
    return 0


def edge_wasserstein(const long long[::1] indptr, const long long[::1] indices,
                     const double[::1] csr_weights, const double[::1] wdeg,
                     const signed char[:, ::1] dist, int x, int y, double alpha):
    """W1 between the alpha-lazy (weighted) measures at the ends of edge (x, y)."""
    cdef Work w
    cdef long long N = dist.shape[0]
    cdef long long maxdeg = 0, v
    cdef int ok = 0
    cdef double res
    memset(&w, 0, sizeof(Work))
    for v in range(N):
        if indptr[v + 1] - indptr[v] > maxdeg:
            maxdeg = indptr[v + 1] - indptr[v]
    if reserve_edge(&w, maxdeg, N) != 0:
        work_free(&w)
        raise MemoryError()
    try:
        with nogil:
            res = edge_w1(&w, &indptr[0], &indices[0], &csr_weights[0], &wdeg[0],
                          &dist[0, 0], N, x, y, alpha, &ok)
        if not ok:
            raise RuntimeError(f"transport for edge ({x}, {y}) left unshipped mass")
        return res
    finally:
        work_free(&w)


def lly_edges(const long long[::1] indptr, const long long[::1] indices,
              const double[::1] csr_weights, const double[::1] wdeg,
              const signed char[:, ::1] dist, const long long[::1] eu,
              const long long[::1] ev, double tol, int max_k,
              double[::1] out_value, int[::1] out_probes, signed char[::1] out_converged,
              double[::1] out_hprev):
    """LLY curvature for a batch of edges by the probe schedule alpha_k = 1 - 2^-k.

    Stops at the first k >= 2 with ``|h_k - h_{k-1}| <= tol``. Writes the last
    probe value, the probe count, a convergence flag and the previous probe.
    """
    cdef Work w
    cdef long long N = dist.shape[0]
    cdef long long maxdeg = 0, v, e, M = eu.shape[0]
    cdef int k, ok, x, y, failed = 0
    cdef double alpha, beta, h, hprev, w1
    memset(&w, 0, sizeof(Work))
    for v in range(N):
        if indptr[v + 1] - indptr[v] > maxdeg:
            maxdeg = indptr[v + 1] - indptr[v]
    if reserve_edge(&w, maxdeg, N) != 0:
        work_free(&w)
        raise MemoryError()
    try:
        with nogil:
            for e in range(M):
                x = <int>eu[e]
                y = <int>ev[e]
                hprev = 0.0
                h = 0.0
                out_converged[e] = 0
                for k in range(1, max_k + 1):
                    beta = ldexp(1.0, -k)
                    alpha = 1.0 - beta
                    w1 = edge_w1(&w, &indptr[0], &indices[0], &csr_weights[0], &wdeg[0],
                                 &dist[0, 0], N, x, y, alpha, &ok)
                    if not ok:
                        failed = 1
                    hprev = h
                    h = (1.0 - w1) / beta
                    out_probes[e] = k
                    if k >= 2 and (h - hprev <= tol and hprev - h <= tol):
                        out_converged[e] = 1
                        break
                out_value[e] = h
                out_hprev[e] = hprev
        if failed:
            raise RuntimeError("transport left unshipped mass on some edge")
    finally:
        work_free(&w)
