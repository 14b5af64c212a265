"""Compiled inner loops for the cavity sweeps, energies and exact enumeration.

Exchangeable vertices (b-matching included) are handled here through their
size-weight vectors ``coef[cptr[i]:cptr[i + 1]]``; vertices flagged inactive
are skipped and left to the caller.

Infinite message values are counted, never multiplied: for a vertex with
``L`` infinite inputs the generating sums become polynomials in a common
scale and only their leading coefficients are compared.
"""

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True)
def _esp_into(vals, n, order, out):
    out[0] = 1.0
    for k in range(1, order + 1):
        out[k] = 0.0
    for idx in range(n):
        v = vals[idx]
        top = min(idx + 1, order)
        for k in range(top, 0, -1):
            out[k] += v * out[k - 1]


@njit(cache=True)
def _binom(n, k):
    if k < 0 or k > n:
        return 0.0
    r = 1.0
    for i in range(1, k + 1):
        r = r * (n - k + i) / i
    return r


@njit(cache=True)
def _leading_ratio(c, r, E, nE, L, shift_num):
    """Leading-term ratio of sum_j c(j+k+shift_num) E_j over sum_j c(j+k) E_j.

    ``k`` runs over ``0..L`` (the degree in the common infinite scale).
    """
    kn = -1
    vn = 0.0
    for k in range(L, -1, -1):
        s = 0.0
        for j in range(nE):
            idx = j + k + shift_num
            if idx > r:
                break
            s += c[idx] * E[j]
        if s > 0.0:
            kn = k
            vn = s
            break
    kd = -1
    vd = 0.0
    for k in range(L, -1, -1):
        s = 0.0
        for j in range(nE):
            idx = j + k
            if idx > r:
                break
            s += c[idx] * E[j]
        if s > 0.0:
            kd = k
            vd = s
            break
    if kd < 0:
        return np.nan
    if kn > kd:
        return INF
    if kn < kd:
        return 0.0
    return vn / vd


@njit(cache=True)
def gamma_sweep(x, ptr, in_arc, out_arc, coef, cptr, active, scale, out):
    """``out[i->j] = scale * Gamma_i(x_{k->i}, k != j)`` for active vertices."""
    n = len(ptr) - 1
    maxdeg = 0
    for i in range(n):
        maxdeg = max(maxdeg, ptr[i + 1] - ptr[i])
    vals = np.empty(maxdeg + 1)
    E = np.empty(maxdeg + 2)
    for i in range(n):
        if not active[i]:
            continue
        d = ptr[i + 1] - ptr[i]
        c = coef[cptr[i] : cptr[i + 1]]
        r = len(c) - 1
        for s in range(d):
            nf = 0
            L = 0
            for q in range(d):
                if q == s:
                    continue
                v = x[in_arc[ptr[i] + q]]
                if v == INF:
                    L += 1
                else:
                    vals[nf] = v
                    nf += 1
            order = min(nf, r)
            _esp_into(vals, nf, order, E)
            g = _leading_ratio(c, r, E, order + 1, L, 1)
            if g == INF:
                out[out_arc[ptr[i] + s]] = INF
            else:
                out[out_arc[ptr[i] + s]] = scale * g


@njit(cache=True)
def gamma_bar_sweep(x, ptr, in_arc, out_arc, coef, cptr, active, out):
    """``out[i->j] = lim_t t * Gamma_i(t x_{k->i}, k != j)`` for finite inputs."""
    n = len(ptr) - 1
    maxdeg = 0
    for i in range(n):
        maxdeg = max(maxdeg, ptr[i + 1] - ptr[i])
    vals = np.empty(maxdeg + 1)
    E = np.empty(maxdeg + 2)
    for i in range(n):
        if not active[i]:
            continue
        d = ptr[i + 1] - ptr[i]
        c = coef[cptr[i] : cptr[i + 1]]
        r = len(c) - 1
        for s in range(d):
            nf = 0
            for q in range(d):
                if q == s:
                    continue
                vals[nf] = x[in_arc[ptr[i] + q]]
                nf += 1
            order = min(nf, r)
            _esp_into(vals, nf, order, E)
            # numerator t-degree j+1 with c(j+1) E_j, denominator degree j with c(j) E_j
            kn = -1
            vn = 0.0
            kd = -1
            vd = 0.0
            for j in range(order, -1, -1):
                if kd < 0 and c[j] * E[j] > 0.0:
                    kd = j
                    vd = c[j] * E[j]
                if kn < 0 and j + 1 <= r and c[j + 1] * E[j] > 0.0:
                    kn = j + 1
                    vn = c[j + 1] * E[j]
            if kn > kd:
                g = INF
            elif kn < kd:
                g = 0.0
            else:
                g = vn / vd
            out[out_arc[ptr[i] + s]] = g


@njit(cache=True)
def energy_vertices(x, ptr, in_arc, coef, cptr, active, out):
    """Per-vertex energy ``U_i`` at the incoming messages (infinite entries allowed)."""
    n = len(ptr) - 1
    maxdeg = 0
    for i in range(n):
        maxdeg = max(maxdeg, ptr[i + 1] - ptr[i])
    vals = np.empty(maxdeg + 1)
    E = np.empty(maxdeg + 2)
    for i in range(n):
        if not active[i]:
            continue
        d = ptr[i + 1] - ptr[i]
        if d == 0:
            out[i] = 0.0
            continue
        c = coef[cptr[i] : cptr[i + 1]]
        r = len(c) - 1
        nf = 0
        L = 0
        for q in range(d):
            v = x[in_arc[ptr[i] + q]]
            if v == INF:
                L += 1
            else:
                vals[nf] = v
                nf += 1
        order = min(nf, r)
        _esp_into(vals, nf, order, E)
        res = np.nan
        for k in range(min(L, r), -1, -1):
            z = 0.0
            sz = 0.0
            for j in range(order + 1):
                idx = j + k
                if idx > r:
                    break
                z += c[idx] * E[j]
                sz += j * c[idx] * E[j]
            if z > 0.0:
                res = k + sz / z
                break
        out[i] = res


@njit(cache=True)
def _ctz(g):
    k = 0
    while (g & 1) == 0:
        g >>= 1
        k += 1
    return k


@njit(cache=True)
def _kahan_add(acc, comp, idx, value):
    y = value - comp[idx]
    t = acc[idx] + y
    comp[idx] = (t - acc[idx]) - y
    acc[idx] = t


@njit(cache=True)
def enumerate_subsets(n, edge_u, edge_v, slot_u, slot_v, wtab, woff, by_count, tpow, moff, marg):
    """Sum the product weight of every edge subset, in Gray-code order.

    Returns the coefficients ``Z_k`` (compensated sums). When ``marg`` has
    rows, ``marg[t, moff[i] + local_mask]`` accumulates ``prod * t^|F|`` for
    every vertex ``i`` with ``moff[i] >= 0``.
    """
    n_edges = len(edge_u)
    Z = np.zeros(n_edges + 1)
    Zc = np.zeros(n_edges + 1)
    T = tpow.shape[0]
    want = marg.shape[0] > 0
    mc = np.zeros_like(marg)
    lm = np.zeros(n, dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    cur = np.empty(n)
    nzero = 0
    for i in range(n):
        cur[i] = wtab[woff[i]]
        if cur[i] == 0.0:
            nzero += 1
    size = 0
    total = np.int64(1) << n_edges
    for g in range(total):
        if g > 0:
            e = _ctz(g)
            on = ((g ^ (g >> 1)) >> e) & 1
            for side in range(2):
                if side == 0:
                    i = edge_u[e]
                    sl = slot_u[e]
                else:
                    i = edge_v[e]
                    sl = slot_v[e]
                lm[i] ^= np.int64(1) << sl
                if on:
                    cnt[i] += 1
                else:
                    cnt[i] -= 1
                if by_count[i]:
                    w = wtab[woff[i] + cnt[i]]
                else:
                    w = wtab[woff[i] + lm[i]]
                if cur[i] == 0.0:
                    nzero -= 1
                if w == 0.0:
                    nzero += 1
                cur[i] = w
            if on:
                size += 1
            else:
                size -= 1
        if nzero > 0:
            continue
        prod = 1.0
        for i in range(n):
            prod *= cur[i]
        _kahan_add(Z, Zc, size, prod)
        if want:
            for ti in range(T):
                w = prod * tpow[ti, size]
                for i in range(n):
                    if moff[i] >= 0:
                        idx = moff[i] + lm[i]
                        y = w - mc[ti, idx]
                        s = marg[ti, idx] + y
                        mc[ti, idx] = (s - marg[ti, idx]) - y
                        marg[ti, idx] = s
    return Z
