"""Compiled inner loops.  Vertices are 0-based; letter code y acts on u as
``pred[y >> 1, u]`` when y is odd (an inverse) and ``succ[y >> 1, u]`` otherwise."""
import numpy as np
from numba import njit


@njit(cache=True)
def crp_insert(succ, pred, n0, choices):
    """Seat customers n0, n0+1, ... ; choices[i] in [0, n0+i], the last value opening a table."""
    m = n0
    for i in range(choices.shape[0]):
        j = choices[i]
        if j >= m:
            succ[m] = m
            pred[m] = m
        else:
            p = pred[j]
            succ[p] = m
            pred[m] = p
            succ[m] = j
            pred[j] = m
        m += 1
    return m


@njit(cache=True)
def _step(succ, pred, y, u):
    if y & 1:
        return pred[y >> 1, u]
    return succ[y >> 1, u]


@njit(cache=True)
def simple_cycles(succ, pred, n, K, out_words, out_verts, out_len):
    """Write every simple cycle of length <= K once; returns the count or -1 on overflow.

    Cycles are rooted at their least vertex.  Of the two traversal directions,
    k >= 3 keeps the one whose second vertex is smaller than its last, k == 1 keeps the
    non-inverted letter, k == 2 keeps the lexicographically smaller word.
    """
    d = succ.shape[0]
    nl = 2 * d
    cap = out_words.shape[0]
    count = 0
    path_v = np.empty(K + 1, np.int64)
    path_y = np.empty(K + 1, np.int64)
    nxt = np.empty(K + 1, np.int64)
    on_path = np.zeros(n, np.bool_)
    for v0 in range(n):
        depth = 0
        path_v[0] = v0
        nxt[0] = 0
        on_path[v0] = True
        while depth >= 0:
            y = nxt[depth]
            if y >= nl:
                if depth > 0:
                    on_path[path_v[depth]] = False
                depth -= 1
                continue
            nxt[depth] = y + 1
            if depth > 0 and y == (path_y[depth - 1] ^ 1):
                continue
            u = path_v[depth]
            v = _step(succ, pred, y, u)
            k = depth + 1
            if v == v0:
                keep = False
                if k == 1:
                    keep = (y & 1) == 0
                elif k == 2:
                    a0 = path_y[0]
                    b0 = y ^ 1
                    keep = a0 < b0 or (a0 == b0 and y < (path_y[0] ^ 1))
                else:
                    keep = path_v[1] < path_v[k - 1]
                if keep:
                    if count >= cap:
                        return -1
                    for i in range(depth):
                        out_words[count, i] = path_y[i]
                        out_verts[count, i] = path_v[i]
                    out_words[count, depth] = y
                    out_verts[count, depth] = u
                    out_len[count] = k
                    count += 1
                continue
            if v < v0 or on_path[v] or k >= K:
                continue
            path_y[depth] = y
            depth += 1
            path_v[depth] = v
            nxt[depth] = 0
            on_path[v] = True
        on_path[v0] = False
    return count


@njit(cache=True)
def cnbw_dfs(succ, pred, n, K):
    """Closed cyclically nonbacktracking walks of each length 1..K (index 0 unused)."""
    d = succ.shape[0]
    nl = 2 * d
    out = np.zeros(K + 1, np.int64)
    path_v = np.empty(K + 1, np.int64)
    path_y = np.empty(K + 1, np.int64)
    nxt = np.empty(K + 1, np.int64)
    for v0 in range(n):
        depth = 0
        path_v[0] = v0
        nxt[0] = 0
        while depth >= 0:
            y = nxt[depth]
            if y >= nl:
                depth -= 1
                continue
            nxt[depth] = y + 1
            if depth > 0 and y == (path_y[depth - 1] ^ 1):
                continue
            v = _step(succ, pred, y, path_v[depth])
            k = depth + 1
            if v == v0 and (k == 1 or y != (path_y[0] ^ 1)):
                out[k] += 1
            if k >= K:
                continue
            path_y[depth] = y
            depth += 1
            path_v[depth] = v
            nxt[depth] = 0
    return out


@njit(cache=True)
def sample_short_counts(rng, n, d, N):
    """(C_1, C_2) for N independent graphs of d uniform permutations of size n."""
    out = np.zeros((N, 2), np.int64)
    P = np.empty((d, n), np.int64)
    for s in range(N):
        for l in range(d):
            for i in range(n):
                P[l, i] = i
            for i in range(n - 1, 0, -1):
                j = int(rng.random() * (i + 1))
                t = P[l, i]
                P[l, i] = P[l, j]
                P[l, j] = t
        c1 = 0
        c2 = 0
        for l in range(d):
            for u in range(n):
                v = P[l, u]
                if v == u:
                    c1 += 1
                    continue
                if P[l, v] == u and u < v:
                    c2 += 1
                for m in range(l + 1, d):
                    if P[m, u] == v:
                        c2 += 1
                    if P[m, v] == u:
                        c2 += 1
        out[s, 0] = c1
        out[s, 1] = c2
    return out
