"""Compiled inner loops: path counting, closing-pair enumeration, pool upkeep.

Graphs are passed as a padded neighbour table ``nbr[v, :deg[v]]`` with
1-based vertex labels; pair states live in a flat triangular int8 array.
"""
import numpy as np
from numba import njit

OPEN = 0
CLOSED = 1
EDGE = 2
UNKNOWN = 3
MARK = 4


@njit(cache=True)
def pair_rank(x, y, n):
    if x > y:
        x, y = y, x
    return (x - 1) * (2 * n - x) // 2 + (y - x - 1)


@njit(cache=True)
def pair_unrank(r, n):
    b = 2 * n - 1
    a = int((b - np.sqrt(b * b - 8.0 * r)) / 2)
    # float guess may be off by one either way
    while a > 0 and a * (b - a) // 2 > r:
        a -= 1
    while (a + 1) * (b - a - 1) // 2 <= r:
        a += 1
    x = a + 1
    y = r - a * (b - a) // 2 + x + 1
    return x, y


@njit(cache=True)
def count_paths(nbr, deg, x, y, length, forbid, ru, rv, virt, limit):
    """Simple x-y paths with exactly `length` edges.

    Internal vertices avoid ``forbid``. If ru > 0 only paths using the edge
    ru-rv are counted; ``virt`` treats that edge as present even when it is
    not in the table. Stops early once ``limit`` (if > 0) is reached.
    """
    n1 = deg.shape[0]
    onpath = np.zeros(n1, np.uint8)
    sv = np.empty(length + 1, np.int64)
    si = np.empty(length + 1, np.int64)
    onpath[x] = 1
    sv[0] = x
    si[0] = 0
    depth = 0
    req_depth = -1
    count = 0
    while depth >= 0:
        v = sv[depth]
        i = si[depth]
        extra = 1 if (virt and (v == ru or v == rv)) else 0
        if i < deg[v] + extra:
            si[depth] = i + 1
            if i < deg[v]:
                w = nbr[v, i]
            elif v == ru:
                w = rv
            else:
                w = ru
            if onpath[w]:
                continue
            is_req = ru > 0 and ((v == ru and w == rv) or (v == rv and w == ru))
            if depth + 1 == length:
                if w == y and (ru == 0 or req_depth >= 0 or is_req):
                    count += 1
                    if limit > 0 and count >= limit:
                        return count
                continue
            if w == y or forbid[w]:
                continue
            depth += 1
            sv[depth] = w
            si[depth] = 0
            onpath[w] = 1
            if is_req and req_depth < 0:
                req_depth = depth
        else:
            onpath[v] = 0
            if req_depth == depth:
                req_depth = -1
            depth -= 1
    return count


@njit(cache=True)
def _push(out, cnt, val):
    if cnt == out.shape[0]:
        bigger = np.empty(2 * out.shape[0], np.int64)
        bigger[:cnt] = out[:cnt]
        out = bigger
    out[cnt] = val
    return out, cnt + 1


@njit(cache=True)
def _take(state, n, x, y, out, cnt, commit):
    r = pair_rank(x, y, n)
    if state[r] == OPEN:
        state[r] = CLOSED if commit else MARK
        out, cnt = _push(out, cnt, r)
    return out, cnt


@njit(cache=True)
def _inner(nbr, deg, state, n, v, b, onpath, xend, out, cnt, commit, sv, si):
    if b == 0:
        return _take(state, n, xend, v, out, cnt, commit)
    sv[0] = v
    si[0] = 0
    depth = 0
    while depth >= 0:
        z = sv[depth]
        i = si[depth]
        if i < deg[z]:
            si[depth] = i + 1
            w = nbr[z, i]
            if onpath[w]:
                continue
            if depth + 1 == b:
                out, cnt = _take(state, n, xend, w, out, cnt, commit)
                continue
            depth += 1
            sv[depth] = w
            si[depth] = 0
            onpath[w] = 1
        else:
            if depth > 0:
                onpath[z] = 0
            depth -= 1
    return out, cnt


@njit(cache=True)
def closing_ranks(nbr, deg, state, n, u, v, half, commit):
    """Ranks of open pairs closed by u-v, for cycles with ``half + 2`` edges.

    For every split a + b = half, a simple path of length a leaves u and a
    vertex-disjoint one of length b leaves v; their far ends form a
    candidate pair. With ``commit`` the found pairs are flipped to CLOSED,
    otherwise the states are left untouched.
    """
    onpath = np.zeros(n + 1, np.uint8)
    onpath[u] = 1
    onpath[v] = 1
    out = np.empty(64, np.int64)
    cnt = 0
    su = np.empty(half + 1, np.int64)
    iu = np.empty(half + 1, np.int64)
    sv = np.empty(half + 1, np.int64)
    si = np.empty(half + 1, np.int64)
    for a in range(half + 1):
        b = half - a
        if a == 0:
            out, cnt = _inner(nbr, deg, state, n, v, b, onpath, u, out, cnt, commit, sv, si)
            continue
        su[0] = u
        iu[0] = 0
        depth = 0
        while depth >= 0:
            x = su[depth]
            i = iu[depth]
            if i < deg[x]:
                iu[depth] = i + 1
                w = nbr[x, i]
                if onpath[w]:
                    continue
                onpath[w] = 1
                if depth + 1 == a:
                    out, cnt = _inner(nbr, deg, state, n, v, b, onpath, w, out, cnt, commit, sv, si)
                    onpath[w] = 0
                else:
                    depth += 1
                    su[depth] = w
                    iu[depth] = 0
            else:
                if depth > 0:
                    onpath[x] = 0
                depth -= 1
    if not commit:
        for t in range(cnt):
            state[out[t]] = OPEN
    return out[:cnt]


@njit(cache=True)
def recompute_states(nbr, deg, state, n, length):
    forbid = np.zeros(n + 1, np.uint8)
    r = 0
    for x in range(1, n + 1):
        for y in range(x + 1, n + 1):
            if state[r] != EDGE:
                c = count_paths(nbr, deg, x, y, length, forbid, 0, 0, False, 1)
                state[r] = CLOSED if c > 0 else OPEN
            r += 1


@njit(cache=True)
def pool_remove(pool, pos, count, ranks):
    """Swap-remove each rank from the pool; returns the new size."""
    for t in range(ranks.shape[0]):
        r = ranks[t]
        j = pos[r]
        if j < 0:
            continue
        last = pool[count - 1]
        pool[j] = last
        pos[last] = j
        pos[r] = -1
        count -= 1
    return count
