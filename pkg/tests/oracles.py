"""Independent brute-force oracles used across the test suite.

Nothing here calls into clfree's path code. Paths are grown level by level
(breadth-first extension of whole vertex sequences), which is a different
algorithm from the package's depth-first kernels.
"""
from __future__ import annotations

import itertools
import math

import networkx as nx


def adjacency(n, edges):
    adj = {v: set() for v in range(1, n + 1)}
    for x, y in edges:
        adj[x].add(y)
        adj[y].add(x)
    return adj


def all_simple_paths(adj, max_len):
    """Every simple path with 1..max_len edges, in both directions, grouped by length."""
    by_len = {0: [(v,) for v in sorted(adj)]}
    for L in range(1, max_len + 1):
        nxt = []
        for p in by_len[L - 1]:
            for w in sorted(adj[p[-1]]):
                if w not in p:
                    nxt.append(p + (w,))
        by_len[L] = nxt
    return by_len


def paths_of_length(adj, length, start=None):
    frontier = [(v,) for v in (sorted(adj) if start is None else [start])]
    for _ in range(length):
        frontier = [p + (w,) for p in frontier for w in sorted(adj[p[-1]]) if w not in p]
    return frontier


def count_paths(adj, x, y, length, forbidden=(), required=None):
    forbidden = set(forbidden)
    total = 0
    for p in paths_of_length(adj, length, start=x):
        if p[-1] != y or any(v in forbidden for v in p[1:-1]):
            continue
        if required is not None:
            a, b = required
            if not any({p[h], p[h + 1]} == {a, b} for h in range(length)):
                continue
        total += 1
    return total


def with_edge(adj, e):
    out = {v: set(s) for v, s in adj.items()}
    out[e[0]].add(e[1])
    out[e[1]].add(e[0])
    return out


def is_open(adj, x, y, ell):
    return y not in adj[x] and count_paths(adj, x, y, ell - 1) == 0


def open_pairs(adj, ell):
    """Open non-edges: endpoints of no (l-1)-edge path."""
    closed = {tuple(sorted((p[0], p[-1]))) for p in paths_of_length(adj, ell - 1)}
    vs = sorted(adj)
    return {(x, y) for x, y in itertools.combinations(vs, 2) if y not in adj[x] and (x, y) not in closed}


def closing_pairs(adj, e, ell, open_set=None):
    """C_e: open xy with a C_l through both e and xy in G + e + xy."""
    if open_set is None:
        open_set = open_pairs(adj, ell)
    h = with_edge(adj, e)
    out = set()
    a, b = e
    for p in paths_of_length(h, ell - 1):
        if p[0] > p[-1]:
            continue
        pr = (p[0], p[-1])
        if pr not in open_set or pr == tuple(sorted(e)):
            continue
        if any({p[k], p[k + 1]} == {a, b} for k in range(ell - 1)):
            out.add(pr)
    return out


def in_closing(adj, f, e, ell):
    """e in C_f: some (l-1)-edge path between e's endpoints in G + f uses f."""
    if tuple(sorted(e)) == tuple(sorted(f)):
        return False
    return count_paths(with_edge(adj, f), e[0], e[1], ell - 1, required=f) > 0


def has_cycle(adj, ell):
    g = nx.Graph()
    g.add_nodes_from(adj)
    g.add_edges_from((x, y) for x in adj for y in adj[x] if x < y)
    return any(len(c) == ell for c in nx.simple_cycles(g, length_bound=ell))


def label_class(v, r):
    return (v - 1) // r + 1


def layers(adj, S, X, depth, r):
    """Breadth-layered recomputation: layer j holds vertices of class j reachable by class-climbing walks."""
    out = [set(S)]
    for j in range(1, depth + 1):
        out.append({w for v in out[j - 1] for w in adj[v] if w not in X and label_class(w, r) == j})
    return out


def config_closing(adj, A, B, N3, x, y, j, ell):
    """(b, w) in B x N3 with vertex-disjoint paths b..x (j-1 edges) and y..w (l-j-1 edges)."""
    left = [p for p in paths_of_length(adj, j - 1, start=x) if p[-1] in B]
    right = [p for p in paths_of_length(adj, ell - j - 1, start=y) if p[-1] in N3]
    out = set()
    for p in left:
        for q in right:
            if not set(p) & set(q):
                out.add((p[-1], q[-1]))
    return out


def jd_paths(adj, A, B, X, j, d, r):
    out = []
    for p in paths_of_length(adj, j + d):
        if p[0] not in B or p[-1] not in A:
            continue
        ok = True
        for dd in range(1, d + 1):
            v = p[j + d - dd]
            if v in X or label_class(v, r) != dd:
                ok = False
                break
        if ok:
            out.append(p)
    return out


def independent(adj, S):
    return not any(adj[v] & S for v in S)


def binomial_se(p, n):
    return math.sqrt(p * (1 - p) / n)


# --- tuple ledger rules ---------------------------------------------------------------

def label_classes(n, ell, A, B, R, r):
    middle = [[v for v in range((j - 1) * r + 1, min(j * r, n) + 1) if v not in R] for j in range(1, ell - 2)]
    return [sorted(A)] + middle + [sorted(B)]


def ledger_initial(n, ell, A, B, R, r):
    return [set(itertools.product(*label_classes(n, ell, A, B, R, r)))] + [set() for _ in range(ell - 3)]


def _pairs(t):
    return [tuple(sorted((t[h - 1], t[h]))) for h in range(1, len(t))]


def _reaches(adj, v, targets, length):
    return any(p[-1] in targets for p in paths_of_length(adj, length, start=v))


def ledger_step(adj, levels, e, ell, A, B, R, r, r2):
    """One step of the add / remove / ignore rules, evaluated literally on G(i).

    "e in C_f" is decided straight from its definition in G + f, for each
    tuple separately; nothing relies on the symmetry of closing families.
    Returns (new levels, number of tuples ignored this step).
    """
    e = tuple(sorted(e))
    top = ell - 3
    new = [set(L) for L in levels]
    for L in range(top):
        for t in levels[L]:
            fs = _pairs(t)
            if any(f == e or in_closing(adj, f, e, ell) for f in fs[L:]):
                new[L].discard(t)
            j = L + 1
            if fs[j - 1] != e:
                continue
            if any(in_closing(adj, e, f, ell) for f in fs[j:]):
                continue
            if _reaches(adj, t[j], set(A), j):
                continue
            new[j].add(t)
    ignored = 0
    N3 = None
    for t in levels[top]:
        f = _pairs(t)[-1]
        if f == e:
            new[top].discard(t)
            continue
        if not in_closing(adj, f, e, ell):
            continue
        if N3 is None:
            N3 = layers(adj, A, R, ell - 3, r)[ell - 3]
        bw = (t[-1], t[-2])
        witness = False
        for x, y in (e, e[::-1]):
            for j in range(1, ell):
                C = config_closing(adj, A, B, N3, x, y, j, ell)
                if bw in C and len(C) <= r2:
                    witness = True
        if witness:
            new[top].discard(t)
        else:
            ignored += 1
    return new, ignored


def has_path(adj, x, y, length):
    """Early-exit depth-first search for one simple x-y path with exactly `length` edges."""
    def walk(v, left, seen):
        if left == 0:
            return v == y
        for w in adj[v]:
            if w in seen or (w == y and left > 1):
                continue
            seen.add(w)
            if walk(w, left - 1, seen):
                return True
            seen.discard(w)
        return False
    return walk(x, length, {x})
