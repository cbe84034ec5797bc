"""Deterministic checkers for the binomial-graph properties and their constructions.

Every checker is a pure function of (graph, sets, params) and returns a
dict verdict with at least ``name``, ``holds``, ``value`` and ``bound``.
"""
from __future__ import annotations

import math

from .errors import DomainError
from .graph import (
    PairStateGraph, codegree_max, D_set, edges_between, iter_jd_paths, iter_paths,
    layered_neighborhood, norm_pair,
)
from .params import ProcessParams


class PreconditionError(DomainError):
    pass


def _verdict(name, holds, value, bound, **extra) -> dict:
    out = {"name": name, "holds": bool(holds), "value": value, "bound": bound}
    out.update(extra)
    return out


def check_codegree(g: PairStateGraph) -> dict:
    c = codegree_max(g)
    return _verdict("codegree", c <= 9, c, 9, max_codegree=c)


def greedy_independent_subset(g: PairStateGraph, U) -> dict:
    """Peel an independent S from U, always taking a min-degree vertex of G[W].

    Ties go to the smallest label. Taking a vertex of induced degree >= 6
    sets ``premise_failed``; otherwise |S| >= ceil(|U|/6).
    """
    W = set(U)
    if not W:
        raise DomainError("U must be nonempty")
    deg = {v: len(g.adj[v] & W) for v in W}
    S = set()
    premise_failed = False
    while W:
        v = min(W, key=lambda x: (deg[x], x))
        if deg[v] >= 6:
            premise_failed = True
        S.add(v)
        gone = (g.adj[v] & W) | {v}
        W -= gone
        for x in gone:
            for y in g.adj[x] & W:
                deg[y] -= 1
    return {"S": S, "premise_failed": premise_failed}


def check_degree_D(g: PairStateGraph, params: ProcessParams) -> dict:
    bound = params.np_ * params.n ** (2 * params.eps)
    return _verdict("degree_D", g.max_degree <= bound, g.max_degree, bound, max_degree=g.max_degree)


def _size_ok(sets, limit) -> bool:
    return all(len(s) <= limit for s in sets)


def _crossing_edges(g, S, N) -> set:
    return {norm_pair(s, w) for s in S for w in g.adj[s] if w in N}


def check_edges_bounded_M(g: PairStateGraph, A, S, params: ProcessParams, strict: bool = True) -> dict:
    """e(S, N^(<=l-3)(A, S u A)) against k n^(4 l eps)."""
    A, S = set(A), set(S)
    if A & S:
        raise PreconditionError("A and S must be disjoint")
    size_ok = _size_ok((A, S), params.k * params.n ** (5 * params.eps))
    if strict and not size_ok:
        raise PreconditionError("|A|, |S| <= k n^(5 eps) violated")
    N = layered_neighborhood(g, A, S | A, params.ell - 3, params.r).upto(params.ell - 3)
    edges = _crossing_edges(g, S, N)
    bound = params.k * params.n ** (4 * params.ell * params.eps)
    return _verdict("edges_bounded_M", len(edges) <= bound, len(edges), bound,
                    edge_count=len(edges), edges=edges, precondition_ok=size_ok)


def q1_witnesses(g: PairStateGraph, v: int, A, X, j: int, d: int, r: int, ell: int) -> set:
    Nd = layered_neighborhood(g, A, X, d, r).upto(d)
    if v in Nd:
        return set()
    out = set()
    for path in iter_paths(g.adj, v, j - 1, forbidden=Nd):
        on = set(path)
        for w in g.adj[path[-1]]:
            if w in Nd and w not in on:
                out.add(w)
    return out


def check_Q1(g: PairStateGraph, v: int, A, X, j: int, d: int, params: ProcessParams) -> dict:
    """Endpoints w in N^(<=d)(A,X) reached by a j-edge path from v avoiding N^(<=d) before w."""
    ell = params.ell
    A, X = set(A), set(X)
    if not A <= X:
        raise PreconditionError("A must be a subset of X")
    if not 2 <= j <= ell - 1:
        raise DomainError(f"j={j} out of range")
    if not 0 <= d <= ell - 3:
        raise DomainError(f"d={d} out of range")
    w = q1_witnesses(g, v, A, X, j, d, params.r, ell)
    bound = params.np_ ** (j - 1) * params.n ** (9 * ell * params.eps)
    return _verdict("Q1", len(w) <= bound, len(w), bound, witness_count=len(w), witnesses=w)


def deletion_greedy(copies, mu_target: float, k_slack: float, b_budget: int) -> dict:
    """Greedy search for a small sub-family whose edges kill most members.

    Repeatedly picks the surviving member whose edge set meets the most
    surviving members (ties: lowest index), deletes its edges, and stops once
    at most mu + k members survive or b members have been picked.
    """
    if b_budget < 0:
        raise DomainError("b_budget must be >= 0")
    copies = [frozenset(c) for c in copies]
    by_edge: dict = {}
    for idx, c in enumerate(copies):
        for e in c:
            by_edge.setdefault(e, set()).add(idx)
    alive = set(range(len(copies)))
    I0: list[int] = []
    E0: set = set()
    target = mu_target + k_slack
    while len(alive) > target and len(I0) < b_budget:
        best, best_hits = None, None
        for s in sorted(alive):
            hits = set()
            for e in copies[s]:
                hits |= by_edge[e]
            hits &= alive
            if best_hits is None or len(hits) > len(best_hits):
                best, best_hits = s, hits
        if not best_hits:
            break   # only edgeless members remain; nothing can kill them
        I0.append(best)
        E0 |= copies[best]
        alive -= best_hits
    return {"I_0": I0, "E_0": E0, "remaining_count": len(alive), "success": len(alive) <= target}


def _jd_bounds(j: int, params: ProcessParams):
    k, npp, n, ell, eps = params.k, params.np_, params.n, params.ell, params.eps
    mu = k * k * npp ** (j - 3) * n ** (2 * ell * eps)
    kappa = k * k * npp ** (j - 3) * n ** (3 * ell * eps)
    final = k * k * npp ** (j - 3) * n ** (4 * ell * eps)
    return mu, kappa, final


def build_F_Q2(g: PairStateGraph, A, B, params: ProcessParams, strict: bool = True) -> dict:
    """Exceptional edge set F making all (j,d)-path counts small."""
    A, B = set(A), set(B)
    k, ell = params.k, params.ell
    size_ok = _size_ok((A, B), k)
    if strict and not size_ok:
        raise PreconditionError("|A|, |B| <= k violated")
    X = A | B
    b = math.floor(k * params.n ** params.eps)
    F: set = set()
    searches = {}
    for j in range(1, ell):
        mu, kappa, _ = _jd_bounds(j, params)
        for d in range(0, ell - 3):
            copies = [frozenset(norm_pair(p[t], p[t + 1]) for t in range(len(p) - 1))
                      for p in iter_jd_paths(g, A, B, X, j, d, params.r)]
            res = deletion_greedy(copies, mu, kappa, b)
            searches[(j, d)] = (len(copies), res["success"])
            F |= res["E_0"]
    counts = {}
    holds = True
    for j in range(1, ell):
        final = _jd_bounds(j, params)[2]
        for d in range(0, ell - 3):
            c = sum(1 for _ in iter_jd_paths(g, A, B, X, j, d, params.r, F))
            counts[(j, d)] = {"before": searches[(j, d)][0], "after": c,
                              "search_success": searches[(j, d)][1]}
            holds &= searches[(j, d)][1] and c <= final
    F_bound = k * params.n ** (2 * params.eps)
    budget_exceeded = len(F) > F_bound
    return _verdict("Q2", holds and not budget_exceeded, len(F), F_bound, F=F, per_jd_counts=counts,
                    budget_exceeded=budget_exceeded, precondition_ok=size_ok)


def p1_endpoints(g: PairStateGraph, v: int, A, X, params: ProcessParams) -> set:
    """w in N^(l-3)(A,X) with a path v = w_0 .. w_(l-2) = w and w_1 not in A."""
    ell = params.ell
    target = layered_neighborhood(g, A, X, ell - 3, params.r).layer(ell - 3)
    A = set(A)
    out = set()
    for w1 in g.adj[v]:
        if w1 in A:
            continue
        for path in iter_paths(g.adj, w1, ell - 3, forbidden={v}):
            if path[-1] in target:
                out.add(path[-1])
    return out


def build_X_P1(g: PairStateGraph, A, S, params: ProcessParams, strict: bool = True) -> dict:
    A, S = set(A), set(S)
    if A & S:
        raise PreconditionError("A and S must be disjoint")
    size_ok = _size_ok((A, S), params.k)
    if strict and not size_ok:
        raise PreconditionError("|A|, |S| <= k violated")
    m = check_edges_bounded_M(g, A, S, params, strict=False)
    V_SA = {x for e in m["edges"] for x in e}
    X = A | S | V_SA
    counts = {v: len(p1_endpoints(g, v, A, X, params)) for v in sorted(S)}
    bound = params.np_ ** (params.ell - 3) * params.n ** (15 * params.ell * params.eps)
    worst = max(counts.values(), default=0)
    return _verdict("P1", worst <= bound, worst, bound, X=X, per_v_counts=counts,
                    precondition_ok=size_ok)


def p2_pairs(g: PairStateGraph, A, B, X, F, params: ProcessParams) -> set:
    """Pairs (b,w) in B x N^(l-4)(A,X) joined by an admissible (l-2)-edge path."""
    ell = params.ell
    A = set(A)
    F = {norm_pair(*e) for e in F}
    target = layered_neighborhood(g, A, X, ell - 4, params.r).layer(ell - 4)
    out = set()
    for b in B:
        for path in iter_paths(g.adj, b, ell - 2):
            w = path[-1]
            if w not in target or (b, w) in out or path[1] in A:
                continue
            if path[2] not in A or not ({norm_pair(path[0], path[1]), norm_pair(path[1], path[2])} & F):
                out.add((b, w))
    return out


def build_XF_P2(g: PairStateGraph, A, B, params: ProcessParams, strict: bool = True) -> dict:
    A, B = set(A), set(B)
    if A & B:
        raise PreconditionError("A and B must be disjoint")
    q2 = build_F_Q2(g, A, B, params, strict=strict)
    F = q2["F"]
    V_F = {x for e in F for x in e if x not in A}
    m = check_edges_bounded_M(g, A, B | V_F, params, strict=False)
    V_BF = {x for e in m["edges"] for x in e}
    X = A | B | V_F | V_BF
    pairs = p2_pairs(g, A, B, X, F, params)
    k, npp, n, ell, eps = params.k, params.np_, params.n, params.ell, params.eps
    bound = k * k * npp ** (ell - 5) * n ** (15 * ell * eps)
    return _verdict("P2", len(pairs) <= bound, len(pairs), bound, X=X, F=F, pair_count=len(pairs),
                    q2=q2, precondition_ok=q2["precondition_ok"])


def check_KL(g: PairStateGraph, params: ProcessParams, A, B, d: int) -> dict:
    """The edge-count inequality for (A,B) and the large-degree-set inequality for (A,d)."""
    A, B = set(A), set(B)
    a, b = len(A), len(B)
    eps, p, n = params.eps, params.p, params.n
    if d < max(16 / eps, 2 * a * p * n ** (2 * eps)):
        raise PreconditionError(f"d={d} below max(16/eps, 2 a p n^(2 eps))")
    eAB = edges_between(g, A, B)
    K_bound = max(4 / eps * (a + b), p * a * b * n ** (2 * eps))
    D = D_set(g, A, d)
    L_bound = 16 / eps / d * a
    witnesses = {}
    if not eAB < K_bound:
        witnesses["K"] = {"A": A, "B": B, "e_AB": eAB}
    if not len(D) < L_bound:
        witnesses["L"] = {"A": A, "D_Ad": D}
    return {"name": "KL", "K_holds": eAB < K_bound, "L_holds": len(D) < L_bound,
            "holds": eAB < K_bound and len(D) < L_bound, "value": {"e_AB": eAB, "D_Ad": len(D)},
            "bound": {"K": K_bound, "L": L_bound}, "witnesses": witnesses}


# decreasing properties available to the transfer experiment
DECREASING_PROPERTIES = {
    "always_true": lambda g, params: True,
    "codegree": lambda g, params: check_codegree(g)["holds"],
    "degree_D": lambda g, params: check_degree_D(g, params)["holds"],
}
