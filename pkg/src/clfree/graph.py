"""Graphs with per-pair states, path counting and layered neighbourhoods.

Vertices are labelled 1..n. Labels matter: the classes V_j(X) used by the
layered neighbourhoods are label ranges.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import _kernels as K
from .errors import DomainError


class PairState(enum.IntEnum):
    OPEN = K.OPEN
    CLOSED = K.CLOSED
    EDGE = K.EDGE
    UNKNOWN = K.UNKNOWN


def norm_pair(x: int, y: int) -> tuple[int, int]:
    return (x, y) if x < y else (y, x)


class PairStateGraph:
    """G(i) together with an Edge/Open/Closed state for every pair.

    ``classified=False`` starts every non-edge as UNKNOWN, for graphs whose
    pair states are never needed (binomial samples, rejection runs).
    """

    def __init__(self, n: int, ell: int | None = None, classified: bool = True, cap: int = 8):
        if n < 2:
            raise DomainError("need at least two vertices")
        self.n = n
        self.ell = ell
        self.npairs = n * (n - 1) // 2
        self.state = np.full(self.npairs, K.OPEN if classified else K.UNKNOWN, dtype=np.int8)
        self.nbr = np.zeros((n + 1, cap), dtype=np.int32)
        self.deg = np.zeros(n + 1, dtype=np.int32)
        self.adj: list[set[int]] = [set() for _ in range(n + 1)]
        self.edge_list: list[tuple[int, int]] = []
        self.max_degree = 0

    # -- basic access -------------------------------------------------------
    @property
    def step(self) -> int:
        return len(self.edge_list)

    @property
    def vertices(self) -> range:
        return range(1, self.n + 1)

    def rank(self, x: int, y: int) -> int:
        if x > y:
            x, y = y, x
        return (x - 1) * (2 * self.n - x) // 2 + (y - x - 1)

    def unrank(self, r: int) -> tuple[int, int]:
        x, y = K.pair_unrank(int(r), self.n)
        return int(x), int(y)

    def pair_state(self, x: int, y: int) -> PairState:
        return PairState(int(self.state[self.rank(x, y)]))

    def has_edge(self, x: int, y: int) -> bool:
        return y in self.adj[x]

    def neighbors(self, v: int) -> list[int]:
        return sorted(self.adj[v])

    def degree(self, v: int) -> int:
        return int(self.deg[v])

    def pairs_in_state(self, s: PairState) -> list[tuple[int, int]]:
        return [self.unrank(r) for r in np.flatnonzero(self.state == s)]

    def edges(self) -> list[tuple[int, int]]:
        return sorted(norm_pair(*e) for e in self.edge_list)

    # -- mutation -----------------------------------------------------------
    def add_edge(self, x: int, y: int) -> None:
        """Insert x-y and mark it Edge; other pair states are not touched."""
        if x == y or y in self.adj[x]:
            raise DomainError(f"cannot add pair {x},{y}")
        if self.deg[x] == self.nbr.shape[1] or self.deg[y] == self.nbr.shape[1]:
            grown = np.zeros((self.n + 1, 2 * self.nbr.shape[1]), dtype=np.int32)
            grown[:, : self.nbr.shape[1]] = self.nbr
            self.nbr = grown
        self.nbr[x, self.deg[x]] = y
        self.nbr[y, self.deg[y]] = x
        self.deg[x] += 1
        self.deg[y] += 1
        self.adj[x].add(y)
        self.adj[y].add(x)
        self.state[self.rank(x, y)] = K.EDGE
        self.edge_list.append((x, y))
        self.max_degree = max(self.max_degree, int(self.deg[x]), int(self.deg[y]))

    def copy(self) -> "PairStateGraph":
        g = PairStateGraph.__new__(PairStateGraph)
        g.n, g.ell, g.npairs = self.n, self.ell, self.npairs
        g.state = self.state.copy()
        g.nbr = self.nbr.copy()
        g.deg = self.deg.copy()
        g.adj = [set(s) for s in self.adj]
        g.edge_list = list(self.edge_list)
        g.max_degree = self.max_degree
        return g

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], ell: int | None = None,
                   classified: bool = True) -> "PairStateGraph":
        """Graph with the given edges; if ell is known and classified, states are recomputed."""
        g = cls(n, ell, classified=classified)
        for x, y in edges:
            g.add_edge(x, y)
        if classified and ell is not None:
            recompute_pair_states(g, ell)
        return g

    # -- serialisation ------------------------------------------------------
    def to_edge_list_text(self) -> str:
        es = self.edges()
        lines = [f"{self.n} {len(es)} {self.ell or 0}"]
        lines += [f"{x} {y}" for x, y in es]
        return "\n".join(lines) + "\n"

    def write_edge_list(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_edge_list_text())

    @classmethod
    def read_edge_list(cls, path, classified: bool = True) -> "PairStateGraph":
        with open(path) as fh:
            rows = [ln.split() for ln in fh if ln.strip()]
        n, m, ell = (int(v) for v in rows[0])
        edges = [(int(a), int(b)) for a, b in rows[1:]]
        if len(edges) != m:
            raise DomainError(f"header says {m} edges, file has {len(edges)}")
        return cls.from_edges(n, edges, ell or None, classified=classified and bool(ell))


# ---------------------------------------------------------------------------
# path counting

def _forbid_mask(g: PairStateGraph, forbidden) -> np.ndarray:
    mask = np.zeros(g.n + 1, dtype=np.uint8)
    for v in forbidden or ():
        mask[v] = 1
    return mask


def count_paths_exact_len(g: PairStateGraph, x: int, y: int, length: int,
                          forbidden_vertices=(), required_edge=None, limit: int = 0) -> int:
    """Number of simple x-y paths with exactly `length` edges.

    Internal vertices avoid ``forbidden_vertices``. With ``required_edge``
    only paths through that pair are counted, and the pair is treated as an
    edge even if the graph does not contain it.
    """
    if x == y:
        raise DomainError("x and y must differ")
    if length < 1 or (g.ell is not None and length > g.ell - 1):
        raise DomainError(f"path length {length} out of range")
    forbidden_vertices = set(forbidden_vertices or ())
    if x in forbidden_vertices or y in forbidden_vertices:
        raise DomainError("forbidden set must not contain the endpoints")
    ru = rv = 0
    virt = False
    if required_edge is not None:
        ru, rv = required_edge
        virt = not g.has_edge(ru, rv)
    return int(K.count_paths(g.nbr, g.deg, x, y, length, _forbid_mask(g, forbidden_vertices),
                             ru, rv, virt, limit))


def is_open_bruteforce(g: PairStateGraph, x: int, y: int, ell: int) -> bool:
    if g.has_edge(x, y):
        raise DomainError(f"{x},{y} is an edge")
    mask = np.zeros(g.n + 1, dtype=np.uint8)
    return K.count_paths(g.nbr, g.deg, x, y, ell - 1, mask, 0, 0, False, 1) == 0


def closing_ranks(g: PairStateGraph, u: int, v: int, ell: int) -> np.ndarray:
    """Ranks of C_uv(i); the graph's pair states are left unchanged."""
    if g.has_edge(u, v):
        raise DomainError(f"{u},{v} is an edge")
    if np.any(g.state == K.UNKNOWN):
        raise DomainError("closing pairs need classified pair states")
    return K.closing_ranks(g.nbr, g.deg, g.state, g.n, u, v, ell - 2, False)


def closing_pairs(g: PairStateGraph, u: int, v: int, ell: int) -> set[tuple[int, int]]:
    """C_uv(i): open pairs xy such that G + uv + xy has a C_l through both."""
    return {g.unrank(r) for r in closing_ranks(g, u, v, ell)}


def recompute_pair_states(g: PairStateGraph, ell: int) -> PairStateGraph:
    """Reclassify every non-edge from scratch (in place); returns g."""
    K.recompute_states(g.nbr, g.deg, g.state, g.n, ell - 1)
    return g


def iter_paths(adj, start: int, length: int, forbidden=frozenset()) -> Iterator[tuple[int, ...]]:
    """All simple paths with `length` edges from start, as vertex tuples.

    No vertex of the path may lie in ``forbidden`` (the start included).
    """
    if start in forbidden:
        return
    path = [start]
    on = {start}

    def rec():
        if len(path) == length + 1:
            yield tuple(path)
            return
        for w in adj[path[-1]]:
            if w in on or w in forbidden:
                continue
            path.append(w)
            on.add(w)
            yield from rec()
            on.discard(w)
            path.pop()

    yield from rec()


# ---------------------------------------------------------------------------
# layered neighbourhoods

def class_index(v: int, r: int) -> int:
    """The j with (j-1) r < v <= j r."""
    return (v - 1) // r + 1


def in_class(v: int, j: int, X, r: int) -> bool:
    return v not in X and (j - 1) * r < v <= j * r


@dataclass
class LayeredNeighborhood:
    base: frozenset
    exclusion: frozenset
    layers: list = field(default_factory=list)

    def layer(self, j: int) -> set:
        return self.layers[j] if j < len(self.layers) else set()

    def upto(self, j: int) -> set:
        out = set()
        for layer in self.layers[: j + 1]:
            out |= layer
        return out


def layered_neighborhood(g: PairStateGraph, S, X, depth: int, r: int) -> LayeredNeighborhood:
    """N^(0) = S and N^(j+1) = Gamma(N^(j)) intersected with V_(j+1)(X)."""
    if depth < 0:
        raise DomainError("depth must be >= 0")
    S, X = frozenset(S), frozenset(X)
    layers = [set(S)]
    for j in range(depth):
        nxt = set()
        for v in layers[-1]:
            for w in g.adj[v]:
                if in_class(w, j + 1, X, r):
                    nxt.add(w)
        layers.append(nxt)
    return LayeredNeighborhood(S, X, layers)


# ---------------------------------------------------------------------------
# (j,d)-paths and pair statistics

def iter_jd_paths(g: PairStateGraph, A, B, X, j: int, d: int, r: int,
                  excluded_edges=frozenset()) -> Iterator[tuple[int, ...]]:
    """Vertex sequences w_0..w_j = v_d..v_0 of the (j,d)-paths wrt (A,B,X)."""
    A, X = set(A), set(X)
    excluded = {norm_pair(*e) for e in excluded_edges}
    total = j + d

    def ok(pos: int, w: int) -> bool:
        if pos < j:
            return True
        dd = total - pos   # this vertex is v_dd
        if dd == 0:
            return w in A
        return in_class(w, dd, X, r)

    for b in sorted(set(B)):
        if not ok(0, b):
            continue
        path = [b]
        on = {b}
        stack = [iter(sorted(g.adj[b]))]
        while stack:
            w = next(stack[-1], None)
            if w is None:
                stack.pop()
                on.discard(path.pop())
                continue
            pos = len(path)
            if w in on or norm_pair(path[-1], w) in excluded or not ok(pos, w):
                continue
            if pos == total:
                yield tuple(path) + (w,)
                continue
            path.append(w)
            on.add(w)
            stack.append(iter(sorted(g.adj[w])))


def count_jd_paths(g: PairStateGraph, A, B, X, j: int, d: int, r: int,
                   excluded_edges=frozenset(), ell: int | None = None) -> int:
    ell = ell or g.ell
    if j < 1 or (ell is not None and j > ell - 1):
        raise DomainError(f"j={j} out of range")
    if d < 0 or (ell is not None and d > ell - 3):
        raise DomainError(f"d={d} out of range")
    return sum(1 for _ in iter_jd_paths(g, A, B, X, j, d, r, excluded_edges))


def edges_between(g: PairStateGraph, A, B) -> int:
    """e(A,B): edges with one end in A and the other in B, each counted once."""
    A, B = set(A), set(B)
    seen = set()
    for a in A:
        for w in g.adj[a]:
            if w in B:
                seen.add(norm_pair(a, w))
    return len(seen)


def codegree_max(g: PairStateGraph) -> int:
    if g.step == 0:
        return 0
    M = np.zeros((g.n, g.n), dtype=np.float32)
    for x, y in g.edge_list:
        M[x - 1, y - 1] = M[y - 1, x - 1] = 1
    C = M @ M
    np.fill_diagonal(C, 0)
    return int(C.max())


def D_set(g: PairStateGraph, A, d: int) -> set[int]:
    A = set(A)
    return {v for v in g.vertices if len(g.adj[v] & A) >= d}


def pair_statistics(g: PairStateGraph, A, B, d: int, params=None) -> dict:
    return {
        "e_AB": edges_between(g, A, B),
        "codegree_max": codegree_max(g),
        "D_Ad": D_set(g, A, d),
    }
