"""Configurations, tuple ledgers and the diagnostics built on them.

A configuration fixes (v~, U, A, B, R); the label classes V_1..V_(l-3) are
the vertices outside R in consecutive label ranges of width r. A ledger
tracks the sets T_j of tuples (v_0, .., v_(l-2)) in A x V_1 x .. x B whose
first j pairs are edges, updated step by step by the add/remove/ignore
rules.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ConsistencyError, DomainError, InfeasibleConfiguration
from .gnp import build_X_P1, build_XF_P2, greedy_independent_subset
from .graph import PairStateGraph, closing_ranks, iter_paths, layered_neighborhood, norm_pair
from .params import ProcessParams


@dataclass(frozen=True)
class Configuration:
    v_tilde: int
    U: frozenset
    A: frozenset
    B: frozenset
    R: frozenset
    n: int
    ell: int
    r: int
    I_A: frozenset = frozenset()
    I_B: frozenset = frozenset()

    def __post_init__(self):
        for name in ("U", "A", "B", "R", "I_A", "I_B"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.v_tilde in self.U:
            raise DomainError("v~ must not lie in U")
        if self.A & self.B:
            raise DomainError("A and B must be disjoint")
        if not (self.A | self.B) <= self.U:
            raise DomainError("A and B must be subsets of U")
        if len(self.A) != len(self.B):
            raise DomainError("|A| must equal |B|")
        if not ({self.v_tilde} | self.U) <= self.R:
            raise DomainError("R must contain v~ and U")

    @classmethod
    def make(cls, v_tilde, U, A, B, R, params: ProcessParams, I_A=(), I_B=()) -> "Configuration":
        R = frozenset(R) | {v_tilde} | frozenset(U)
        return cls(v_tilde, frozenset(U), frozenset(A), frozenset(B), R, params.n, params.ell,
                   params.r, frozenset(I_A), frozenset(I_B))

    @property
    def k(self) -> int:
        return len(self.A)

    def V(self, j: int) -> list[int]:
        return [v for v in range((j - 1) * self.r + 1, min(j * self.r, self.n) + 1) if v not in self.R]

    @property
    def classes(self) -> list[list[int]]:
        return [self.V(j) for j in range(1, self.ell - 2)]

    @property
    def degenerate(self) -> bool:
        return any(not c for c in self.classes)

    @property
    def total_tuples(self) -> int:
        return len(self.A) * len(self.B) * math.prod(len(c) for c in self.classes)

    def N3(self, g: PairStateGraph) -> set:
        """N^(l-3)(A, R) on the current graph."""
        return layered_neighborhood(g, self.A, self.R, self.ell - 3, self.r).layer(self.ell - 3)

    def to_dict(self) -> dict:
        return {"v_tilde": self.v_tilde, "U": sorted(self.U), "A": sorted(self.A), "B": sorted(self.B),
                "R": sorted(self.R), "I_A": sorted(self.I_A), "I_B": sorted(self.I_B)}


@dataclass(frozen=True)
class Thresholds:
    r2: float      # (R2) size cap on C_{x,y,Sigma}(i,j)
    b1: float
    b2: float
    M: tuple       # M^(j) cutoffs, index j (entry 0 unused)
    H: float

    @classmethod
    def from_params(cls, params: ProcessParams, **overrides) -> "Thresholds":
        n, p, ell, eps, npp = params.n, params.p, params.ell, params.eps, params.np_
        base = {
            "r2": n ** (-30 * ell * eps) / p,
            "b1": params.k ** 2 * npp ** (ell - 4) * n ** (-9 * eps),
            "b2": n ** (-1 / (2 * ell)) / p,
            "M": tuple(npp ** j * n ** (-params.tau * eps) for j in range(ell - 1)),
            "H": npp * n ** (-2 * params.tau * eps),
        }
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)


# ---------------------------------------------------------------------------
# closing families

def _side_paths(g: PairStateGraph, start: int, length: int, targets, avoid: int) -> list:
    """(endpoint, vertex set) of paths with `length` edges from start into targets."""
    out = []
    for path in iter_paths(g.adj, start, length, forbidden={avoid}):
        if path[-1] in targets:
            out.append((path[-1], frozenset(path)))
    return out


def closing_pairs_config(g: PairStateGraph, sigma: Configuration, x: int, y: int, j: int,
                         N3: set | None = None) -> set:
    """C_{x,y,Sigma}(i,j): (b,w) in B x N^(l-3)(A,R) with disjoint paths b..x and y..w.

    The path b = w_1 .. w_j = x has j-1 edges and y = w_(j+1) .. w_l = w has
    l-j-1 edges; the two share no vertex.
    """
    ell = sigma.ell
    if x == y:
        raise DomainError("x and y must differ")
    if not 1 <= j <= ell - 1:
        raise DomainError(f"j={j} out of range")
    if N3 is None:
        N3 = sigma.N3(g)
    bside = _side_paths(g, x, j - 1, sigma.B, y)
    wside = _side_paths(g, y, ell - j - 1, N3, x)
    return {(b, w) for b, P in bside for w, Q in wside if not P & Q}


def compute_L_sigma(g: PairStateGraph, sigma: Configuration, params: ProcessParams,
                    threshold: float | None = None) -> tuple[set, dict]:
    """Pairs whose largest ordered closing family reaches the threshold.

    Returns (L, per_j) with per_j[j] the pairs reaching it through that j.
    """
    ell = sigma.ell
    thr = Thresholds.from_params(params).r2 if threshold is None else threshold
    N3 = sigma.N3(g)
    per_j = {}
    best: dict = {}
    for j in range(1, ell):
        bside: dict = {}
        for b in sigma.B:
            for path in iter_paths(g.adj, b, j - 1):
                bside.setdefault(path[-1], []).append((b, frozenset(path)))
        wside: dict = {}
        for w in N3:
            for path in iter_paths(g.adj, w, ell - j - 1):
                wside.setdefault(path[-1], []).append((w, frozenset(path)))
        sizes: dict = {}
        for x, bl in bside.items():
            for y, wl in wside.items():
                if x == y:
                    continue
                c = {(b, w) for b, P in bl for w, Q in wl if not P & Q}
                if c:
                    key = norm_pair(x, y)
                    sizes[key] = max(sizes.get(key, 0), len(c))
        if thr <= 0:
            per_j[j] = {(a, b) for a in range(1, g.n + 1) for b in range(a + 1, g.n + 1)}
        else:
            per_j[j] = {pr for pr, s in sizes.items() if s >= thr}
        for pr, s in sizes.items():
            best[pr] = max(best.get(pr, 0), s)
    L = set().union(*per_j.values()) if per_j else set()
    return L, per_j


@dataclass
class BadEventReport:
    b1_count: int
    b1_threshold: float
    L_sigma: set
    b2_threshold: float
    b1_holds: bool
    b2_holds: bool

    def to_dict(self) -> dict:
        return {"b1_count": self.b1_count, "b1_threshold": self.b1_threshold,
                "L_sigma_size": len(self.L_sigma), "b2_threshold": self.b2_threshold,
                "b1_holds": self.b1_holds, "b2_holds": self.b2_holds}


def b1_pairs(g: PairStateGraph, sigma: Configuration) -> set:
    ell = sigma.ell
    target = layered_neighborhood(g, sigma.A, sigma.R, ell - 4, sigma.r).layer(ell - 4)
    out = set()
    for b in sigma.B:
        for path in iter_paths(g.adj, b, ell - 2):
            if path[-1] in target:
                out.add((b, path[-1]))
    return out


def check_bad_events(g: PairStateGraph, sigma: Configuration, params: ProcessParams,
                     thresholds: Thresholds | None = None) -> BadEventReport:
    th = thresholds or Thresholds.from_params(params)
    c = len(b1_pairs(g, sigma))
    L, _ = compute_L_sigma(g, sigma, params, th.r2)
    return BadEventReport(c, th.b1, L, th.b2, c > th.b1, len(L) >= th.b2)


# ---------------------------------------------------------------------------
# ledgers

def tuple_pairs(t: tuple) -> list[tuple[int, int]]:
    """f_1 .. f_(l-2) of a tuple; f_h = v_(h-1) v_h."""
    return [norm_pair(t[h - 1], t[h]) for h in range(1, len(t))]


class TupleLedger:
    """The sets T_(Sigma,0..l-3) for one configuration.

    ``caps`` (keys "A", "B", "V") switches to sampled mode: each class is
    subsampled before the product is formed and counts are rescaled. The
    rules themselves always use the full configuration, so a sampled ledger
    is exactly the exact ledger restricted to the sampled product.
    """

    EXACT_LIMIT = 10**7

    def __init__(self, sigma: Configuration, params: ProcessParams, thresholds: Thresholds | None = None,
                 caps: dict | None = None, seed: int = 0):
        self.sigma = sigma
        self.params = params
        self.ell = sigma.ell
        self.th = thresholds or Thresholds.from_params(params)
        classes = [sorted(sigma.A)] + sigma.classes + [sorted(sigma.B)]
        self.scale = 1.0
        self.sampled = caps is not None
        if caps:
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 7])))
            keys = ["A"] + ["V"] * (self.ell - 3) + ["B"]
            picked = []
            for key, cls in zip(keys, classes):
                cap = caps.get(key)
                if cap is not None and len(cls) > cap:
                    self.scale *= len(cls) / cap
                    cls = sorted(rng.choice(cls, size=cap, replace=False).tolist())
                picked.append(cls)
            classes = picked
        size = math.prod(len(c) for c in classes)
        if size > self.EXACT_LIMIT:
            raise DomainError(f"{size} tuples exceed the exact-ledger limit; pass caps")
        self.classes = classes
        top = self.ell - 3
        self.levels: list[set] = [set(itertools.product(*classes))] + [set() for _ in range(top)]
        self.ever_added: list[set] = [set(self.levels[0])] + [set() for _ in range(top)]
        # per level: pair -> tuples holding it among their non-edge pairs
        self.index: list[dict] = [dict() for _ in range(top + 1)]
        for t in self.levels[0]:
            self._index_add(0, t)
        self.prefix_of: list[dict] = [dict() for _ in range(top + 1)]
        self.ignored_count = 0
        self.ignored: set = set()     # level-(l-3) tuples whose last pair is closed
        self.step = 0
        self.ut_violations = 0

    def _index_add(self, level, t):
        for pr in tuple_pairs(t)[level:]:
            self.index[level].setdefault(pr, set()).add(t)

    def _index_drop(self, level, t):
        for pr in tuple_pairs(t)[level:]:
            s = self.index[level].get(pr)
            if s is not None:
                s.discard(t)
                if not s:
                    del self.index[level][pr]

    def level_counts(self) -> list[int]:
        return [len(s) for s in self.levels]

    def scaled_counts(self) -> list[float]:
        return [len(s) * self.scale for s in self.levels]

    def validate(self, g: PairStateGraph) -> None:
        """Raise ConsistencyError unless every tuple fits its level's edge/open pattern."""
        top = self.ell - 3
        for j, level in enumerate(self.levels):
            for t in level:
                st = [g.state[g.rank(*pr)] for pr in tuple_pairs(t)]
                ok = all(s == K.EDGE for s in st[:j])
                if j < top:
                    ok = ok and all(s == K.OPEN for s in st[j:])
                else:
                    ok = ok and st[-1] in (K.OPEN, K.CLOSED)
                if not ok:
                    raise ConsistencyError(f"tuple {t} breaks the pattern of level {j}")

    def snapshot(self, bad_events: BadEventReport | None = None) -> dict:
        return {"step": self.step, "level_counts": self.level_counts(), "ignored_count": self.ignored_count,
                "bad_events": bad_events.to_dict() if bad_events else {}}

    def z_size(self, g: PairStateGraph) -> int:
        return len(z_set(self, g))


def _path_from_A(g: PairStateGraph, A, v: int, length: int) -> bool:
    for path in iter_paths(g.adj, v, length):
        if path[-1] in A:
            return True
    return False


def tuple_step_update(ledger: TupleLedger, g_before: PairStateGraph, sigma: Configuration,
                      e_next: tuple[int, int], params: ProcessParams, closing: set | None = None,
                      validate: bool = True) -> dict:
    """Apply one step of the ledger rules for e_next = e_(i+1), judged on G(i)."""
    g = g_before
    ell = ledger.ell
    top = ell - 3
    if validate:
        ledger.validate(g)
    e = norm_pair(*e_next)
    if closing is None:
        closing = closing_pairs_set(g, e, ell)
    hits = closing | {e}
    added = [set() for _ in range(top + 1)]
    removed = [set() for _ in range(top + 1)]
    reach_cache: dict = {}

    def blocked(v, j):
        key = (v, j)
        if key not in reach_cache:
            reach_cache[key] = _path_from_A(g, sigma.A, v, j)
        return reach_cache[key]

    # (a) additions and (b) removals below the top level
    for L in range(top):
        idx = ledger.index[L]
        gone = set()
        for pr in hits:
            gone |= idx.get(pr, set())
        removed[L] = gone
        j = L + 1
        for t in idx.get(e, ()):
            fs = tuple_pairs(t)
            if fs[j - 1] != e:
                continue
            if any(f in closing for f in fs[j:]):
                continue
            if blocked(t[j], j):
                continue
            added[j].add(t)

    # (c) top level
    ignored_now = 0
    idx = ledger.index[top]
    top_gone = set(idx.get(e, ()))          # case 1
    case2 = set()
    for pr in closing:
        case2 |= idx.get(pr, set())         # open last pair, e in C_f(i)
    for t in ledger.ignored:                # closed last pair
        f = tuple_pairs(t)[-1]
        if g.has_edge(*f):
            continue
        if K.count_paths(g.nbr, g.deg, e[0], e[1], ell - 1, np.zeros(g.n + 1, np.uint8),
                         f[0], f[1], True, 1) > 0:
            case2.add(t)
    case2 -= top_gone
    if case2:
        cache: dict = {}
        N3 = None
        for t in sorted(case2):
            b, w = t[-1], t[-2]
            drop = False
            if ledger.th.r2 >= 1:
                if N3 is None:
                    N3 = sigma.N3(g)
                for (x, y) in (e, e[::-1]):
                    for jj in range(1, ell):
                        if (x, y, jj) not in cache:
                            cache[(x, y, jj)] = closing_pairs_config(g, sigma, x, y, jj, N3)
                        c = cache[(x, y, jj)]
                        if (b, w) in c and len(c) <= ledger.th.r2:
                            drop = True
                            break
                    if drop:
                        break
            if drop:
                top_gone.add(t)
            else:
                ignored_now += 1
    removed[top] = top_gone

    # apply
    for L in range(top + 1):
        for t in removed[L]:
            ledger.levels[L].discard(t)
            ledger._index_drop(L, t)
            if L == top:
                ledger.ignored.discard(t)
    for L in range(1, top + 1):
        for t in added[L]:
            ledger.levels[L].add(t)
            ledger._index_add(L, t)
            ledger.ever_added[L].add(t)
            suffix = t[L:]
            prev = ledger.prefix_of[L].get(suffix)
            if prev is None:
                ledger.prefix_of[L][suffix] = t[:L]
            elif prev != t[:L]:
                ledger.ut_violations += 1
    if ignored_now:
        for t in case2 - top_gone:
            ledger.ignored.add(t)
        ledger.ignored_count += ignored_now
    ledger.step += 1
    return {"added": [len(s) for s in added], "removed": [len(s) for s in removed], "ignored": ignored_now,
            "added_sets": added, "removed_sets": removed}


def closing_pairs_set(g: PairStateGraph, e, ell) -> set:
    return {g.unrank(r) for r in closing_ranks(g, e[0], e[1], ell)}


def z_set(ledger: TupleLedger, g: PairStateGraph) -> set:
    """Top-level tuples whose last pair is open."""
    top = ledger.levels[-1]
    return {t for t in top if g.state[g.rank(*tuple_pairs(t)[-1])] == K.OPEN}


def extension_violations(ledger: TupleLedger) -> int:
    """Suffixes matched by two different prefixes among ever-added tuples."""
    bad = 0
    for j in range(1, len(ledger.levels)):
        seen: dict = {}
        for t in ledger.ever_added[j]:
            seen.setdefault(t[j:], set()).add(t[:j])
        bad += sum(1 for s in seen.values() if len(s) > 1)
    return bad


class LedgerTracker:
    """Process observer that keeps one or more ledgers in step with a run."""

    def __init__(self, ledgers: list[TupleLedger], validate: bool = False, every_bad_events: int = 0):
        self.ledgers = ledgers
        self.validate = validate
        self.every_bad_events = every_bad_events
        self.rows: list[dict] = []
        self.max_top_removed = 0

    def before_step(self, run, pair):
        g = run.graph
        closing = closing_pairs_set(g, pair, run.ell)
        row = {"i": g.step + 1}
        for idx, led in enumerate(self.ledgers):
            res = tuple_step_update(led, g, led.sigma, pair, led.params, closing, self.validate)
            self.max_top_removed = max(self.max_top_removed, res["removed"][-1])
            row[idx] = {"counts": led.scaled_counts(), "ignored": led.ignored_count}
        self.rows.append(row)


# ---------------------------------------------------------------------------
# the good configuration

def _lowest(pool, count: int, what: str) -> list[int]:
    pool = sorted(pool)
    if len(pool) < count:
        raise InfeasibleConfiguration(f"{what}: need {count} vertices, only {len(pool)} available")
    return pool[:count]


def find_good_configuration(g: PairStateGraph, v_tilde: int, U, params: ProcessParams):
    """Choose Sigma* = (v~, U, A, B, R) from G(i).

    Returns (configuration, record) where the record exposes S, I_A, I_B,
    ell_A, ell_B, X_1, X_2, F and the size audits. Arbitrary choices take the
    lowest labels.
    """
    U = set(U)
    if v_tilde in U:
        raise DomainError("v~ must not lie in U")
    k, n = params.k, params.n
    peel = greedy_independent_subset(g, U)
    S = peel["S"]
    order = sorted(g.vertices, key=lambda v: (-len(g.adj[v] & S), v))

    def grow(start, exclude):
        acc = set()
        for idx in range(start, len(order)):
            acc |= (g.adj[order[idx]] & S) - exclude
            if len(acc) >= 2 * k:
                return idx + 1, acc
        return math.inf, acc

    ell_A, N_A = grow(0, set())
    if ell_A == math.inf:
        ell_B, N_B = math.inf, set()
    else:
        ell_B, N_B = grow(ell_A, N_A)
    # ell_B > n^(2 theta eps), compared in logs since the power overflows easily
    if ell_B == math.inf or math.log(ell_B) > 2 * params.theta * params.eps * math.log(n):
        I_A, I_B = set(), set()
        free = S - (N_A | N_B)
        picked = _lowest(free, 2 * k, "S minus (N_A u N_B)")
        A, B = set(picked[:k]), set(picked[k:])
    else:
        I_A = set(order[:ell_A])
        I_B = set(order[ell_A:ell_B])
        gamma_IB = set().union(*(g.adj[v] for v in I_B)) if I_B else set()
        A = set(_lowest(N_A - (I_B | gamma_IB), k, "N_A minus (I_B u Gamma(I_B))"))
        B = set(_lowest(N_B - A, k, "N_B"))
    p1 = build_X_P1(g, A, I_B, params, strict=False)
    p2 = build_XF_P2(g, A, B, params, strict=False)
    X_1, X_2, F = p1["X"], p2["X"], p2["F"]
    R = {v_tilde} | U | X_1 | X_2
    sigma = Configuration.make(v_tilde, U, A, B, R, params, I_A, I_B)
    eps, ell = params.eps, params.ell
    audit = {
        "X_1": (len(X_1), k * n ** (5 * ell * eps)),
        "X_2": (len(X_2), k * n ** (5 * ell * eps)),
        "F": (len(F), k * n ** (2 * eps)),
        "R": (len(R), k * n ** (10 * ell * eps)),
    }
    gamma_IA = set().union(*(g.adj[v] for v in I_A)) if I_A else set()
    gamma_IB = set().union(*(g.adj[v] for v in I_B)) if I_B else set()
    record = {
        "S": S, "premise_failed": peel["premise_failed"], "I_A": I_A, "I_B": I_B,
        "ell_A": ell_A, "ell_B": ell_B, "N_A": N_A, "N_B": N_B, "X_1": X_1, "X_2": X_2, "F": F,
        "size_audit": audit, "sizes_ok": all(a <= b for a, b in audit.values()),
        "separation_ok": not (gamma_IA & B) and not (gamma_IB & A),
        "P1": p1, "P2": p2,
    }
    return sigma, record


def layered_M_sets(g: PairStateGraph, A, R, params: ProcessParams, thresholds: Thresholds | None = None) -> dict:
    """W^(j)(v,A), M^(j)(A) and H^(j)(A) for 1 <= j <= l-2."""
    th = thresholds or Thresholds.from_params(params)
    ell = params.ell
    N3 = layered_neighborhood(g, A, R, ell - 3, params.r).layer(ell - 3)
    W: dict = {}
    for w in N3:
        for j in range(1, ell - 1):
            for path in iter_paths(g.adj, w, j):
                W.setdefault((path[-1], j), set()).add(w)
    M = {j: {v for (v, jj), s in W.items() if jj == j and len(s) >= th.M[j]} for j in range(1, ell - 1)}
    H = {0: set(N3)}
    for j in range(1, ell - 1):
        H[j] = {v for v in g.vertices if len(g.adj[v] & H[j - 1]) >= th.H}
    return {"W": W, "M": M, "H": H, "N3": N3}


def ignored_diagnostics(g: PairStateGraph, sigma: Configuration, ledger: TupleLedger,
                        params: ProcessParams, thresholds: Thresholds | None = None) -> dict:
    """Pairs (w_1, w_l) in B x N^(l-3)(A,R) on an l-vertex path with w_2 in I_B or M^(l-2)(A)."""
    ell = params.ell
    ms = layered_M_sets(g, sigma.A, sigma.R, params, thresholds)
    N3, Mset = ms["N3"], ms["M"][ell - 2]
    Q_I, Q_M = set(), set()
    for b in sigma.B:
        for path in iter_paths(g.adj, b, ell - 1):
            if path[-1] not in N3:
                continue
            if path[1] in sigma.I_B:
                Q_I.add((b, path[-1]))
            elif path[1] in Mset:
                Q_M.add((b, path[-1]))
    Q = Q_I | Q_M
    t_minus_z = len(ledger.levels[-1]) - len(z_set(ledger, g))
    return {"Q_total": len(Q), "Q_I": len(Q_I), "Q_M": len(Q_M), "T_minus_Z": t_minus_z,
            "inequality_holds": t_minus_z <= len(Q)}
