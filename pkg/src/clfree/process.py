"""The C_l-free process, its coupling with G(n,M), and binomial samples.

Random streams come from numpy's Philox4x64 counter-based generator, keyed
by ``SeedSequence([master_seed, run_index])``. Streams are bit-identical
across platforms for a fixed numpy major version.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import DomainError, ProcessTerminated
from .graph import PairStateGraph
from .params import ProcessParams


def make_rng(seed: int, run_index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & (2**64 - 1), int(run_index)])
    return np.random.Generator(np.random.Philox(ss))


class RunMode(str, enum.Enum):
    EAGER = "eager"
    REJECTION = "rejection"


@dataclass
class StepRecord:
    i: int
    chosen_pair: tuple[int, int]
    newly_closed: np.ndarray    # pair ranks; empty in rejection mode
    open_count: int             # -1 when unknown


@dataclass
class RunSummary:
    final_step: int
    final_edges: int
    max_degree: int
    terminated: bool
    wall_time: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


class ProcessRun:
    """One run of the process.

    Eager mode keeps the exact open set in a swap-remove pool and closes
    pairs incrementally. Rejection mode keeps a pool of non-edges not yet
    known to be closed; a drawn pair is tested and, if closed, dropped from
    the pool and redrawn. Both draw uniformly from the open pairs.

    Observers may define ``before_step(run, pair)`` (sees G(i)) and/or
    ``after_step(run, record)`` (sees G(i+1)); a bare callable is treated as
    ``after_step``.
    """

    def __init__(self, params: ProcessParams, seed: int = 0, run_index: int = 0,
                 mode: RunMode | str = RunMode.EAGER, record_history: bool = False,
                 graph: PairStateGraph | None = None):
        self.params = params
        self.ell = params.ell
        self.rng_seed = int(seed)
        self.run_index = int(run_index)
        self.rng = make_rng(seed, run_index)
        self.mode = RunMode(mode)
        n = params.n
        if graph is None:
            graph = PairStateGraph(n, params.ell, classified=self.mode is RunMode.EAGER)
        self.graph = graph
        g = graph
        if self.mode is RunMode.EAGER:
            members = np.flatnonzero(g.state == K.OPEN)
        else:
            members = np.flatnonzero((g.state != K.EDGE) & (g.state != K.CLOSED))
        self.pool = members.astype(np.int64)
        self.pos = np.full(g.npairs, -1, dtype=np.int64)
        self.pos[self.pool] = np.arange(self.pool.size)
        self.pool_size = int(self.pool.size)
        self.history: list[StepRecord] | None = [] if record_history else None
        self.terminated = self.pool_size == 0
        self._one = np.empty(1, dtype=np.int64)

    @property
    def step_count(self) -> int:
        return self.graph.step

    @property
    def open_count(self) -> int:
        return self.pool_size if self.mode is RunMode.EAGER else -1

    @property
    def rng_state(self) -> dict:
        return self.rng.bit_generator.state

    def _drop(self, ranks: np.ndarray) -> None:
        self.pool_size = K.pool_remove(self.pool, self.pos, self.pool_size, ranks)

    def draw_pair(self) -> tuple[int, int]:
        """Draw a uniform open pair without adding it."""
        g = self.graph
        while self.pool_size > 0:
            r = int(self.pool[self.rng.integers(self.pool_size)])
            if self.mode is RunMode.EAGER:
                return g.unrank(r)
            x, y = g.unrank(r)
            if K.count_paths(g.nbr, g.deg, x, y, self.ell - 1, np.zeros(g.n + 1, np.uint8),
                             0, 0, False, 1) == 0:
                return x, y
            g.state[r] = K.CLOSED
            self._one[0] = r
            self._drop(self._one)
        self.terminated = True
        raise ProcessTerminated(f"no open pair left after {g.step} steps")

    def apply_pair(self, x: int, y: int) -> np.ndarray:
        """Add the open pair x-y; returns the ranks of newly closed pairs."""
        g = self.graph
        r = g.rank(x, y)
        if self.mode is RunMode.EAGER:
            if g.state[r] != K.OPEN:
                raise DomainError(f"pair {x},{y} is not open")
            closed = K.closing_ranks(g.nbr, g.deg, g.state, g.n, x, y, self.ell - 2, True)
            self._drop(closed)
        else:
            closed = np.empty(0, dtype=np.int64)
        self._one[0] = r
        self._drop(self._one)
        g.add_edge(x, y)
        if self.pool_size == 0:
            self.terminated = True
        return closed

    def step(self, observers=()) -> StepRecord:
        x, y = self.draw_pair()
        for ob in observers:
            before = getattr(ob, "before_step", None)
            if before is not None:
                before(self, (x, y))
        closed = self.apply_pair(x, y)
        rec = StepRecord(self.graph.step, (x, y), closed, self.open_count)
        if self.history is not None:
            self.history.append(rec)
        for ob in observers:
            after = getattr(ob, "after_step", None)
            if after is not None:
                after(self, rec)
            elif callable(ob) and not hasattr(ob, "before_step"):
                ob(self, rec)
        return rec

    def run_to(self, max_steps: int, hooks=()) -> RunSummary:
        """Step until ``max_steps`` more edges are added or the process ends."""
        if max_steps < 0:
            raise DomainError("max_steps must be >= 0")
        t0 = time.perf_counter()
        done = 0
        while done < max_steps and not self.terminated:
            try:
                self.step(hooks)
            except ProcessTerminated:
                break
            done += 1
        return self.summary(time.perf_counter() - t0)

    def run_to_termination(self, hooks=()) -> RunSummary:
        return self.run_to(self.graph.npairs, hooks)

    def summary(self, wall_time: float = 0.0) -> RunSummary:
        g = self.graph
        return RunSummary(g.step, len(g.edge_list), g.max_degree, self.terminated, wall_time)


# ---------------------------------------------------------------------------
# coupling with the uniform random graph

@dataclass
class CoupledRun:
    permutation: np.ndarray      # all pair ranks in uniform random order
    lam: float
    i: int
    M: int
    X: np.ndarray                # X_j for the traversed prefix
    Y: np.ndarray
    X_cum: np.ndarray
    Y_cum: np.ndarray
    open_before: np.ndarray      # |O(X^(j-1))| seen by e_j
    G_unif: PairStateGraph
    G_proc: PairStateGraph       # filtered graph after the first M pairs
    G_i: PairStateGraph | None   # first i accepted edges; None if the process stops first
    open_at_i: int               # |O(i)|, or -1
    extra: dict = field(default_factory=dict)

    @property
    def XM(self) -> int:
        return int(self.X_cum[self.M - 1]) if self.M else 0

    @property
    def YM(self) -> int:
        return int(self.Y_cum[self.M - 1]) if self.M else 0

    def subset_holds(self) -> bool:
        """G(i) inside G(n,M); vacuous unless X^M >= i."""
        if self.XM < self.i:
            return True
        return all(self.G_unif.has_edge(x, y) for x, y in self.G_i.edge_list)


def run_coupled(params: ProcessParams, lam: float, i: int, seed: int, run_index: int = 0) -> CoupledRun:
    """Traverse a uniform permutation of all pairs, accepting the open ones.

    The accepted pairs form the C_l-free process. Traversal continues past
    M = i * lam until i edges are accepted, so G(i) is always available
    unless the process terminates first.
    """
    n = params.n
    npairs = n * (n - 1) // 2
    if lam < 2:
        raise DomainError("lambda must be >= 2")
    if not 1 <= i <= npairs / lam:
        raise DomainError(f"i must lie in [1, {npairs / lam:g}]")
    M = int(i * lam)
    rng = make_rng(seed, run_index)
    perm = rng.permutation(npairs).astype(np.int64)
    run = ProcessRun(params, seed, run_index, RunMode.EAGER)
    g = run.graph
    X = np.zeros(M, dtype=np.int8)
    Y = np.zeros(M, dtype=np.int8)
    open_before = np.zeros(M, dtype=np.int64)
    unif = PairStateGraph(n, params.ell, classified=False)
    threshold = n * n / lam
    G_i, open_at_i, G_proc = None, -1, None
    j = 0
    while j < npairs and (j < M or g.step < i):
        r = int(perm[j])
        x, y = g.unrank(r)
        accepted = g.state[r] == K.OPEN
        if j < M:
            open_before[j] = run.pool_size
            X[j] = accepted
            Y[j] = 1 if run.pool_size < threshold else accepted
            unif.add_edge(x, y)
        if accepted:
            run.apply_pair(x, y)
            if g.step == i:
                G_i = g.copy()
                open_at_i = run.pool_size
        j += 1
        if j == M:
            G_proc = g.copy()
    if G_proc is None:
        G_proc = g.copy()
    return CoupledRun(perm, lam, i, M, X, Y, np.cumsum(X), np.cumsum(Y), open_before,
                      unif, G_proc, G_i, open_at_i)


def sample_binomial_graph(n: int, p_prime: float, seed: int, run_index: int = 0,
                          ell: int | None = None, classify: bool = False) -> PairStateGraph:
    """G(n, p'): every pair independently an edge with probability p'."""
    if not 0 <= p_prime <= 1:
        raise DomainError("p_prime must lie in [0, 1]")
    rng = make_rng(seed, run_index)
    g = PairStateGraph(n, ell, classified=False)
    hits = np.flatnonzero(rng.random(g.npairs) < p_prime)
    for r in hits:
        g.add_edge(*g.unrank(int(r)))
    if classify and ell is not None:
        from .graph import recompute_pair_states
        g.state[g.state == K.UNKNOWN] = K.OPEN
        recompute_pair_states(g, ell)
    return g
