"""Replay drivers shared by the config and acceptance tests."""
from __future__ import annotations

import oracles as O
from clfree.config import Configuration, LedgerTracker, Thresholds, TupleLedger
from clfree.process import ProcessRun


class OracleLedger:
    """Observer mirroring a package ledger with the brute-force rules and comparing every step."""

    def __init__(self, n, ell, sigma: Configuration, r2, package_ledger: TupleLedger):
        self.n, self.ell, self.sigma, self.r2 = n, ell, sigma, r2
        self.adj = O.adjacency(n, [])
        self.levels = O.ledger_initial(n, ell, sigma.A, sigma.B, sigma.R, sigma.r)
        self.ignored = 0
        self.led = package_ledger
        self.mismatch = None
        self.steps = 0

    def before_step(self, run, pair):
        # the package tracker runs first, so its ledger already holds the post-update sets
        s = self.sigma
        self.levels, ig = O.ledger_step(self.adj, self.levels, pair, self.ell, s.A, s.B, s.R, s.r, self.r2)
        self.ignored += ig
        self.steps += 1
        if self.mismatch is None:
            if self.levels != self.led.levels or self.ignored != self.led.ignored_count:
                self.mismatch = (run.graph.step + 1, [len(x) for x in self.levels], self.led.level_counts(),
                                 self.ignored, self.led.ignored_count)

    def after_step(self, run, rec):
        x, y = rec.chosen_pair
        self.adj[x].add(y)
        self.adj[y].add(x)


def replay_against_oracle(params, sigma, seed, r2=None, validate=True, max_steps=None):
    """Run the process to termination with a package ledger and the rule oracle side by side."""
    th = Thresholds.from_params(params, r2=r2)
    led = TupleLedger(sigma, params, th)
    tracker = LedgerTracker([led], validate=validate)
    orc = OracleLedger(params.n, params.ell, sigma, th.r2, led)
    run = ProcessRun(params, seed=seed)
    if max_steps is None:
        run.run_to_termination([tracker, orc])
    else:
        run.run_to(max_steps, [tracker, orc])
    return run, led, tracker, orc
