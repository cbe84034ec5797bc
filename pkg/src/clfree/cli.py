"""Command-line harness: simulate, scaling, transfer, properties, track, verify-ode, rerun.

Exit codes: 0 ok, 1 a check failed, 2 bad flags, 3 infeasible parameters.
Runs fan out over a process pool; every file is written by the parent
process. CSV bodies depend only on the flags, so a manifest re-run
reproduces them byte for byte; timestamps and timings live in the manifest.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    Configuration, LedgerTracker, Thresholds, TupleLedger, check_bad_events, extension_violations,
    find_good_configuration, ignored_diagnostics,
)
from .dem import HistoryRecorder, trajectory_report, verify_ode_identities
from .errors import ClfreeError, ConstraintViolation, DomainError, InfeasibleConfiguration
from .gnp import DECREASING_PROPERTIES, check_codegree, check_degree_D, greedy_independent_subset
from .graph import PairStateGraph
from .params import SIM_DEFAULTS, Mode, ProcessParams, derive_params, eval_f, eval_q
from .process import ProcessRun, RunMode, run_coupled
from .svg import emit_svg

log = logging.getLogger("clfree")

EXIT_OK, EXIT_CHECK, EXIT_FLAGS, EXIT_INFEASIBLE = 0, 1, 2, 3

SIMULATE_SCHEMA = "clfree-simulate-v1"
SCALING_SCHEMA = "clfree-scaling-v1"
TRANSFER_SCHEMA = "clfree-transfer-v1"
TRACK_SCHEMA = "clfree-track-v1"
MANIFEST_SCHEMA = "clfree-manifest-v1"

ODE_TOL = {"max_rel_error_derivative": 1e-6, "max_rel_error_derivative_closed_form": 1e-9,
           "max_rel_error_integral": 1e-6}


class BadFlags(ClfreeError):
    pass


class Infeasible(ClfreeError):
    pass


# ---------------------------------------------------------------------------
# helpers

def git_blob_hash(data: bytes) -> str:
    """Content hash as computed by `git hash-object`."""
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _params(a) -> ProcessParams:
    try:
        return derive_params(a.n, a.ell, a.param_mode, mu_hat=a.mu_hat, eps_hat=a.eps_hat, W_hat=a.W_hat,
                             gamma_hat=a.gamma_hat, k_hat=a.k_hat)
    except (DomainError, ConstraintViolation) as exc:
        raise Infeasible(str(exc)) from exc


def _csv_text(schema: str, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(f"# {schema}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if not math.isfinite(v) else repr(v)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return sorted(_jsonable(v) for v in obj)
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, Mode):
        return obj.value
    return obj


def _dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


class Writer:
    """The single writer: every output file goes through here and gets hashed."""

    def __init__(self, out: Path | None):
        self.out = out
        self.hashes: dict[str, str] = {}
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        data = text.encode()
        self.hashes[name] = git_blob_hash(data)
        if self.out is not None:
            (self.out / name).write_bytes(data)

    def manifest(self, command: str, argv: list[str], a, params=None, extra=None) -> dict:
        m = {
            "schema": MANIFEST_SCHEMA,
            "version": __version__,
            "command": command,
            "argv": argv,
            "params": params.to_dict() if params is not None else None,
            "master_seed": getattr(a, "seed", None),
            "run_count": getattr(a, "runs", None),
            "out_dir": str(self.out) if self.out is not None else None,
            "files": dict(sorted(self.hashes.items())),
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        if extra:
            m.update(extra)
        if self.out is not None:
            (self.out / "manifest.json").write_text(_dumps(m))
        return m


def _pool_map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(fn, jobs))


# ---------------------------------------------------------------------------
# simulate

def _auto_sigma(g: PairStateGraph, params, v_tilde=None, U=None, A=None, B=None, rank: int = 0):
    """A configuration for G: v~ is the rank-th highest-degree vertex, U its neighbours padded to u."""
    if v_tilde is None:
        order = sorted(g.vertices, key=lambda v: (-g.degree(v), v))
        v_tilde = order[rank]
    if U is None:
        nb = sorted(g.adj[v_tilde])[: params.u]
        pad = [v for v in g.vertices if v != v_tilde and v not in g.adj[v_tilde]]
        U = nb + pad[: params.u - len(nb)]
    if A is not None and B is not None:
        return Configuration.make(v_tilde, U, A, B, (), params), {}
    return find_good_configuration(g, v_tilde, U, params)


def _make_ledger(sigma, params, a, seed):
    th = Thresholds.from_params(params, r2=a.r2)
    caps = None
    if a.ledger_cap:
        caps = {"A": a.ledger_cap, "B": a.ledger_cap, "V": a.ledger_cap}
    return TupleLedger(sigma, params, th, caps=caps, seed=seed)


def _simulate_one(job) -> dict:
    a, run_index = job
    params = _params(a)
    run = ProcessRun(params, a.seed, run_index, RunMode(a.engine))
    track = set(a.track)
    tracker = None
    if "tuples" in track:
        try:
            sigma, _ = _auto_sigma(run.graph, params)
            tracker = LedgerTracker([_make_ledger(sigma, params, a, a.seed)])
        except (InfeasibleConfiguration, DomainError) as exc:
            raise Infeasible(f"tuple tracking: {exc}") from exc
    sample, every = None, 0
    if "closed" in track:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([a.seed, run_index, 1])))
        ranks = rng.choice(run.graph.npairs, size=min(a.closed_sample, run.graph.npairs), replace=False)
        sample = [run.graph.unrank(int(r)) for r in sorted(ranks)]
        every = a.closed_every or max(1, params.m // 200)
    rec = HistoryRecorder(params, sample, every, tracker)
    rec.start(run)
    hooks = [h for h in (tracker, rec) if h is not None]
    steps = run.graph.npairs if a.to_termination else (a.max_steps if a.max_steps is not None else params.m)
    summ = run.run_to(steps, hooks)

    s = rec.series
    ell, n = params.ell, params.n
    i = np.array([r[0] for r in s["open_pairs"]], dtype=float)
    t = i / params.n2p
    q_pred = eval_q(t, ell) * n * (n - 1) / 2
    open_cnt = np.array([r[1] for r in s["open_pairs"]], dtype=float)
    known = open_cnt >= 0
    band = 3 * eval_f(t, ell, params.W) / params.s_e * q_pred
    with np.errstate(divide="ignore", invalid="ignore"):
        resid = np.where(known & (band > 0), (open_cnt - q_pred) / band, np.nan)
    new_closed = {r[0]: r[1] for r in s["new_closed"]}
    closed = dict(s.get("closed_family_size", []))
    header = ["i", "t", "open_count", "q_pred", "open_resid", "max_degree", "new_closed_count"]
    tup = []
    if tracker is not None:
        tup = [s[f"tuple_count({j})"] for j in range(ell - 2)]
        header += [f"tuple_j{j}" for j in range(ell - 2)] + ["ignored"]
        ignored = [0] + [row[0]["ignored"] for row in tracker.rows]
    if sample is not None:
        header.append("closed_family_mean")
    eager = run.mode is RunMode.EAGER
    rows = []
    for idx in range(i.size):
        step = int(i[idx])
        row = [step, _cell(t[idx]), _cell(int(open_cnt[idx]) if known[idx] else None), _cell(q_pred[idx]),
               _cell(resid[idx]), _cell(int(s["degree_max"][idx][1])),
               _cell(new_closed.get(step) if eager and step > 0 else None)]
        if tracker is not None:
            row += [_cell(c[idx][1]) for c in tup] + [_cell(ignored[idx])]
        if sample is not None:
            row.append(_cell(closed.get(step)))
        rows.append(row)
    summary = summ.to_dict()
    wall = summary.pop("wall_time")
    summary.update({"run_index": run_index, "seed": a.seed, "engine": a.engine})
    if tracker is not None:
        led = tracker.ledgers[0]
        summary["ledger"] = led.snapshot()
        summary["ut_violations"] = led.ut_violations
    out = {"run_index": run_index, "csv": _csv_text(SIMULATE_SCHEMA, header, rows), "summary": summary,
           "edges": run.graph.to_edge_list_text(), "wall": wall, "svg": None}
    if a.svg and eager:
        out["svg"] = emit_svg(trajectory_report(rec, "open_pairs", params=params))
    return out


def cmd_simulate(a, argv) -> int:
    params = _params(a)
    if a.runs < 1:
        raise BadFlags("--runs must be >= 1")
    bad = set(a.track) - {"open", "degree", "closed", "tuples"}
    if bad:
        raise BadFlags(f"unknown --track entries: {sorted(bad)}")
    if "open" in a.track and a.engine == "rejection":
        log.warning("rejection engine does not know |O(i)|; open columns stay empty")
    results = _pool_map(_simulate_one, [(a, r) for r in range(a.runs)], a.workers)
    w = Writer(a.out)
    for res in sorted(results, key=lambda r: r["run_index"]):
        k = res["run_index"]
        w.write(f"run_{k}.csv", res["csv"])
        w.write(f"run_{k}.json", _dumps(res["summary"]))
        w.write(f"run_{k}.edges", res["edges"])
        if res["svg"] is not None:
            w.write(f"run_{k}_open.svg", res["svg"])
    timings = {f"run_{r['run_index']}": r["wall"] for r in results}
    w.manifest("simulate", argv, a, params, {"timings": timings})
    for res in results:
        print(json.dumps(_jsonable(res["summary"]), sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# scaling

def fit_scaling(ns, values, ell: int) -> dict:
    """Least-squares slope of ln(value / (ln n)^(1/(l-1))) against ln n."""
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.unique(ns).size < 3:
        raise BadFlags("a scaling fit needs at least 3 distinct sizes")
    x = np.log(ns)
    y = np.log(values / np.log(ns) ** (1.0 / (ell - 1)))
    X = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(X, y, rcond=None)
    pred = slope * x + intercept
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - pred) ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r_squared": r2}


def _scaling_one(job) -> dict:
    a, n, run_index = job
    params = derive_params(n, a.ell, a.param_mode, mu_hat=a.mu_hat, eps_hat=a.eps_hat, W_hat=a.W_hat)
    run = ProcessRun(params, a.seed, run_index, RunMode(a.engine))
    s = run.run_to_termination()
    return {"n": n, "run_index": run_index, "final_edges": s.final_edges, "max_degree": s.max_degree,
            "wall": s.wall_time}


def cmd_scaling(a, argv) -> int:
    sizes = a.n_list
    if len(set(sizes)) < 3:
        raise BadFlags("--n-list needs at least 3 distinct sizes")
    for n in sizes:
        try:
            derive_params(n, a.ell, a.param_mode, mu_hat=a.mu_hat, eps_hat=a.eps_hat, W_hat=a.W_hat)
        except (DomainError, ConstraintViolation) as exc:
            raise Infeasible(str(exc)) from exc
    jobs = [(a, n, run) for n in sizes for run in range(a.runs)]
    # biggest sizes first keeps the pool busy
    order = sorted(range(len(jobs)), key=lambda j: -jobs[j][1])
    done = _pool_map(_scaling_one, [jobs[j] for j in order], a.workers)
    results = sorted(done, key=lambda r: (r["n"], r["run_index"]))
    rows = [[r["n"], r["run_index"], r["final_edges"], r["max_degree"]] for r in results]
    ns = sorted(set(sizes))
    med_e = [float(np.median([r["final_edges"] for r in results if r["n"] == n])) for n in ns]
    med_d = [float(np.median([r["max_degree"] for r in results if r["n"] == n])) for n in ns]
    fe, fd = fit_scaling(ns, med_e, a.ell), fit_scaling(ns, med_d, a.ell)
    norm = [math.log(n) ** (1.0 / (a.ell - 1)) for n in ns]
    table = {"n": ns, "median_edges": med_e, "median_max_degree": med_d,
             "edges": [e / z for e, z in zip(med_e, norm)], "degree": [d / z for d, z in zip(med_d, norm)],
             "fits": {"edges": fe, "degree": fd}}
    record = {"fitted_exponent_edges": fe["slope"], "fitted_exponent_maxdeg": fd["slope"],
              "r_squared": {"edges": fe["r_squared"], "maxdeg": fd["r_squared"]},
              "target_edges": a.ell / (a.ell - 1), "target_maxdeg": 1 / (a.ell - 1), "table": table}
    w = Writer(a.out)
    w.write("scaling_runs.csv", _csv_text(SCALING_SCHEMA, ["n", "run", "final_edges", "max_degree"], rows))
    w.write("scaling.json", _dumps(record))
    if a.svg:
        w.write("scaling_edges.svg", emit_svg(table, which="edges"))
        w.write("scaling_degree.svg", emit_svg(table, which="degree"))
    w.manifest("scaling", argv, a, None, {"timings": {f"n{r['n']}_run{r['run_index']}": r["wall"] for r in results}})
    print(json.dumps(_jsonable({k: v for k, v in record.items() if k != "table"}), sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# transfer

def _transfer_chunk(job) -> list[dict]:
    a, lo, hi = job
    params = _params(a)
    prop = DECREASING_PROPERTIES[a.property]
    threshold = params.n ** 2 / a.lam
    out = []
    for trial in range(lo, hi):
        c = run_coupled(params, a.lam, a.i, a.seed, trial)
        q_unif = bool(prop(c.G_unif, params))
        q_proc = bool(prop(c.G_i, params)) if c.G_i is not None else None
        covered = c.XM >= a.i
        subset = c.subset_holds() if covered else None
        out.append({
            "trial": trial, "XM": c.XM, "YM": c.YM, "open_at_i": c.open_at_i,
            "proc_fail": c.G_i is not None and not q_proc and c.open_at_i >= threshold,
            "unif_fail": not q_unif,
            "y_short": c.YM < a.i,
            "covered": covered,
            "subset": subset,
            # a decreasing property of G(n,M) must pass to any subgraph
            "transfer_broken": bool(covered and subset and q_unif and q_proc is False),
        })
    return out


def cmd_transfer(a, argv) -> int:
    if a.property not in DECREASING_PROPERTIES:
        raise BadFlags(f"unknown property {a.property!r}; choose from {sorted(DECREASING_PROPERTIES)}")
    params = _params(a)
    npairs = params.n * (params.n - 1) // 2
    if a.lam < 2 or not 1 <= a.i <= npairs / a.lam:
        raise BadFlags(f"need lambda >= 2 and 1 <= i <= {npairs / max(a.lam, 1):g}")
    if a.trials < 1:
        raise BadFlags("--trials must be >= 1")
    chunk = max(1, math.ceil(a.trials / max(1, a.workers * 4)))
    jobs = [(a, lo, min(lo + chunk, a.trials)) for lo in range(0, a.trials, chunk)]
    rows = sorted((r for part in _pool_map(_transfer_chunk, jobs, a.workers) for r in part),
                  key=lambda r: r["trial"])
    T = len(rows)

    def freq(key):
        return sum(1 for r in rows if r[key]) / T

    covered = [r for r in rows if r["covered"]]
    violations = sum(1 for r in covered if not r["subset"])
    f_short = freq("y_short")
    bound = math.exp(-a.i / 4)
    # standard error of a frequency whose true value sits exactly at the bound
    se = math.sqrt(bound * (1 - bound) / T)
    record = {
        "trials": T, "property": a.property, "lambda": a.lam, "i": a.i, "M": int(a.i * a.lam),
        "freq_proc_fail_and_open_large": freq("proc_fail"),
        "freq_unif_fail": freq("unif_fail"),
        "freq_YM_below_i": f_short,
        "bound_exp_minus_i_over_4": bound,
        "binomial_se": se,
        "YM_within_bound": f_short <= bound + 3 * se,
        "covered_trials": len(covered),
        "subset_violations": violations,
        "transfer_violations": sum(1 for r in rows if r["transfer_broken"]),
    }
    header = ["trial", "XM", "YM", "open_at_i", "proc_fail", "unif_fail", "y_short", "covered", "subset"]
    body = [[r["trial"], r["XM"], r["YM"], r["open_at_i"], int(r["proc_fail"]), int(r["unif_fail"]),
             int(r["y_short"]), int(r["covered"]), "" if r["subset"] is None else int(r["subset"])] for r in rows]
    w = Writer(a.out)
    w.write("transfer_trials.csv", _csv_text(TRANSFER_SCHEMA, header, body))
    w.write("transfer.json", _dumps(record))
    w.manifest("transfer", argv, a, params)
    print(json.dumps(_jsonable(record), sort_keys=True))
    ok = violations == 0 and record["transfer_violations"] == 0 and record["YM_within_bound"]
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# properties

def cmd_properties(a, argv) -> int:
    try:
        g = PairStateGraph.read_edge_list(a.graph, classified=False)
    except (OSError, ValueError) as exc:
        raise BadFlags(f"cannot read graph {a.graph}: {exc}") from exc
    a.n = g.n
    if a.ell is None:
        a.ell = g.ell or 4
    verdicts = {}
    for name in a.check:
        if name == "codegree":
            verdicts[name] = check_codegree(g)
        elif name == "degree_D":
            verdicts[name] = check_degree_D(g, _params(a))
        elif name == "independent":
            U = a.U if a.U else list(g.vertices)
            res = greedy_independent_subset(g, U)
            S = res["S"]
            independent = not any(g.adj[v] & S for v in S)
            verdicts[name] = {"name": name, "holds": independent and (res["premise_failed"]
                                                                      or len(S) >= math.ceil(len(U) / 6)),
                              "value": len(S), "bound": math.ceil(len(U) / 6), "S": S,
                              "premise_failed": res["premise_failed"]}
        else:
            raise BadFlags(f"unknown check {name!r}")
    text = _dumps({"graph": str(a.graph), "n": g.n, "edges": len(g.edge_list), "verdicts": verdicts})
    w = Writer(a.out)
    w.write("properties.json", text)
    if a.out is not None:
        w.manifest("properties", argv, a)
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# track

def cmd_track(a, argv) -> int:
    params = _params(a)
    run = ProcessRun(params, a.seed, a.run_index, RunMode.EAGER)
    run.run_to(a.at_step)
    g0 = run.graph
    sigmas, records = [], []
    try:
        if a.v_tilde is not None or a.U:
            sigma, rec = _auto_sigma(g0, params, a.v_tilde, a.U or None, a.A or None, a.B or None)
            sigmas.append(sigma)
            records.append(rec)
        for rank in range(len(sigmas), a.configs):
            sigma, rec = _auto_sigma(g0, params, rank=rank)
            sigmas.append(sigma)
            records.append(rec)
        ledgers = [_make_ledger(s, params, a, a.seed) for s in sigmas]
    except (InfeasibleConfiguration, DomainError) as exc:
        raise Infeasible(f"configuration: {exc}") from exc
    if any(led.level_counts()[0] == 0 for led in ledgers):
        log.warning("a configuration has an empty tuple product")
    tracker = LedgerTracker(ledgers, validate=a.validate)
    steps = run.graph.npairs if a.to_termination else (a.max_steps if a.max_steps is not None else params.m)
    start = run.graph.step
    first = [start]
    for led in ledgers:
        first += [_cell(v) for v in led.scaled_counts()] + [led.ignored_count]
    run.run_to(steps, [tracker])
    top = params.ell - 3
    header = ["i"]
    for c in range(len(ledgers)):
        header += [f"c{c}_tuple_j{j}" for j in range(top + 1)] + [f"c{c}_ignored"]
    rows = [first]
    for r in tracker.rows:
        row = [r["i"]]
        for c in range(len(ledgers)):
            row += [_cell(v) for v in r[c]["counts"]] + [r[c]["ignored"]]
        rows.append(row)
    g = run.graph
    bound = 1 + 2 * params.ell * ledgers[0].th.r2
    report = {"at_step": start, "final_step": g.step, "terminated": run.terminated,
              "max_top_removed": tracker.max_top_removed, "top_removal_bound": bound, "configs": []}
    ut_total = 0
    for sigma, rec, led in zip(sigmas, records, ledgers):
        ut = extension_violations(led)
        ut_total += ut + led.ut_violations
        entry = {"sigma": sigma.to_dict(), "sampled": led.sampled, "scale": led.scale,
                 "snapshot": led.snapshot(check_bad_events(g, sigma, params, led.th) if a.bad_events else None),
                 "ut_violations": ut, "ut_violations_online": led.ut_violations,
                 "ignored_diagnostics": ignored_diagnostics(g, sigma, led, params, led.th) if a.diagnostics else None,
                 "record": {k: v for k, v in rec.items() if k not in ("P1", "P2")}}
        report["configs"].append(entry)
    w = Writer(a.out)
    w.write("track.csv", _csv_text(TRACK_SCHEMA, header, rows))
    w.write("track.json", _dumps(report))
    w.manifest("track", argv, a, params)
    print(json.dumps({"final_step": g.step, "ut_violations": ut_total,
                      "level_counts": [led.level_counts() for led in ledgers]}, sort_keys=True))
    return EXIT_OK if ut_total == 0 else EXIT_CHECK


# ---------------------------------------------------------------------------
# verify-ode

def cmd_verify_ode(a, argv) -> int:
    results = []
    ok = True
    for ell in a.ell:
        if ell < 4:
            raise Infeasible(f"ell must be >= 4, got {ell}")
        r = verify_ode_identities(ell, a.grid_step, a.t_end, a.W_hat)
        r["holds"] = all(r[k] <= tol for k, tol in ODE_TOL.items())
        ok = ok and r["holds"]
        results.append(r)
    text = _dumps({"tolerances": ODE_TOL, "results": results})
    w = Writer(a.out)
    w.write("verify_ode.json", text)
    if a.out is not None:
        w.manifest("verify-ode", argv, a)
    for r in results:
        print(f"ell={r['ell']} derivative_fd={r['max_rel_error_derivative']:.3e} "
              f"derivative_closed={r['max_rel_error_derivative_closed_form']:.3e} "
              f"integral={r['max_rel_error_integral']:.3e} {'ok' if r['holds'] else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# rerun

def cmd_rerun(a, argv) -> int:
    try:
        m = json.loads(Path(a.manifest).read_text())
    except (OSError, ValueError) as exc:
        raise BadFlags(f"cannot read manifest: {exc}") from exc
    old = m["argv"]
    new = []
    skip = False
    for tok in old:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        new.append(tok)
    new += ["--out", str(a.out)]
    code = main(new)
    if code != EXIT_OK:
        return code
    fresh = json.loads((Path(a.out) / "manifest.json").read_text())["files"]
    diff = sorted(k for k in set(m["files"]) | set(fresh) if m["files"].get(k) != fresh.get(k))
    if diff:
        print("mismatched files: " + ", ".join(diff))
        return EXIT_CHECK
    print(f"reproduced {len(fresh)} files")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing

def _add_param_flags(p, need_n=True):
    if need_n:
        p.add_argument("--n", type=int, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--param-mode", choices=[m.value for m in Mode], default=Mode.SIMULATION.value)
    p.add_argument("--mu-hat", type=float, default=SIM_DEFAULTS["mu_hat"])
    p.add_argument("--eps-hat", type=float, default=SIM_DEFAULTS["eps_hat"])
    p.add_argument("--W-hat", dest="W_hat", type=float, default=SIM_DEFAULTS["W_hat"])
    p.add_argument("--gamma-hat", type=float, default=None)
    p.add_argument("--k-hat", type=int, default=None)


def _add_common(p, seed=True):
    p.add_argument("--config", help="key-value file; explicit flags win")
    p.add_argument("--out", type=Path, default=None)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    if seed:
        p.add_argument("--seed", type=int, default=0)


def _add_steps(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--max-steps", type=int, default=None, help="default: the step budget m")
    g.add_argument("--to-termination", action="store_true")


def _add_ledger_flags(p):
    p.add_argument("--ledger-cap", type=int, default=0, help="subsample each tuple class to this size (0 = exact)")
    p.add_argument("--r2", type=float, default=None, help="override the (R2) size threshold")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clfree", description="C_l-free process simulator and checks")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run the process and write per-step CSVs")
    _add_param_flags(p)
    _add_common(p)
    _add_steps(p)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--engine", choices=[m.value for m in RunMode], default=RunMode.EAGER.value)
    p.add_argument("--track", type=lambda s: [v for v in s.split(",") if v], default=["open", "degree"])
    p.add_argument("--closed-sample", type=int, default=20)
    p.add_argument("--closed-every", type=int, default=0)
    p.add_argument("--svg", action="store_true")
    _add_ledger_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scaling", help="final size and max degree against n")
    _add_param_flags(p, need_n=False)
    _add_common(p)
    p.add_argument("--n-list", type=_int_list, required=True)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--engine", choices=[m.value for m in RunMode], default=RunMode.EAGER.value)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("transfer", help="coupling with G(n,M) and property transfer")
    _add_param_flags(p)
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--i", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--property", default="always_true")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("properties", help="check graph properties of an edge-list file")
    _add_common(p, seed=False)
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--ell", type=int, default=None)
    p.add_argument("--param-mode", choices=[m.value for m in Mode], default=Mode.SIMULATION.value)
    p.add_argument("--mu-hat", type=float, default=SIM_DEFAULTS["mu_hat"])
    p.add_argument("--eps-hat", type=float, default=SIM_DEFAULTS["eps_hat"])
    p.add_argument("--W-hat", dest="W_hat", type=float, default=SIM_DEFAULTS["W_hat"])
    p.add_argument("--gamma-hat", type=float, default=None)
    p.add_argument("--k-hat", type=int, default=None)
    p.add_argument("--check", type=lambda s: [v for v in s.split(",") if v], default=["codegree"])
    p.add_argument("--U", type=_int_list, default=None)
    p.set_defaults(func=cmd_properties)

    p = sub.add_parser("track", help="replay a run while maintaining tuple ledgers")
    _add_param_flags(p)
    _add_common(p)
    _add_steps(p)
    _add_ledger_flags(p)
    p.add_argument("--run-index", type=int, default=0)
    p.add_argument("--at-step", type=int, default=0, help="build configurations on G(at-step)")
    p.add_argument("--configs", type=int, default=1)
    p.add_argument("--v-tilde", type=int, default=None)
    p.add_argument("--U", type=_int_list, default=None)
    p.add_argument("--A", type=_int_list, default=None)
    p.add_argument("--B", type=_int_list, default=None)
    p.add_argument("--exact", action="store_true", help="exact ledgers (the default unless --ledger-cap)")
    p.add_argument("--validate", action="store_true")
    p.add_argument("--bad-events", action="store_true")
    p.add_argument("--diagnostics", action="store_true")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("verify-ode", help="numeric check of the trajectory identities")
    _add_common(p, seed=False)
    p.add_argument("--ell", type=_int_list, required=True)
    p.add_argument("--grid-step", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=2.0)
    p.add_argument("--W-hat", dest="W_hat", type=float, default=1.0)
    p.set_defaults(func=cmd_verify_ode)

    p = sub.add_parser("rerun", help="re-execute a manifest and compare content hashes")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_rerun)
    return ap


def _config_tokens(parser: argparse.ArgumentParser, command: str, path: str) -> list[str]:
    """Turn `key = value` lines into flag tokens for the given subcommand."""
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction)).choices[command]
    tokens = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.replace("=", " ", 1).partition(" ")
        flag = "--" + key.strip().replace("_", "-")
        action = sub._option_string_actions.get(flag) or sub._option_string_actions.get("--" + key.strip())
        if action is None or flag in ("--config", "--out"):
            raise BadFlags(f"{path}:{lineno}: unknown key {key!r}")
        value = value.strip()
        if action.nargs == 0:
            if value.lower() in ("", "1", "true", "yes", "on"):
                tokens.append(action.option_strings[-1])
            elif value.lower() not in ("0", "false", "no", "off"):
                raise BadFlags(f"{path}:{lineno}: {key} takes true/false")
        else:
            tokens += [action.option_strings[-1], value]
    return tokens


def _expand_config(parser, argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise BadFlags("--config needs a file")
    path = argv[idx + 1]
    rest = argv[:idx] + argv[idx + 2:]
    cmd = next((t for t in rest if not t.startswith("-")), None)
    if cmd is None:
        raise BadFlags("--config needs a subcommand")
    at = rest.index(cmd) + 1
    # config values first so explicit flags after them win
    return rest[:at] + _config_tokens(parser, cmd, path) + rest[at:]


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(parser, argv)
        a = parser.parse_args(argv)
    except BadFlags as exc:
        print(f"clfree: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except OSError as exc:
        print(f"clfree: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(a, "workers", 1) < 1:
        print("clfree: --workers must be >= 1", file=sys.stderr)
        return EXIT_FLAGS
    try:
        return a.func(a, argv)
    except BadFlags as exc:
        print(f"clfree: {exc}", file=sys.stderr)
        return EXIT_FLAGS
    except (Infeasible, InfeasibleConfiguration) as exc:
        print(f"clfree: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
