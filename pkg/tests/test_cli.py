import csv
import hashlib
import itertools
import json
import math
import subprocess
import sys

import pytest

import oracles as O
from clfree.cli import BadFlags, fit_scaling, git_blob_hash, main
from clfree.config import Configuration, Thresholds
from clfree.params import ProcessParams
from clfree.process import ProcessRun


def _read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.DictReader(lines[1:]))


def test_exit_codes(tmp_path):
    assert main(["simulate", "--n", "10", "--ell", "11", "--out", str(tmp_path / "a")]) == 3
    assert main(["simulate", "--n", "30", "--ell", "4", "--bogus"]) == 2
    assert main(["simulate", "--n", "30", "--ell", "4", "--workers", "0"]) == 2
    assert main(["properties", "--graph", str(tmp_path / "missing.edges")]) == 2
    assert main([]) == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "clfree", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip()


def test_git_blob_hash():
    data = b"hello\n"
    assert git_blob_hash(data) == hashlib.sha1(b"blob 6\0hello\n").hexdigest()
    assert git_blob_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"


def test_simulate_determinism_and_rerun(tmp_path):
    argv = ["simulate", "--n", "40", "--ell", "4", "--runs", "2", "--seed", "7", "--to-termination",
            "--workers", "1", "--track", "open,degree,closed"]
    assert main(argv + ["--out", str(tmp_path / "a")]) == 0
    assert main(argv + ["--out", str(tmp_path / "b")]) == 0
    a0 = (tmp_path / "a" / "run_0.edges").read_text()
    a1 = (tmp_path / "a" / "run_1.edges").read_text()
    assert a0 != a1
    for name in ("run_0.csv", "run_1.csv", "run_0.json", "run_0.edges"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    schema, rows = _read_csv(tmp_path / "a" / "run_0.csv")
    assert schema == "# clfree-simulate-v1"
    assert list(rows[0])[:7] == ["i", "t", "open_count", "q_pred", "open_resid", "max_degree", "new_closed_count"]
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["schema"] == "clfree-manifest-v1"
    for name, h in man["files"].items():
        assert git_blob_hash((tmp_path / "a" / name).read_bytes()) == h
    assert main(["rerun", str(tmp_path / "a" / "manifest.json"), "--out", str(tmp_path / "c")]) == 0


def test_simulate_output_is_maximal(tmp_path):
    assert main(["simulate", "--n", "50", "--ell", "4", "--to-termination", "--seed", "3",
                 "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "run_0.json").read_text())
    assert summary["terminated"] is True
    rows = [ln.split() for ln in (tmp_path / "run_0.edges").read_text().splitlines()]
    assert rows[0] == ["50", str(len(rows) - 1), "4"]
    edges = [(int(x), int(y)) for x, y in rows[1:]]
    adj = O.adjacency(50, edges)
    assert not O.has_cycle(adj, 4)
    for x, y in itertools.combinations(range(1, 51), 2):
        if y not in adj[x]:
            assert O.count_paths(adj, x, y, 3) > 0


def test_simulate_matches_library(tmp_path):
    assert main(["simulate", "--n", "40", "--ell", "5", "--max-steps", "30", "--seed", "2",
                 "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    run = ProcessRun(ProcessParams.from_dict(man["params"]), seed=2, run_index=0)
    run.run_to(30)
    _, rows = _read_csv(tmp_path / "run_0.csv")
    assert int(rows[-1]["i"]) == 30
    assert int(rows[-1]["open_count"]) == run.open_count
    assert int(rows[-1]["max_degree"]) == run.graph.max_degree


def test_config_file_merge(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# defaults\nn = 40\nell = 4\nmax_steps = 10\nseed = 5\n")
    assert main(["simulate", "--config", str(cfg), "--max-steps", "12", "--out", str(tmp_path / "o")]) == 0
    _, rows = _read_csv(tmp_path / "o" / "run_0.csv")
    assert int(rows[-1]["i"]) == 12
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["params"]["n"] == 40 and man["master_seed"] == 5
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert main(["simulate", "--config", str(bad), "--n", "30", "--ell", "4"]) == 2


def test_fit_scaling_synthetic():
    ell = 4
    ns = [400, 800, 1600, 3200]
    vals = [3.7 * n ** (4 / 3) * math.log(n) ** (1 / 3) for n in ns]
    fit = fit_scaling(ns, vals, ell)
    assert abs(fit["slope"] - 4 / 3) <= 1e-12
    assert abs(fit["intercept"] - math.log(3.7)) <= 1e-10
    assert fit["r_squared"] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(BadFlags):
        fit_scaling([400, 400, 400], [1.0, 2.0, 3.0], ell)


def test_scaling_single_size(tmp_path):
    assert main(["scaling", "--n-list", "100", "--ell", "4", "--out", str(tmp_path)]) == 2


def test_scaling_small(tmp_path):
    assert main(["scaling", "--n-list", "60,90,120", "--ell", "4", "--runs", "2", "--workers", "1",
                 "--out", str(tmp_path), "--svg"]) == 0
    rec = json.loads((tmp_path / "scaling.json").read_text())
    assert {"fitted_exponent_edges", "fitted_exponent_maxdeg", "r_squared"} <= set(rec)
    assert (tmp_path / "scaling_runs.csv").read_text().startswith("# clfree-scaling-v1\n")


def test_properties_empty_graph(tmp_path):
    g = tmp_path / "empty.edges"
    g.write_text("12 0 0\n")
    assert main(["properties", "--graph", str(g), "--check", "codegree,independent", "--out",
                 str(tmp_path / "o")]) == 0
    res = json.loads((tmp_path / "o" / "properties.json").read_text())
    assert res["verdicts"]["codegree"]["holds"] is True
    assert res["verdicts"]["independent"]["value"] == 12
    assert main(["properties", "--graph", str(g), "--check", "nope"]) == 2


def test_verify_ode(tmp_path):
    assert main(["verify-ode", "--ell", "5", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "verify_ode.json").read_text())
    assert res["results"][0]["holds"] is True


def test_transfer_always_true(tmp_path):
    assert main(["transfer", "--n", "40", "--ell", "4", "--lambda", "4", "--i", "20", "--trials", "20",
                 "--workers", "1", "--out", str(tmp_path)]) == 0
    rec = json.loads((tmp_path / "transfer.json").read_text())
    assert rec["freq_proc_fail_and_open_large"] == 0 and rec["freq_unif_fail"] == 0
    assert rec["subset_violations"] == 0
    assert main(["transfer", "--n", "40", "--ell", "4", "--lambda", "4", "--i", "20", "--property", "nope"]) == 2


def test_track_matches_rule_oracle(tmp_path):
    assert main(["track", "--n", "80", "--ell", "4", "--exact", "--seed", "1", "--out", str(tmp_path)]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    prm = ProcessParams.from_dict(man["params"])
    rep = json.loads((tmp_path / "track.json").read_text())
    sd = rep["configs"][0]["sigma"]
    sigma = Configuration.make(sd["v_tilde"], sd["U"], sd["A"], sd["B"], sd["R"], prm, sd["I_A"], sd["I_B"])
    r2 = Thresholds.from_params(prm).r2
    _, rows = _read_csv(tmp_path / "track.csv")

    adj = O.adjacency(80, [])
    levels = O.ledger_initial(80, 4, sigma.A, sigma.B, sigma.R, sigma.r)
    ignored = 0
    seen = [[len(x) for x in levels] + [ignored]]

    def step(run, rec):
        nonlocal levels, ignored
        levels, ig = O.ledger_step(adj, levels, rec.chosen_pair, 4, sigma.A, sigma.B, sigma.R, sigma.r, r2)
        ignored += ig
        x, y = rec.chosen_pair
        adj[x].add(y)
        adj[y].add(x)
        seen.append([len(s) for s in levels] + [ignored])

    ProcessRun(prm, seed=1).run_to(rep["final_step"], [step])
    got = [[int(float(r["c0_tuple_j0"])), int(float(r["c0_tuple_j1"])), int(r["c0_ignored"])] for r in rows]
    assert got == seen
    assert rep["configs"][0]["ut_violations"] == 0
