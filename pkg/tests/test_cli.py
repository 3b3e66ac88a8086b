import json
from importlib import resources
from pathlib import Path

import pytest

from qmasat.cli import EXIT_CHECK, EXIT_OK, EXIT_PARSE, EXIT_PRECONDITION, main
from qmasat.analysis import wilson_interval

INST = resources.files("qmasat").joinpath("data/instances")


def inst(name):
    return str(INST.joinpath(name))


def read(p):
    return Path(p).read_bytes()


def test_reduce_sat_and_unsat(tmp_path):
    assert main(["reduce", "--instance", inst("sat_small.cnf"), "--seed", "0", "--out", str(tmp_path / "a")]) == EXIT_OK
    rep = json.loads((tmp_path / "a" / "summary.json").read_text())["results"]
    assert rep["gap"] == 0.0 and rep["source_satisfiable"]
    assert main(["reduce", "--instance", inst("unsat_small.cnf"), "--seed", "0", "--out", str(tmp_path / "b")]) == EXIT_OK
    rep = json.loads((tmp_path / "b" / "summary.json").read_text())["results"]
    assert rep["gap"] > 0 and not rep["source_satisfiable"]
    assert rep["sizes"]["max_occurrence"] <= 8


def test_reduce_malformed(tmp_path):
    bad = tmp_path / "bad.cnf"
    bad.write_text("p 3sat 3 1\n1 2 nope\n")
    assert main(["reduce", "--instance", str(bad), "--seed", "0", "--out", str(tmp_path / "o")]) == EXIT_PARSE


def test_reduce_cap_refusal(tmp_path):
    code = main(["reduce", "--instance", inst("unsat_small.cnf"), "--seed", "0", "--width-cap", "2",
                 "--out", str(tmp_path / "o")])
    assert code == EXIT_PRECONDITION


def test_seed_mandatory(tmp_path):
    assert main(["lemmas", "--out", str(tmp_path)]) == EXIT_PARSE


def test_range_checks(tmp_path):
    assert main(["simulate", "--instance", inst("sat_small.cnf"), "--seed", "0",
                 "--trials", "0", "--out", str(tmp_path)]) == EXIT_PARSE
    assert main(["sweep", "--Ns", "7", "--seed", "0", "--out", str(tmp_path)]) == EXIT_PARSE


def test_config_overrides_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"trials": 7, "strategy": "phased"}))
    out = tmp_path / "o"
    assert main(["simulate", "--instance", inst("sat_small.cnf"), "--seed", "1", "--trials", "50",
                 "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    s = json.loads((out / "summary.json").read_text())
    assert s["results"]["trials"] == 7 and s["config"]["strategy"] == "phased"
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["simulate", "--instance", inst("sat_small.cnf"), "--seed", "1",
                 "--config", str(cfg), "--out", str(out)]) == EXIT_PARSE


def test_simulate_honest_perfect(tmp_path):
    out = tmp_path / "h"
    assert main(["simulate", "--instance", inst("sat_small.cnf"), "--strategy", "honest", "--seed", "4",
                 "--trials", "600", "--out", str(out)]) == EXIT_OK
    s = json.loads((out / "summary.json").read_text())["results"]
    assert s["acceptance"]["rate"] == 1.0
    assert s["exact"]["satisfiability_accept"] == 1.0
    assert len((out / "trials.jsonl").read_text().splitlines()) == 600


def test_simulate_from_certificate_matches_instance(tmp_path):
    main(["reduce", "--instance", inst("unsat_small.cnf"), "--seed", "0", "--out", str(tmp_path / "r")])
    args = ["--strategy", "concentrated", "--seed", "2", "--trials", "100"]
    main(["simulate", "--certificate", str(tmp_path / "r" / "certificate.json"), *args, "--out", str(tmp_path / "a")])
    main(["simulate", "--instance", inst("unsat_small.cnf"), *args, "--out", str(tmp_path / "b")])
    assert read(tmp_path / "a" / "trials.jsonl") == read(tmp_path / "b" / "trials.jsonl")


def test_simulate_concentrated_matches_calibration(tmp_path):
    cal = json.loads(resources.files("qmasat").joinpath("data/simulate_calibration.json").read_text())
    out = tmp_path / "c"
    assert main(["simulate", "--instance", inst(cal["instance"]), "--strategy", "concentrated",
                 "--beta", str(cal["beta"]), "--seed", "1001", "--trials", "2000", "--out", str(out)]) == EXIT_OK
    s = json.loads((out / "summary.json").read_text())["results"]
    rej = s["trials"] - s["acceptance"]["accepts"]
    lo, hi = wilson_interval(rej, s["trials"])
    assert s["K"] == cal["K"]
    assert lo <= cal["envelope"][1] and hi >= cal["envelope"][0]


@pytest.mark.parametrize("cmd", [
    ["reduce", "--instance", inst("all_polarities.cnf")],
    ["simulate", "--instance", inst("unsat_small.cnf"), "--strategy", "phased", "--trials", "200"],
    ["sweep", "--Ns", "16,32", "--betas", "1,2", "--trials", "40"],
    ["lemmas", "--scale", "0.05"],
])
def test_byte_identical_reruns(tmp_path, cmd):
    for tag in ("x", "y"):
        assert main([*cmd, "--seed", "11", "--out", str(tmp_path / tag)]) in (EXIT_OK, EXIT_CHECK)
    files = sorted(p.name for p in (tmp_path / "x").iterdir())
    assert files
    for f in files:
        assert read(tmp_path / "x" / f) == read(tmp_path / "y" / f)


def test_config_hash_ignores_output_path(tmp_path):
    for tag in ("x", "y"):
        main(["sweep", "--Ns", "16", "--betas", "1", "--trials", "5", "--seed", "3", "--out", str(tmp_path / tag)])
    hx = json.loads((tmp_path / "x" / "summary.json").read_text())["config_sha256"]
    hy = json.loads((tmp_path / "y" / "summary.json").read_text())["config_sha256"]
    assert hx == hy


def test_sweep_table(tmp_path):
    assert main(["sweep", "--Ns", "16,32", "--betas", "0.5,1,2", "--strategies", "honest,phased",
                 "--trials", "30", "--seed", "0", "--out", str(tmp_path)]) == EXIT_OK
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0].split(",")[-2:] == ["collision_freq", "disagreement_given_collision"]
    assert len(lines) == 1 + 2 * 3 * 2


def test_lemmas_precondition_skip_and_seed_stability(tmp_path):
    statuses = []
    for seed in range(10):
        out = tmp_path / str(seed)
        assert main(["lemmas", "--scale", "0.05", "--seed", str(seed), "--out", str(out)]) == EXIT_OK
        statuses.append(json.loads((out / "summary.json").read_text())["results"]["status"])
    assert all(s == statuses[0] for s in statuses)
    assert statuses[0]["matching_theorem_proper_state"] == "skip"


def test_lemmas_failure_exit_code(tmp_path):
    # a d so large no matching can be d-large makes the matching check fail
    assert main(["lemmas", "--scale", "0.05", "--seed", "0", "--matching-d", "1000",
                 "--out", str(tmp_path)]) == EXIT_CHECK
