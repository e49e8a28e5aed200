import csv
import io
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
EX = ROOT / "examples_ppcf"


def ppcf(*args, cwd=None):
    env = dict(os.environ, PYTHONPATH=str(ROOT / "src"))
    return subprocess.run(
        [sys.executable, "-m", "ppcfkit", *map(str, args)],
        capture_output=True, text=True, env=env, cwd=cwd,
    )


def program(tmp_path, src, name="prog.ppcf"):
    path = tmp_path / name
    path.write_text(src, encoding="utf-8")
    return path


def test_run():
    r = ppcf("run", EX / "coin_third.ppcf", "--tape", "0")
    assert r.returncode == 0, r.stderr
    assert r.stdout.strip() == "accept 1/3 {}"
    r = ppcf("run", EX / "coin_third.ppcf")
    assert r.stdout.strip() == "reject tape-exhausted"


def test_run_zero_and_labels(tmp_path):
    assert ppcf("run", program(tmp_path, "0")).stdout.strip() == "accept 1/1 {}"
    r = ppcf("run", EX / "deterministic.ppcf")
    assert r.stdout.strip() == "reject terminal-nonzero"
    r = ppcf("run", program(tmp_path, "#l{#l{0}}"))
    assert r.stdout.strip() == "accept 1/1 {l:2}"


def test_check():
    r = ppcf("check", EX / "mq_function.ppcf")
    assert r.returncode == 0, r.stderr
    assert r.stdout.strip() == "nat -> nat"


def test_exit_codes(tmp_path):
    r = ppcf("check", program(tmp_path, "succ (fun x: nat => x)"))
    assert r.returncode == 1
    assert r.stderr.startswith("✖")
    r = ppcf("check", program(tmp_path, "ifz then"))
    assert r.returncode == 1
    r = ppcf("check", tmp_path / "missing.ppcf")
    assert r.returncode == 2
    assert "not found" in r.stderr


def test_sweep():
    r = ppcf("sweep", EX / "mq_template.ppcf", "--trunc", "4")
    assert r.returncode == 0, r.stderr
    rows = list(csv.reader(io.StringIO(r.stdout)))
    assert rows[0] == ["q", "prob_zero", "expectation_or_inf"]
    assert len(rows) == 22
    by_q = {float(q): (float(p), float(e)) for q, p, e in rows[1:]}
    assert by_q[0.25][0] == pytest.approx(1.0, abs=1e-6)
    assert by_q[0.25][1] == pytest.approx(3.0, abs=1e-4)
    assert by_q[0.75][0] == pytest.approx(1 / 3, abs=1e-6)
    assert by_q[0.5][1] == float("inf")


def test_dist():
    r = ppcf("dist", EX / "coin_zero.ppcf", EX / "coin_twentieth.ppcf", "-p", "1/2", "--trunc", "4")
    assert r.returncode == 0, r.stderr
    first = r.stdout.splitlines()[0]
    assert first.startswith("distance 0.1 bound 0.1 ")
    assert first.endswith("holds yes")


def test_dist_with_extra_contexts(tmp_path):
    out = tmp_path / "dist.csv"
    r = ppcf("dist", EX / "coin_zero.ppcf", EX / "coin_twentieth.ppcf", "-p", "1/4",
             "--contexts", EX / "contexts", "--out", out, "--trunc", "4")
    assert r.returncode == 0, r.stderr
    rows = list(csv.reader(out.open(encoding="utf-8")))
    assert rows[0] == ["context", "prob1", "prob2", "gap"]
    assert [row[0] for row in rows[-2:]] == ["double_test", "shift"]


def test_rel(tmp_path):
    r = ppcf("rel", program(tmp_path, "2"))
    assert r.stdout.strip() == "⊢ 2 : 2"
    r = ppcf("rel", EX / "coin_third.ppcf")
    assert r.stdout.splitlines() == ["⊢ coin(1/3) : 0", "⊢ coin(1/3) : 1"]
    r = ppcf("rel", EX / "deterministic.ppcf", "--clique")
    assert r.returncode == 0, r.stderr
    assert r.stdout.splitlines()[-2:] == ["clique size 1", "machine agrees"]
    r = ppcf("rel", EX / "coin_third.ppcf", "--support")
    assert r.stdout.splitlines()[-1] == "support matches"


def test_json():
    r = ppcf("run", EX / "coin_third.ppcf", "--tape", "1", "--json")
    data = json.loads(r.stdout)
    assert data["outcome"] == "reject"
    assert data["reason"] == "terminal-nonzero"
    r = ppcf("prob", EX / "coin_third.ppcf", "--exact", "--json")
    assert json.loads(r.stdout) == {"prob_zero": "1/3"}


def test_enum_to_file(tmp_path):
    out = tmp_path / "enum.csv"
    r = ppcf("enum", EX / "coin_third.ppcf", "--out", out)
    assert r.returncode == 0, r.stderr
    assert r.stdout == ""
    rows = list(csv.reader(out.open(encoding="utf-8")))
    assert rows[0] == ["multiset", "numerator", "denominator"]
    assert rows[1] == ["{}", "1", "3"]
    assert rows[-2] == ["reject", "2", "3"]
    assert rows[-1][0] == "residual"


def test_config_file_and_flags(tmp_path):
    cfg = program(tmp_path, "fuel = 1\n", "run.cfg")
    prog = program(tmp_path, "pred (pred 5)")
    r = ppcf("run", prog, "--config", cfg)
    assert r.stdout.startswith("out-of-fuel")
    r = ppcf("run", prog, "--config", cfg, "--fuel", "100")
    assert r.stdout.strip() == "reject terminal-nonzero"
    bad = program(tmp_path, "fuel = lots\n", "bad.cfg")
    assert ppcf("run", prog, "--config", bad).returncode == 1


def test_expect_and_transform(tmp_path):
    r = ppcf("expect", EX / "mq_quarter.ppcf", "--mode", "sem", "--trunc", "4")
    assert r.returncode == 0, r.stderr
    line = r.stdout.strip()
    assert line.startswith("semantic ")
    assert float(line.split()[1]) == pytest.approx(3.0, abs=1e-4)
    r = ppcf("transform", program(tmp_path, "#l{0}"), "--op", "spy")
    assert r.stdout.strip() == "ifz x_l then 0 else fix (fun x: nat => x)"


def test_sample():
    r = ppcf("sample", EX / "coin_third.ppcf", "--samples", "2000", "--seed", "4")
    assert r.returncode == 0, r.stderr
    words = r.stdout.split()
    assert words[0] == "estimate"
    assert float(words[1]) == pytest.approx(1 / 3, abs=0.05)


def test_expect_at_the_critical_bias():
    env = dict(os.environ, PYTHONPATH=str(ROOT / "src"))
    r = subprocess.run(
        [sys.executable, "-m", "ppcfkit", "expect", str(EX / "mq_half.ppcf"), "--trunc", "4", "--fuel", "500"],
        capture_output=True, text=True, env=env, timeout=60,
    )
    assert r.returncode == 0, r.stderr
    assert "converge too slowly" in r.stderr
    lines = r.stdout.splitlines()
    assert lines[0].startswith("operational lower ")
    assert lines[1].startswith("semantic diverged")
