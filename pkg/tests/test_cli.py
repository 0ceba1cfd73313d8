from __future__ import annotations

import json
import subprocess
import sys

import pytest

from conftest import MODELS
from palps.cli import main
from palps.corpus import corpus_entry, corpus_list


def corpus_path(name):
    return str(corpus_entry(name).model_path)


def test_parse_ok(capsys):
    assert main(["parse", corpus_path("dispersal")]) == 0
    assert "ok:" in capsys.readouterr().out


def test_parse_error_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.palps"
    bad.write_text("locations a;\nprocess P = tick . Q;\nspecies s = P;\nsystem = P@(a, s);\n")
    assert main(["parse", str(bad)]) == 1
    assert "undefined constant Q" in capsys.readouterr().out
    bad.write_text("locations a;\nprocess P = ;\n")
    assert main(["parse", str(bad)]) == 1


def test_parse_json(capsys):
    assert main(["parse", corpus_path("genotypes"), "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["errors"] == []


def test_explore_reports_truncation(capsys):
    assert main(["explore", corpus_path("dispersal"), "--max-states", "500", "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["truncated"] is True and payload["states"] >= 500


def test_check_verdicts(capsys):
    e = corpus_entry("tiny_extinction")
    assert main(["check", str(e.model_path), str(e.property_path)]) == 0
    out = capsys.readouterr().out
    assert "pmin=" in out and "pmax=" in out


def test_check_violation_exit_2(capsys):
    e = corpus_entry("tiny_extinction")
    assert main(["check", str(e.model_path), "--formula", "P<=0.5 [ true U{<=10} total(s) = 0 ]"]) == 2
    capsys.readouterr()
    assert main(["check", str(e.model_path), "--formula", "P=? [ X total(s) = 0 ]", "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["results"][0]["verdict"] is None


def test_check_truncated_is_not_a_pass():
    e = corpus_entry("tiny_extinction")
    argv = ["check", str(e.model_path), "--formula", "P<=0.6 [ true U{<=10} total(s) = 0 ]", "--max-states", "40"]
    assert main(argv) == 2


def test_check_needs_properties(capsys):
    assert main(["check", corpus_path("tiny_extinction")]) == 1


def test_usage_errors_exit_1(capsys):
    assert main(["bogus"]) == 1
    assert main(["simulate", corpus_path("tiny_extinction"), "--samples", "many"]) == 1
    assert main(["--help"]) == 0


def test_param_override(capsys):
    e = corpus_entry("tiny_extinction")
    argv = ["check", str(e.model_path), "--formula", "P=? [ X total(s) = 0 ]", "--format", "json"]
    main(argv)
    base = json.loads(capsys.readouterr().out)["results"][0]["pmin"]
    name = sorted(e.parameters)[0]
    main(argv + ["--param", f"{name}=0"])
    changed = json.loads(capsys.readouterr().out)["results"][0]["pmin"]
    assert base != changed
    assert main(argv + ["--param", "nope=1"]) == 1


def test_simulate_estimate(capsys):
    argv = ["simulate", corpus_path("tiny_dispersal"), "--formula", "P=? [ X s@1_2 = 2 ]", "--samples", "500",
            "--seed", "3", "--format", "json"]
    assert main(argv) == 0
    first = capsys.readouterr()
    assert "warning" in first.err
    assert main(argv) == 0
    assert capsys.readouterr().out == first.out
    est = json.loads(first.out)["estimates"][0]
    assert 0 <= est["low"] <= est["estimate"] <= est["high"] <= 1


def test_simulate_trace_files(tmp_path, capsys):
    csv, log = tmp_path / "t.csv", tmp_path / "t.jsonl"
    argv = ["simulate", str(MODELS / "one_tick.palps"), "--csv", str(csv), "--jsonl", str(log)]
    assert main(argv) == 0
    assert csv.read_text().splitlines() == ["tick,location,species,count", "0,a,s,1"]
    assert json.loads(log.read_text().splitlines()[-1])["end"] == "terminated"


def test_export(tmp_path, capsys):
    e = corpus_entry("tiny_competition")
    out = tmp_path / "m"
    assert main(["export", str(e.model_path), str(out), "--properties", str(e.property_path)]) == 0
    assert (tmp_path / "m.lab").read_text().startswith("#atoms: ")
    assert (tmp_path / "m.tra").read_text().endswith("\n")


def test_internal_error_exit_3(monkeypatch, capsys):
    from palps import cli
    from palps.semantics import CompatibilityError

    def broken(*args, **kwargs):
        raise CompatibilityError("environment and system disagree")

    monkeypatch.setattr(cli, "build", broken)
    assert main(["explore", corpus_path("tiny_extinction")]) == 3
    assert "internal error" in capsys.readouterr().err


@pytest.mark.parametrize("entry", corpus_list(), ids=lambda e: e.name)
def test_corpus_parse_and_explore(entry, capsys):
    assert main(["parse", str(entry.model_path)]) == 0
    assert main(["explore", str(entry.model_path), "--max-states", "10000"]) == 0


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "palps", "parse", corpus_path("tiny_dispersal")],
        capture_output=True,
        text=True,
    )
    assert res.returncode == 0 and "ok:" in res.stdout
