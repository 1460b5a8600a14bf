from __future__ import annotations

import json
import shutil
from pathlib import Path

import pytest

from pseudoabelian.cli import main

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
FAST = ["trace", "integrate", "compensator", "diffsolve", "count", "asymptotics", "check"]


@pytest.fixture
def cache(tmp_path, monkeypatch):
    d = tmp_path / "cache"
    monkeypatch.setenv("PSEUDOABELIAN_CACHE", str(d))
    return d


@pytest.fixture
def quick(tmp_path):
    path = tmp_path / "quick.json"
    shutil.copy(SCENARIOS / "quick.json", path)
    return path


def _files(d: Path) -> dict:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


@pytest.mark.parametrize("sub", FAST)
def test_subcommand_runs_and_reruns_identically(sub, quick, cache, tmp_path, capsys):
    out1, out2, out3 = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main([sub, "--scenario", str(quick), "--out", str(out1), "--plots"]) == 0
    assert "(computed)" in capsys.readouterr().out
    assert main([sub, "--scenario", str(quick), "--out", str(out2), "--plots"]) == 0
    assert "(cached)" in capsys.readouterr().out
    assert main([sub, "--scenario", str(quick), "--out", str(out3), "--plots", "--no-cache"]) == 0
    first = _files(out1)
    assert first == _files(out2) == _files(out3)
    summary = json.loads(first[f"{sub}_summary.json"])
    assert summary["status"] == "ok" and summary["subcommand"] == sub
    assert all(name in first for name in summary["artifacts"])
    assert any(name.endswith(".csv") for name in first)
    if sub != "check":
        assert f"{sub}.svg" in first and first[f"{sub}.svg"].lstrip().startswith(b"<?xml")


def test_count_table_has_refined_column(quick, cache, tmp_path):
    assert main(["count", "--scenario", str(quick), "--out", str(tmp_path / "o")]) == 0
    header = (tmp_path / "o" / "count.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["eps", "alpha", "zero_count"] and "zero_count_refined" in header


def test_editing_scenario_invalidates_cache(quick, cache, tmp_path, capsys):
    assert main(["compensator", "--scenario", str(quick), "--out", str(tmp_path / "a")]) == 0
    data = json.loads(quick.read_text())
    data["compensator"]["h"] = [0.2, 0.6]
    quick.write_text(json.dumps(data))
    capsys.readouterr()
    assert main(["compensator", "--scenario", str(quick), "--out", str(tmp_path / "b")]) == 0
    assert "(computed)" in capsys.readouterr().out
    rows = (tmp_path / "b" / "compensator.csv").read_text().splitlines()
    assert len(rows) != len((tmp_path / "a" / "compensator.csv").read_text().splitlines())


@pytest.mark.parametrize("sub,mutate", [
    ("trace", lambda d: d.update(params={"eps": 0.9, "alpha": 0.0})),
    ("integrate", lambda d: d.update(integrate={"n": -3})),
    ("count", lambda d: d.update(count={"eps": []})),
    ("trace", lambda d: d.update(system="missing.json")),
    ("trace", lambda d: d.update(eta={"a": [["x", 0, 1.0]]})),
])
def test_configuration_errors_exit_2(sub, mutate, quick, cache, tmp_path, capsys):
    data = json.loads(quick.read_text())
    mutate(data)
    quick.write_text(json.dumps(data))
    assert main([sub, "--scenario", str(quick), "--out", str(tmp_path / "o")]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unreadable_scenario_and_bad_jobs(tmp_path, cache, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["trace", "--scenario", str(bad)]) == 2
    assert main(["trace", "--scenario", str(tmp_path / "nope.json")]) == 2
    assert main(["trace", "--scenario", str(SCENARIOS / "quick.json"), "--jobs", "0"]) == 2
    with pytest.raises(SystemExit):
        main(["frobnicate", "--scenario", str(bad)])


def test_system_file_scenario(tmp_path, cache):
    shutil.copy(SCENARIOS / "triangle.json", tmp_path / "triangle.json")
    data = json.loads((SCENARIOS / "quick.json").read_text())
    data["system"] = "triangle.json"
    (tmp_path / "s.json").write_text(json.dumps(data))
    assert main(["trace", "--scenario", str(tmp_path / "s.json"), "--out", str(tmp_path / "o")]) == 0


@pytest.mark.slow
def test_var_subcommand(quick, cache, tmp_path):
    code = main(["var", "--scenario", str(quick), "--out", str(tmp_path / "o"), "--plots"])
    summary = json.loads((tmp_path / "o" / "var_summary.json").read_text())
    fit = summary["results"]["fit"]
    assert fit["degree"] is not None and fit["degree"] <= 8 and fit["monotone"]
    assert code == (0 if summary["status"] == "ok" else 1)
    assert (tmp_path / "o" / "var.svg").is_file()
