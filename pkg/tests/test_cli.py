"""End-to-end tests of the reoptbench command line."""

import argparse
import csv
import shlex

import pytest

from reoptbench.cli import build_parser, main
from reoptbench.harness.record import load_run
from reoptbench.mps.writer import write_mps_file
from reoptbench.reopt import main as reopt_main
from reoptbench.schemas import SeriesManifest


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    """Keep traces and default output directories out of the source tree."""
    monkeypatch.chdir(tmp_path)


def generate_toy(tmp_path) -> str:
    out = tmp_path / "series"
    code = main([
        "generate",
        "--recipe", "synthetic_semicontinuous",
        "--param", "n=2",
        "--param", "m=2",
        "--param", "rhs_range=[5.0, 30.0]",
        "--series-length", "3",
        "--candidates", "3",
        "--time-limit", "30",
        "--seed", "1",
        "--out", str(out),
        "--no-artifacts",
    ])
    assert code == 0
    return str(out / "manifest.json")


def test_generate_then_check(tmp_path, capsys):
    manifest_path = generate_toy(tmp_path)
    manifest = SeriesManifest.load(manifest_path)
    assert len(manifest.instance_files) == 3
    assert manifest.variation_mask == ["RHS"]
    assert manifest.time_limit_seconds == 30.0
    assert manifest.parameters["rhs_range"] == [5.0, 30.0]
    assert "Series" in capsys.readouterr().out

    assert main(["check", "--manifest", manifest_path, "--expected-length", "3", "--no-artifacts"]) == 0
    assert "share one structure" in capsys.readouterr().out


def test_generate_is_reproducible(tmp_path):
    first = generate_toy(tmp_path)
    files = {p.name: p.read_bytes() for p in (tmp_path / "series").iterdir()}
    generate_toy(tmp_path)
    assert {p.name: p.read_bytes() for p in (tmp_path / "series").iterdir()} == files
    assert SeriesManifest.load(first).seed == 1


def test_generate_from_preset(tmp_path):
    code = main([
        "generate",
        "--preset", "rhs_series_2",
        "--param", "n=2",
        "--param", "m=1",
        "--series-length", "3",
        "--candidates", "4",
        "--seed", "5",
        "--out", str(tmp_path / "preset"),
        "--no-artifacts",
    ])
    assert code == 0
    manifest = SeriesManifest.load(tmp_path / "preset" / "manifest.json")
    assert manifest.series_name == "rhs_series_2"
    assert manifest.recipe == "synthetic_semicontinuous"
    assert manifest.time_limit_seconds == 60.0


def test_run_score_and_report(tmp_path, capsys, subprocess_env):
    manifest_path = generate_toy(tmp_path)
    solver = f"{shlex.quote(subprocess_env)} -m reoptbench.reopt --solutions-dir {shlex.quote(str(tmp_path / 'sol'))}"
    record_path = tmp_path / "runs" / "baseline.jsonl"
    code = main(["run", "--solver", solver, "--manifest", manifest_path, "--out", str(record_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "No protocol violations" in out
    assert "Trace saved" in out
    assert list((tmp_path / "artifacts").glob("*.jsonl"))

    record = load_run(record_path)
    assert [r.index for r in record.results] == [1, 2, 3]
    assert all(r.valid for r in record.results)

    reports = tmp_path / "reports"
    code = main([
        "score",
        "--record", f"baseline={record_path}",
        "--record", f"again={record_path}",
        "--out", str(reports),
        "--no-artifacts",
    ])
    assert code == 0
    assert "FINAL SCORE" in capsys.readouterr().out
    with open(reports / "final.csv", newline="") as f:
        final = list(csv.DictReader(f))
    # identical records tie on every instance: sum of (1 + i/10) for i = 1..3
    assert sorted(row["team"] for row in final) == ["again", "baseline"]
    assert all(float(row["C"]) == pytest.approx(3.6) for row in final)
    with open(reports / "summary.csv", newline="") as f:
        assert [row["batch"] for row in csv.DictReader(f)] == ["all", "1-3", "all", "1-3"]

    assert main(["report", "--record", str(record_path), "--no-artifacts"]) == 0
    out = capsys.readouterr().out
    assert "reltime" in out
    assert "1-3" in out


def test_solve_prints_a_result_line(tmp_path, capsys, knapsack):
    path = write_mps_file(knapsack, tmp_path / "knap.mps")
    solution_path = tmp_path / "knap.sol"
    code = main([
        "solve", "--instance", str(path), "--time-limit", "10",
        "--solution-out", str(solution_path), "--no-artifacts",
    ])
    assert code == 0
    lines = [line for line in capsys.readouterr().out.splitlines() if line.startswith("RESULT")]
    assert lines == [f"RESULT optimal 12.0 12.0 {solution_path.resolve()}"]
    assert solution_path.exists()


def test_usage_errors_exit_with_one(tmp_path, capsys):
    assert main(["generate", "--seed", "1", "--out", str(tmp_path / "x"), "--no-artifacts"]) == 1
    assert main(["generate", "--recipe", "nope", "--seed", "1", "--out", "x", "--no-artifacts"]) == 1
    assert main([
        "generate", "--recipe", "synthetic_semicontinuous", "--seed", "1", "--out", "x",
        "--similarity-band", "0.9", "--no-artifacts",
    ]) == 1
    with pytest.raises(SystemExit) as excinfo:
        main(["run", "--manifest", "m.json"])
    assert excinfo.value.code == 1
    assert "Error" in capsys.readouterr().err


def test_missing_manifest_is_an_io_error(tmp_path):
    assert main(["check", "--manifest", str(tmp_path / "missing.json"), "--no-artifacts"]) == 3


def test_bad_generator_parameters_are_domain_errors(tmp_path):
    code = main([
        "generate", "--recipe", "synthetic_semicontinuous", "--param", "n=0",
        "--series-length", "3", "--candidates", "3", "--seed", "1",
        "--out", str(tmp_path / "bad"), "--no-artifacts",
    ])
    assert code == 2


def test_flags_are_long_form_only():
    parser = build_parser()
    commands = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sub in commands.choices.items():
        for action in sub._actions:
            for option in action.option_strings:
                assert option.startswith("--") or option == "-h", (name, option)


def test_short_verbose_flag_is_rejected():
    with pytest.raises(SystemExit) as excinfo:
        main(["report", "--record", "r.jsonl", "-v"])
    assert excinfo.value.code == 1
    with pytest.raises(SystemExit):
        reopt_main(["--manifest", "m.json", "-v"])
