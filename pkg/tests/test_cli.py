"""Command-line behavior: outputs, exit codes, and inspection commands."""

from pathlib import Path

import pytest

from sidelinksim.cli import _parse_seeds, main
from sidelinksim.metrics import MetricsReport

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"
BASELINE = str(SCENARIO_DIR / "baseline.yaml")

TINY = """
name: tiny
seed: 5
duration_slots: 60
ues:
  - {id: 1, position: [0, 0], role: gnss_visible}
  - {id: 2, position: [40, 0]}
traffic:
  - {src: 1, dst: 2, period_slots: 50, rri_ms: 100}
"""


@pytest.fixture
def tiny(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY)
    return str(path)


def test_parse_seeds_forms():
    assert _parse_seeds("3") == [3]
    assert _parse_seeds("1,4,9") == [1, 4, 9]
    assert _parse_seeds("1:4") == [1, 2, 3, 4]


def test_run_writes_outputs_and_prints_csv(tiny, tmp_path, capsys):
    out = tmp_path / "results"
    assert main(["run", tiny, "--out", str(out)]) == 0
    printed = capsys.readouterr().out
    assert printed.startswith("schema,sidelinksim-metrics,")
    on_disk = (out / "metrics.csv").read_text()
    assert on_disk == printed
    events = (out / "events.jsonl").read_text().splitlines()
    assert events and all(line.startswith("{") for line in events)
    report = MetricsReport.from_csv(on_disk)
    assert report.scenario == "tiny" and report.seed == 5


def test_run_seed_override(tiny, tmp_path, capsys):
    assert main(["run", tiny, "--seed", "77"]) == 0
    assert "seed,77" in capsys.readouterr().out


def test_batch_per_seed_directories(tiny, tmp_path, capsys):
    out = tmp_path / "batch"
    assert main(["batch", tiny, "--seeds", "1:3", "--out", str(out)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3 and lines[0].startswith("seed 1:")
    for seed in (1, 2, 3):
        assert (out / f"seed-{seed}" / "metrics.csv").exists()
        assert (out / f"seed-{seed}" / "events.jsonl").exists()


def test_compare_two_runs(tiny, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", tiny, "--out", str(a)])
    main(["run", tiny, "--seed", "9", "--out", str(b)])
    capsys.readouterr()
    assert main(["compare", str(a / "metrics.csv"), str(b / "metrics.csv")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("metric,delta,relative")
    assert "slots_run,0," in out


def test_validate_accepts_catalog(capsys):
    assert main(["validate", BASELINE]) == 0
    assert capsys.readouterr().out.startswith("ok: baseline")


def test_validate_reports_problems(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("duration_slots: -1\nues: []\n")
    assert main(["validate", str(bad)]) == 1
    err = capsys.readouterr().err
    assert "scenario error" in err
    assert "scenario.duration_slots" in err


def test_missing_file_is_exit_1(capsys):
    assert main(["run", "no_such_scenario.yaml"]) == 1
    assert "not found" in capsys.readouterr().err


def test_list_attacks_prints_catalog(capsys):
    assert main(["list-attacks"]) == 0
    out = capsys.readouterr().out
    for kind in ("false_sync_injection", "resource_blocking", "harq_spoof_ack",
                 "pc5_forged_reject", "pc5_replay", "l2_tracking"):
        assert kind in out
    assert "claim_fraction" in out and "default" in out
