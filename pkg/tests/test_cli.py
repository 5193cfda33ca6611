from __future__ import annotations

import json

import pytest

from crossdoc.cli import cli_dispatch
from tests.conftest import (
    DISTANCE_MAP,
    GOLDEN_BUNDLE,
    GOLDEN_CONFIG,
    GOLDEN_PAPER,
)


def test_help_exits_zero(capsys):
    assert cli_dispatch(["--help"]) == 0
    assert "Usage" in capsys.readouterr().out


@pytest.mark.parametrize("subcommand", [
    "ingest", "annotate", "validate", "bundle", "render", "serve", "stats",
])
def test_subcommand_help(subcommand, capsys):
    assert cli_dispatch([subcommand, "--help"]) == 0
    assert "Usage" in capsys.readouterr().out


def test_usage_error_exits_two(capsys):
    assert cli_dispatch(["annotate"]) == 2
    assert cli_dispatch(["no-such-command"]) == 2


def test_ingest_summary(capsys, tmp_path):
    out = tmp_path / "summary.json"
    code = cli_dispatch(["ingest", str(GOLDEN_PAPER), "--json", str(out)])
    assert code == 0
    assert "12 passages, 3 figures" in capsys.readouterr().out
    summary = json.loads(out.read_text())
    assert summary["passages"] == 12
    assert [f["figure_number"] for f in summary["figures"]] == [1, 2, 3]


def test_annotate_writes_bundle(tmp_path, capsys):
    out = tmp_path / "out.bundle.json"
    code = cli_dispatch([
        "annotate", str(GOLDEN_PAPER),
        "--config", str(GOLDEN_CONFIG),
        "--out", str(out),
    ])
    assert code == 0
    assert out.read_bytes() == GOLDEN_BUNDLE.read_bytes()


def test_annotate_missing_file_exits_one_with_diagnostic(capsys, tmp_path):
    missing = tmp_path / "missing.html"
    code = cli_dispatch([
        "annotate", str(missing),
        "--config", str(GOLDEN_CONFIG),
        "--out", str(tmp_path / "x.json"),
    ])
    assert code == 1
    err = capsys.readouterr().err
    assert "missing.html" in err


def test_validate_golden_exits_zero(capsys):
    code = cli_dispatch([
        "validate", str(GOLDEN_BUNDLE), "--doc", str(GOLDEN_PAPER),
    ])
    assert code == 0
    assert "servable" in capsys.readouterr().out


def test_validate_corrupted_bundle_exits_one(tmp_path, capsys):
    payload = json.loads(GOLDEN_BUNDLE.read_text())
    payload["source_hash"] = "0" * 64
    bad = tmp_path / "bad.bundle.json"
    bad.write_text(json.dumps(payload))
    code = cli_dispatch(["validate", str(bad), "--doc", str(GOLDEN_PAPER)])
    assert code == 1
    assert "DOC_MISMATCH" in capsys.readouterr().err


def test_bundle_then_serve_layout(tmp_path):
    root = tmp_path / "root"
    code = cli_dispatch([
        "bundle", str(GOLDEN_PAPER), str(GOLDEN_BUNDLE),
        "--out-dir", str(root), "--config", str(GOLDEN_CONFIG),
    ])
    assert code == 0
    doc_id = json.loads(GOLDEN_BUNDLE.read_text())["doc_id"]
    doc_dir = root / doc_id
    assert (doc_dir / "aug.html").is_file()
    assert (doc_dir / "base.html").is_file()
    assert (doc_dir / "bundle.json").is_file()
    assert (doc_dir / "assets" / "fig1.png").is_file()


def test_render_both_variants(tmp_path):
    aug_out = tmp_path / "doc.aug.html"
    base_out = tmp_path / "doc.base.html"
    assert cli_dispatch([
        "render", str(GOLDEN_PAPER), "--variant", "aug",
        "--bundle", str(GOLDEN_BUNDLE), "--out", str(aug_out),
    ]) == 0
    assert cli_dispatch([
        "render", str(GOLDEN_PAPER), "--variant", "base",
        "--out", str(base_out), "--config", str(GOLDEN_CONFIG),
    ]) == 0
    assert b"cd-mention" in aug_out.read_bytes()
    assert b"cd-mention" not in base_out.read_bytes()


def test_render_aug_requires_bundle(tmp_path, capsys):
    code = cli_dispatch([
        "render", str(GOLDEN_PAPER), "--variant", "aug",
        "--out", str(tmp_path / "x.html"),
    ])
    assert code == 2


def _write_study_csvs(tmp_path):
    scores = tmp_path / "scores.csv"
    lines = ["participant,condition,question,annotator,score"]
    for q in range(1, 11):
        for i in range(9):
            for annotator in ("a1", "a2"):
                base = 0 if q == 6 else (i % 3)
                exp = 2 if q == 6 else (i % 3)
                lines.append(f"b{i},baseline,{q},{annotator},{base}")
                lines.append(f"e{i},experimental,{q},{annotator},{exp}")
    scores.write_text("\n".join(lines) + "\n")
    times = tmp_path / "times.csv"
    time_lines = ["participant,condition,question,seconds"]
    for q in range(1, 11):
        for i in range(9):
            time_lines.append(f"b{i},baseline,{q},{30 + q + i}")
            time_lines.append(f"e{i},experimental,{q},{31 + q + i}")
    times.write_text("\n".join(time_lines) + "\n")
    tlx = tmp_path / "tlx.csv"
    tlx_lines = [
        "participant,condition,mental_demand,physical_demand,time_pressure,"
        "performance,effort,frustration"
    ]
    for i in range(9):
        tlx_lines.append(f"b{i},baseline,{3 + i % 3},1,{2 + i % 2},3,4,2")
        tlx_lines.append(f"e{i},experimental,{3 + (i + 1) % 3},1,{2 + i % 2},3,4,2")
    tlx.write_text("\n".join(tlx_lines) + "\n")
    return scores, times, tlx


def test_stats_full_run(tmp_path, capsys):
    scores, times, tlx = _write_study_csvs(tmp_path)
    out = tmp_path / "report.json"
    code = cli_dispatch([
        "stats", "--scores", str(scores), "--times", str(times),
        "--tlx", str(tlx), "--distance-map", str(DISTANCE_MAP),
        "--json", str(out),
    ])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["reliability"]["krippendorff_alpha"] == 1.0
    assert report["quality_by_distance"]["4P"]["correction"]["adjusted_p"] < 0.05
    assert "workload" in report
    table = capsys.readouterr().out
    assert "quality/distance" in table
