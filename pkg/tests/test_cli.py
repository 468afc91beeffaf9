import hashlib
import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from pcb3dcnn.cli import main
from pcb3dcnn.video import read_pcv


@pytest.fixture
def runner():
    return CliRunner()


def test_synth_creates_manifest(runner, tmp_path):
    out = tmp_path / "ds"
    result = runner.invoke(main, ["synth", "--per-class", "2", "--seed", "7",
                                  "--out", str(out)])
    assert result.exit_code == 0, result.output
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["entries"]) == 10  # 5 classes x 2


def test_synth_repeat_identical_bytes(runner, tmp_path):
    for sub in ("a", "b"):
        result = runner.invoke(main, ["synth", "--per-class", "1", "--seed", "3",
                                      "--out", str(tmp_path / sub)])
        assert result.exit_code == 0
    ha = {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
          for p in sorted((tmp_path / "a").iterdir())}
    hb = {p.name: hashlib.sha256(p.read_bytes()).hexdigest()
          for p in sorted((tmp_path / "b").iterdir())}
    assert ha == hb


def test_synth_zero_per_class_usage_error(runner, tmp_path):
    result = runner.invoke(main, ["synth", "--per-class", "0", "--out", str(tmp_path)])
    assert result.exit_code == 2


def test_segment_partitions_frames(runner, tmp_path):
    runner.invoke(main, ["synth", "--per-class", "1", "--classes", "arson",
                         "--frames", "300", "--seed", "1", "--out", str(tmp_path)])
    video = tmp_path / "arson_0000.pcv"
    ann_path = tmp_path / "arson_0000.annotation.json"
    result = runner.invoke(main, ["segment", str(video), str(ann_path)])
    assert result.exit_code == 0, result.output
    ann = json.loads(ann_path.read_text())
    total = 0
    for part in ("precrime", "suspicious", "evidence"):
        frames, _ = read_pcv(tmp_path / f"arson_0000.{part}.pcv")
        total += frames.shape[0]
    assert total == 300 - ann["first_appearance"]


def test_segment_empty_suspicious(runner, tmp_path):
    runner.invoke(main, ["synth", "--per-class", "1", "--classes", "abuse",
                         "--frames", "100", "--seed", "2", "--out", str(tmp_path)])
    ann_path = tmp_path / "abuse_0000.annotation.json"
    obj = json.loads(ann_path.read_text())
    obj["scm"] = obj["ccm"]
    ann_path.write_text(json.dumps(obj))
    result = runner.invoke(main, ["segment", str(tmp_path / "abuse_0000.pcv"),
                                  str(ann_path)])
    assert result.exit_code == 0, result.output
    frames, _ = read_pcv(tmp_path / "abuse_0000.suspicious.pcv")
    assert frames.shape[0] == 0


def test_segment_invalid_annotation_exit_2(runner, tmp_path):
    runner.invoke(main, ["synth", "--per-class", "1", "--classes", "abuse",
                         "--frames", "100", "--seed", "2", "--out", str(tmp_path)])
    ann_path = tmp_path / "abuse_0000.annotation.json"
    obj = json.loads(ann_path.read_text())
    obj["scm"] = 100  # out of range
    ann_path.write_text(json.dumps(obj))
    result = runner.invoke(main, ["segment", str(tmp_path / "abuse_0000.pcv"),
                                  str(ann_path)])
    assert result.exit_code == 2
    assert "scm" in result.output


def test_experiment_and_report(runner, tmp_path):
    ds = tmp_path / "ds"
    runner.invoke(main, ["synth", "--per-class", "2", "--frames", "18",
                         "--seed", "0", "--out", str(ds)])
    spec = {
        "manifest": str(ds / "manifest.json"),
        "approaches": ["binary-binary", "multi-multi", "multi-binary"],
        "pairs": ["2-2", "4-4"],
        "runs": 2, "epochs": 1, "ratio": 0.5,
        "train_stride": 16, "eval_stride": 16,
        "out_dir": str(tmp_path / "results"),
    }
    spec_file = tmp_path / "exp.json"
    spec_file.write_text(json.dumps(spec))
    result = runner.invoke(main, ["experiment", str(spec_file)])
    assert result.exit_code == 0, result.output
    report_dir = tmp_path / "results" / "report"
    for name in ("comparison_binary_vs_multiclass.csv",
                 "comparison_binary_classifications.csv",
                 "best_bacc.csv", "best_bacc.txt",
                 "bacc_distributions.csv",
                 "bacc_binary_vs_multiclass.png",
                 "bacc_binary_classifications.png"):
        assert (report_dir / name).exists(), name

    # standalone report command regenerates into a fresh directory
    out2 = tmp_path / "report2"
    result = runner.invoke(main, ["report", str(tmp_path / "results"),
                                  "--out", str(out2)])
    assert result.exit_code == 0, result.output
    assert (out2 / "best_bacc.csv").read_text() == (report_dir / "best_bacc.csv").read_text()


def test_experiment_unknown_approach_rejected(runner, tmp_path):
    spec_file = tmp_path / "exp.json"
    spec_file.write_text(json.dumps({"manifest": "m.json", "out_dir": "o",
                                     "approaches": ["quantum"]}))
    result = runner.invoke(main, ["experiment", str(spec_file)])
    assert result.exit_code == 2
    assert "invalid spec" in result.output


def test_report_empty_dir_exit_2(runner, tmp_path):
    result = runner.invoke(main, ["report", str(tmp_path)])
    assert result.exit_code == 2


def test_report_single_approach_partial(runner, tmp_path):
    ds = tmp_path / "ds"
    runner.invoke(main, ["synth", "--per-class", "2", "--frames", "18",
                         "--seed", "0", "--out", str(ds)])
    spec = {
        "manifest": str(ds / "manifest.json"),
        "approaches": ["binary-binary"],
        "pairs": ["2-2"],
        "runs": 2, "epochs": 1, "ratio": 0.5,
        "train_stride": 16, "eval_stride": 16,
        "out_dir": str(tmp_path / "results"),
    }
    spec_file = tmp_path / "exp.json"
    spec_file.write_text(json.dumps(spec))
    result = runner.invoke(main, ["experiment", str(spec_file), "--no-report"])
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, ["report", str(tmp_path / "results")])
    assert result.exit_code == 0, result.output
    report_dir = tmp_path / "results" / "report"
    # comparisons skipped, best table still emitted for the present approach
    assert not (report_dir / "comparison_binary_vs_multiclass.csv").exists()
    assert (report_dir / "best_bacc.csv").exists()
