from __future__ import annotations

import json

import pytest

from motioncoach import cli, motion_io


def run(capsys, *argv, code=0):
    capsys.readouterr()
    assert cli.main([str(a) for a in argv]) == code
    return capsys.readouterr()


def test_convert_round_trip(capsys, fixture_paths, tmp_path):
    rec = json.loads(run(capsys, "convert", fixture_paths[1]).out)
    assert rec["frames"] == 240 and rec["round_trip"] and rec["has_positions"]
    out = tmp_path / "copy.motion"
    run(capsys, "convert", fixture_paths[1], "--out", out)
    assert out.read_bytes() == fixture_paths[1].read_bytes()


def test_corrupted_input_reports_file_and_line(capsys, fixture_paths, tmp_path):
    lines = fixture_paths[0].read_text().split("\n")
    lines[13] = "1 2 3"
    bad = tmp_path / "bad.motion"
    bad.write_text("\n".join(lines))
    err = run(capsys, "feedback", "--user", bad, "--ref", fixture_paths[1], code=2).err
    assert f"{bad}:14:" in err and "ingest" in err
    err = run(capsys, "align", "--user", tmp_path / "missing.motion", "--ref", fixture_paths[1], code=2).err
    assert "missing.motion" in err


def test_score_table(capsys, fixture_paths):
    out = run(capsys, "score", "--user", fixture_paths[0], "--ref", fixture_paths[1], "--table").out
    rows = out.splitlines()
    assert rows[0].split() == ["segment", "t_ideal", "t_actual", "score", "label"]
    assert [r.split()[-1] for r in rows[1:5]] == ["Good", "Great", "Great", "Excellent"]
    assert any(r.startswith("frame ") and "left_knee" in r for r in rows[5:])


def test_feedback_timing_flag(capsys, fixture_paths):
    rec = json.loads(run(capsys, "feedback", "--user", fixture_paths[0], "--ref", fixture_paths[1], "--timing").out)
    assert set(rec["timing"]) == {"ingest_analysis_ms", "dtw_alignment_ms", "forest_summary_ms", "completion_call_ms"}
    assert rec["timing"]["completion_call_ms"] == 0.0


def test_forest_without_model_fails(capsys, fixture_paths):
    err = run(capsys, "feedback", "--user", fixture_paths[0], "--ref", fixture_paths[1], "--method", "forest", code=2).err
    assert err.startswith("error: ")


def test_config_file(capsys, fixture_paths, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"segments": 8}))
    rec = json.loads(run(capsys, "--config", cfg, "score", "--user", fixture_paths[0], "--ref", fixture_paths[1]).out)
    assert len(rec["segments"]) == 8
    cfg.write_text(json.dumps({"segmnets": 8}))
    run(capsys, "--config", cfg, "score", "--user", fixture_paths[0], "--ref", fixture_paths[1], code=2)


def test_training_workflow(capsys, tmp_path):
    corpus_dir = tmp_path / "corpus"
    assert json.loads(run(capsys, "make-corpus", "--out", corpus_dir, "--n", 4).out)["motions"] == 4
    ds = tmp_path / "ds.json"
    rec = json.loads(run(capsys, "simulate", "--corpus", corpus_dir, "--seed", 1, "--out", ds, "--sim-dir", tmp_path / "sim").out)
    assert len(rec["train_sequences"]) == 3 and len(rec["test_sequences"]) == 1
    assert len(motion_io.load_dir(tmp_path / "sim")) == 4
    out = run(capsys, "eval-dist", "--real", corpus_dir, "--sim", tmp_path / "sim", "--json").out
    assert set(json.loads(out)) == {"X", "Y", "Z", "All"}
    assert "All" in run(capsys, "eval-dist", "--real", corpus_dir, "--sim", tmp_path / "sim").out
    rec = json.loads(run(capsys, "train", "--dataset", ds, "--n-estimators", 2, "--max-depth", 3, "--out", tmp_path / "m.json").out)
    assert rec["n_estimators"] == 2 and rec["max_depth"] == 3
    assert set(rec["test_metrics"]) >= {"precision", "recall"}
    rows = json.loads(run(capsys, "ablate", "--dataset", ds, "--grid", "2:none,2:2", "--json").out)
    assert [(r["n_estimators"], r["max_depth"]) for r in rows] == [(2, None), (2, 2)]
    assert "n_estimators" in run(capsys, "ablate", "--dataset", ds, "--grid", "1:1").out


def test_bad_depth_rejected(capsys):
    with pytest.raises(SystemExit):
        cli.main(["train", "--dataset", "d", "--out", "o", "--max-depth", "0"])


def test_make_fixtures(capsys, tmp_path, fixture_paths):
    rec = json.loads(run(capsys, "make-fixtures", "--out", tmp_path).out)
    with open(rec["user"], "rb") as f:
        assert f.read() == fixture_paths[0].read_bytes()
