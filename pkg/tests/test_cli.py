import json

import pytest

from reefpipe.cli import main

from conftest import build_corpus


def write_scene(tmp_path, **overrides):
    spec = {"type": "synthetic", "seed": 5, "frames": 12, "width": 160,
            "height": 120, "objects": 2, "max_speed": 1}
    spec.update(overrides)
    path = tmp_path / "scene.json"
    path.write_text(json.dumps(spec))
    return path


def test_missing_source_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["eval"])
    assert exc.value.code == 2


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--source", "x", "--warp-speed", "9"])
    assert exc.value.code == 2


def test_print_config_reflects_overrides(tmp_path, capsys):
    scene = write_scene(tmp_path)
    code = main(["run", "--source", str(scene), "--batch-size", "2",
                 "--input-size", "160", "--print-config"])
    assert code == 0
    config = json.loads(capsys.readouterr().out)
    assert config["batch_size"] == 2
    assert config["input_size"] == 160
    assert config["conf_threshold"] == 0.25  # default untouched


def test_config_file_and_flag_precedence(tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"batch_size": 8, "skip_interval": 3,
                                    "frame_queue_capacity": 16}))
    scene = write_scene(tmp_path)
    code = main(["run", "--source", str(scene), "--config", str(cfg_file),
                 "--batch-size", "2", "--print-config"])
    assert code == 0
    config = json.loads(capsys.readouterr().out)
    assert config["batch_size"] == 2       # flag beats file
    assert config["skip_interval"] == 3    # file beats default


def test_config_env_var_default(tmp_path, capsys, monkeypatch):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"skip_interval": 5}))
    monkeypatch.setenv("REEFPIPE_CONFIG", str(cfg_file))
    scene = write_scene(tmp_path)
    assert main(["run", "--source", str(scene), "--print-config"]) == 0
    assert json.loads(capsys.readouterr().out)["skip_interval"] == 5


def test_bad_config_key_is_runtime_error(tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"warp_speed": 9}))
    scene = write_scene(tmp_path)
    code = main(["run", "--source", str(scene), "--config", str(cfg_file)])
    assert code == 1
    assert "warp_speed" in capsys.readouterr().err


def test_eval_zero_noise_prints_perfect_f2(tmp_path, capsys):
    scene = write_scene(tmp_path, frames=20)
    code = main(["eval", "--source", str(scene), "--input-size", "160"])
    assert code == 0
    out = capsys.readouterr().out
    assert "mean F2 1.000" in out


def test_eval_json_report(tmp_path, capsys):
    scene = write_scene(tmp_path)
    code = main(["eval", "--source", str(scene), "--input-size", "160", "--json"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["mean_f2"] == 1.0
    assert len(report["rows"]) == 11


def test_eval_directory_corpus_with_truth(tmp_path, capsys):
    from reefpipe.boxes import BoundingBox

    truth = {fid: [BoundingBox(10, 10, 20, 20)] for fid in range(6)}
    corpus = build_corpus(tmp_path / "corpus", n_frames=6, truth=truth)
    code = main(["eval", "--source", str(corpus), "--input-size", "64",
                 "--eval-mode", "detections"])
    assert code == 0
    assert "mean F2 1.000" in capsys.readouterr().out


def test_eval_without_truth_fails(tmp_path, capsys):
    corpus = build_corpus(tmp_path / "corpus", n_frames=3)
    code = main(["eval", "--source", str(corpus), "--input-size", "64"])
    assert code == 1
    assert "ground truth" in capsys.readouterr().err


def test_sweep_emits_grid_table(tmp_path, capsys):
    scene = write_scene(tmp_path, frames=8, width=320, height=240)
    code = main([
        "sweep", "--source", str(scene),
        "--batch-size", "1,4", "--input-size", "240,320",
        "--sim-overhead-ms", "5", "--sim-per-mp-ms", "2",
    ])
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    rows = [l for l in out if l.startswith("batch")]
    assert len(rows) == 4
    assert any("batch 1, 240p" in r for r in rows)
    assert any("batch 4, 320p" in r for r in rows)


def test_run_archives_and_reports_metrics(tmp_path, capsys):
    scene = write_scene(tmp_path, frames=10)
    out_dir = tmp_path / "run"
    code = main(["run", "--source", str(scene), "--out", str(out_dir),
                 "--input-size", "160", "--queue-policy", "block"])
    assert code == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["frames_in"] == 10
    assert metrics["status"] == "ok"
    assert (out_dir / "tracks.jsonl").is_file()
    assert len(list((out_dir / "frames").glob("*.jpg"))) == 10


def test_export_cli_labeled_only(tmp_path, capsys):
    scene = write_scene(tmp_path, frames=10)
    out_dir = tmp_path / "run"
    assert main(["run", "--source", str(scene), "--out", str(out_dir),
                 "--input-size", "160", "--queue-policy", "block"]) == 0
    capsys.readouterr()

    from reefpipe.store import TrackStore

    store = TrackStore.load(out_dir)
    store.label_track(0, "tp", "tester")
    store.close()

    dest = tmp_path / "curated"
    code = main(["export", "--run-dir", str(out_dir), "--dest", str(dest),
                 "--labeled-only"])
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["counts"]["tracks"] == 1
    records = [json.loads(l) for l in (dest / "tracks.jsonl").read_text().splitlines()]
    assert [r["track_id"] for r in records] == [0]


def test_export_to_nonempty_dir_fails(tmp_path, capsys):
    dest = tmp_path / "dest"
    dest.mkdir()
    (dest / "file").write_text("x")
    run_dir = tmp_path / "ghost-run"
    run_dir.mkdir()
    code = main(["export", "--run-dir", str(run_dir), "--dest", str(dest)])
    assert code == 1
