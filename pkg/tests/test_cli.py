import json

import pytest

from gustpilot.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from gustpilot.harness import CHECKPOINT_NAME, EPISODES_LOG
from gustpilot.wind import load_field


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "total_steps": 150, "eval_episodes": 2, "train_max_steps": 60, "eval_max_steps": 60,
        "eval_radius": [5.0, 15.0], "sac": {"hidden_dims": [8, 8], "batch_size": 8}}))
    return path


def test_train_then_eval(tmp_path, config, capsys):
    out = tmp_path / "run"
    assert main(["train", "--config", str(config), "--scheme", "mf", "--out", str(out)]) == EXIT_OK
    assert (out / CHECKPOINT_NAME).exists() and (out / EPISODES_LOG).exists()
    assert main(["eval", "--config", str(config), "--scheme", "mf", "--out", str(out)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out.split("\n", 1)[1])
    assert report["scheme"] == "mf" and report["episodes"] == 2
    assert (out / "eval_mf.csv").exists()


def test_resume_extends_run(tmp_path, config):
    out = tmp_path / "run"
    assert main(["train", "--config", str(config), "--scheme", "lb", "--out", str(out)]) == EXIT_OK
    assert main(["train", "--config", str(config), "--out", str(out), "--steps", "200",
                 "--resume", str(out / CHECKPOINT_NAME)]) == EXIT_OK


def test_fixed_eval_without_checkpoint(tmp_path, config):
    assert main(["eval", "--config", str(config), "--scheme", "fixed",
                 "--out", str(tmp_path)]) == EXIT_OK


def test_config_errors_exit_2(tmp_path, config, capsys):
    assert main(["train", "--config", str(config), "--scheme", "fixed",
                 "--out", str(tmp_path)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["train", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nonsense": 1}))
    assert main(["train", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["eval", "--config", str(config), "--scheme", "mf",
                 "--out", str(tmp_path / "empty")]) == EXIT_CONFIG


def test_runtime_errors_exit_1(tmp_path, config, capsys):
    assert main(["eval", "--config", str(config), "--scheme", "mf",
                 "--checkpoint", str(tmp_path / "nope.gnav")]) == EXIT_RUNTIME
    junk = tmp_path / "junk.gnav"
    junk.write_bytes(b"GNAV1\x01")
    assert main(["eval", "--config", str(config), "--scheme", "mf",
                 "--checkpoint", str(junk)]) == EXIT_RUNTIME
    assert "truncated" in capsys.readouterr().err


def test_windgen(tmp_path):
    spec = tmp_path / "gust.json"
    spec.write_text(json.dumps({"seed": 4, "mode_count": 3,
                                "extent": [[0, 20], [0, 10], [0, 10]], "spacing": [5, 5, 5]}))
    out = tmp_path / "field.wind"
    assert main(["windgen", "--spec", str(spec), "--out", str(out)]) == EXIT_OK
    field = load_field(out)
    assert field.dims == (5, 3, 3)
    spec.write_text(json.dumps({"clip": [3, -3]}))
    assert main(["windgen", "--spec", str(spec), "--out", str(out)]) == EXIT_CONFIG


def test_wind_file_in_config(tmp_path, config):
    spec = tmp_path / "gust.json"
    spec.write_text(json.dumps({"seed": 1}))
    field = tmp_path / "field.wind"
    main(["windgen", "--spec", str(spec), "--out", str(field)])
    cfg = json.loads(config.read_text())
    cfg.update(wind_file=str(field), eval_wind_file=str(field))
    config.write_text(json.dumps(cfg))
    assert main(["eval", "--config", str(config), "--scheme", "fixed",
                 "--out", str(tmp_path)]) == EXIT_OK
    field.write_text("WINDGRID 9\n")
    assert main(["eval", "--config", str(config), "--scheme", "fixed",
                 "--out", str(tmp_path)]) == EXIT_RUNTIME


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    assert all(cmd in text for cmd in ("train", "eval", "windgen"))
