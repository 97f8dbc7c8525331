import hashlib
import json

import pytest

from wellssl import cli, config
from wellssl.augment import Kind, SigmaMode

TINY = {
    "data": {"n_wells": 6, "samples_per_well": 300, "interval_length": 40, "stride": 40},
    "encoder": {"hidden_size": 6, "head_hidden": 12, "head_out": 8},
    "ssl": {"batch_size": 16, "max_epochs": 3},
    "augment": {"window_size": 25},
    "eval": {"n_pairs": 100, "probe_seeds": [0]},
}


@pytest.fixture
def tiny_config(tmp_path):
    data = json.loads(json.dumps(TINY))
    data["paths"] = {"root": str(tmp_path / "run")}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data))
    return path


def _digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


PIPELINE = ["synth", "preprocess", "train", "embed", "eval-cluster", "eval-probe"]


def test_pipeline_end_to_end(tiny_config, tmp_path):
    for stage in PIPELINE:
        extra = ["--method", "barlow-twins"] if stage == "train" else []
        assert cli.main([stage, "-c", str(tiny_config), *extra]) == 0, stage
    run = tmp_path / "run"
    for name in ("synth.csv", "intervals.bin", "checkpoint.bin", "history.csv", "embeddings.csv",
                 "cluster_metrics.csv", "assignments.csv", "probe_metrics.csv", "effective_config.json"):
        assert (run / name).is_file(), name
    header = (run / "cluster_metrics.csv").read_text().splitlines()
    assert header[0] == "task,probe,metric,value,seed" and len(header) == 4
    assert (run / "history.csv").read_text().startswith("epoch,train_loss,val_loss,lr\n")


def test_rerun_from_snapshot_is_bit_identical(tiny_config, tmp_path):
    for stage in PIPELINE[:3]:
        assert cli.main([stage, "-c", str(tiny_config)]) == 0
    run = tmp_path / "run"
    before = {n: _digest(run / n) for n in ("synth.csv", "intervals.bin", "checkpoint.bin", "history.csv")}
    snapshot = tmp_path / "snapshot.json"
    snapshot.write_bytes((run / "effective_config.json").read_bytes())
    for stage in PIPELINE[:3]:
        assert cli.main([stage, "-c", str(snapshot)]) == 0
    assert {n: _digest(run / n) for n in before} == before


def test_probe_leaves_checkpoint_untouched(tiny_config, tmp_path):
    for stage in PIPELINE[:4]:
        assert cli.main([stage, "-c", str(tiny_config)]) == 0
    ckpt = tmp_path / "run" / "checkpoint.bin"
    h = _digest(ckpt)
    assert cli.main(["eval-probe", "-c", str(tiny_config)]) == 0
    assert _digest(ckpt) == h


def test_override_in_snapshot(tiny_config, tmp_path):
    assert cli.main(["synth", "-c", str(tiny_config), "--set", "optim.base_lr=0.05",
                     "--set", "augment.sigma_mode=per_feature"]) == 0
    snap = json.loads((tmp_path / "run" / "effective_config.json").read_text())
    assert snap["optim"]["base_lr"] == 0.05
    assert snap["augment"]["sigma_mode"] == "per_feature"
    assert snap["data"]["n_wells"] == 6


def test_unknown_key_names_path(tiny_config, capsys):
    assert cli.main(["train", "-c", str(tiny_config), "--set", "optim.base_lrr=0.1"]) == 1
    assert "optim.base_lrr" in capsys.readouterr().err


def test_unknown_key_in_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"ssl": {"methd": "byol"}}))
    assert cli.main(["synth", "-c", str(path)]) == 1
    assert "ssl.methd" in capsys.readouterr().err


def test_bad_value_is_validation_error(tiny_config, capsys):
    assert cli.main(["synth", "-c", str(tiny_config), "--set", "augment.window_size=87"]) == 1
    assert cli.main(["synth", "-c", str(tiny_config), "--set", "data.n_wells=many"]) == 1
    assert "data.n_wells" in capsys.readouterr().err


def test_missing_input_names_file(tmp_path, capsys):
    assert cli.main(["embed", "--root", str(tmp_path / "empty")]) == 1
    assert "checkpoint.bin" in capsys.readouterr().err


def test_missing_config_file(tmp_path, capsys):
    assert cli.main(["synth", "-c", str(tmp_path / "nope.json")]) == 1
    assert "nope.json" in capsys.readouterr().err


def test_numeric_failure_exit_code(tiny_config, monkeypatch):
    def boom(*a, **k):
        raise cli.encoder.NumericError("non-finite loss")

    for stage in PIPELINE[:2]:
        assert cli.main([stage, "-c", str(tiny_config)]) == 0
    monkeypatch.setattr(cli.ssl, "train", boom)
    assert cli.main(["train", "-c", str(tiny_config)]) == 2


def test_thread_env(tiny_config, monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "1")
    assert cli.main(["synth", "-c", str(tiny_config)]) == 0
    monkeypatch.setenv(cli.THREADS_ENV, "zero")
    assert cli.main(["synth", "-c", str(tiny_config)]) == 1


def test_train_stride_writes_second_file(tiny_config, tmp_path):
    over = ["--set", "data.train_stride=20"]
    for stage in PIPELINE[:3]:
        assert cli.main([stage, "-c", str(tiny_config), *over]) == 0
    assert (tmp_path / "run" / "train_intervals.bin").is_file()


# ---------------------------------------------------------------- config module


def test_config_defaults_round_trip(tmp_path):
    cfg = config.RunConfig()
    config.save(cfg, tmp_path / "c.json")
    assert config.load(tmp_path / "c.json") == cfg


def test_config_types_and_nulls():
    cfg = config.load(None, ["ssl.batch_size=null", "optim.weight_decay=0", "eval.probe_seeds=[4,5]"])
    assert cfg.ssl.batch_size is None and cfg.train_config().batch_size == 2048
    assert isinstance(cfg.optim.weight_decay, float)
    assert cfg.eval.probe_seeds == [4, 5]
    with pytest.raises(config.ConfigError, match="optim.exclude_bias_from_adaptation"):
        config.load(None, ["optim.exclude_bias_from_adaptation=1"])
    with pytest.raises(config.ConfigError, match="eval.probe_seeds\\[0\\]"):
        config.load(None, ["eval.probe_seeds=[\"a\"]"])


def test_config_augment_keys_reach_views():
    cfg = config.load(None, ["augment.kind=jitter", "augment.sigma_mode=per_feature", "augment.jitter_sigma=0.1"])
    a, b = cfg.train_config().view_specs()
    assert a == b and a.kind is Kind.JITTER and a.sigma_mode is SigmaMode.PER_FEATURE
    cfg = config.load(None, ["augment.kind=window_slice", "augment.window_size=65", "ssl.method=byol"])
    a, b = cfg.train_config().view_specs()
    assert a == b and a.window_size == 65
    with pytest.raises(config.ConfigError):
        config.load(None, ["augment.kind=rotate"])


def test_config_optim_keys_reach_trainer():
    cfg = config.load(None, ["optim.trust_coefficient=0.002", "optim.ema_momentum=0.9", "optim.cosine_t_max=7"])
    t = cfg.train_config()
    assert t.lars.trust_coefficient == 0.002 and t.ema.momentum == 0.9 and t.cosine_t_max == 7
