import json
import subprocess
import sys
from pathlib import Path

import pytest

from aspectnet.cli import ConfigError, Manifest, RunConfig, main, run_stage
from aspectnet.cli.main import PIPELINE
from aspectnet.data import write_jsonl

TINY = """
[run]
seed = 3

[data]
synthetic_reviews = 120
max_len = 32

[model.transformer]
embed_dim = 8
hidden = 8
layers = 1
heads = 2
ff = 16

[model.bilstm]
embed_dim = 8
hidden = 6

[model.lstm]
embed_dim = 8
hidden = 6

[model.gru]
embed_dim = 8
hidden = 6

[train.transformer]
epochs = 1
[train.bilstm]
epochs = 1
[train.lstm]
epochs = 1
[train.gru]
epochs = 1

[ensemble]
weight_steps = 10

[explain]
instances = 1
shap_budget = 64
lime_samples = 64

[transfer]
seeds = 0
budgets = 10
pool_size = 40
test_size = 30
sweep_shifts = 0.0, 1.0
epochs = 1
"""


def write_config(path: Path, text: str = TINY) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def cli(*args) -> int:
    return main([str(a) for a in args])


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = write_config(root / "tiny.ini")
    out = root / "run"
    assert cli("run", "--config", cfg, "--out", out) == 0
    return cfg, out


# -- config -----------------------------------------------------------------------------


def test_config_defaults_and_coercion(tmp_path):
    cfg = RunConfig.load(write_config(tmp_path / "c.ini", "[data]\nratios = 0.8, 0.1, 0.1\nnormalize = no\n"
                                                           "[model.gru]\nhidden = 7\n"))
    assert cfg["data"]["ratios"] == [0.8, 0.1, 0.1]
    assert cfg["data"]["normalize"] is False
    assert cfg["run"]["seed"] == 0
    assert cfg.member_overrides("gru") == {"hidden": 7}


def test_config_json_equals_ini(tmp_path):
    ini = RunConfig.load(write_config(tmp_path / "c.ini", "[run]\nseed = 5\n[transfer]\nbudgets = 10, 20\n"))
    js = tmp_path / "c.json"
    js.write_text(json.dumps({"run": {"seed": 5}, "transfer": {"budgets": [10, 20]}}))
    assert RunConfig.load(js).hash() == ini.hash()


@pytest.mark.parametrize("text", ["[nope]\nx = 1\n", "[data]\nmystery = 1\n", "[run]\nseed = abc\n",
                                  "[data]\nnormalize = maybe\n", "[model.cnn]\nhidden = 3\n", "not ini at all"])
def test_config_errors(tmp_path, text):
    with pytest.raises(ConfigError):
        RunConfig.load(write_config(tmp_path / "bad.ini", text))


def test_config_hash_ignores_out_only():
    a, b = RunConfig(), RunConfig()
    b.set("run", "out", "elsewhere")
    assert a.hash() == b.hash()
    b.set("run", "seed", 1)
    assert a.hash() != b.hash()


def test_portable_ini_round_trip(tmp_path):
    cfg = RunConfig.load(write_config(tmp_path / "c.ini"))
    text = cfg.to_ini(portable=True)
    assert "out =" not in text
    again = RunConfig.load(write_config(tmp_path / "d.ini", text))
    assert again.hash() == cfg.hash()


# -- exit codes and errors --------------------------------------------------------------


def test_missing_predecessor_exit_3(tmp_path, capsys):
    assert cli("train", "--out", tmp_path / "empty") == 3
    err = json.loads(capsys.readouterr().err)
    assert err["exit_code"] == 3 and err["error"] == "MissingPredecessor"


def test_bad_config_exit_2(tmp_path, capsys):
    assert cli("ingest", "--config", write_config(tmp_path / "x.ini", "[bogus]\n")) == 2
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"
    assert cli("ingest", "--config", tmp_path / "absent.ini") == 2


def test_bad_dataset_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.ini", f"[data]\npath = {tmp_path / 'missing.jsonl'}\n")
    assert cli("ingest", "--config", cfg, "--out", tmp_path / "r") == 2
    assert "exit_code" in json.loads(capsys.readouterr().err)


def test_jobs_must_be_positive(tmp_path):
    assert cli("ingest", "--out", tmp_path, "--jobs", 0) == 2


def test_module_entry_point_version():
    out = subprocess.run([sys.executable, "-m", "aspectnet", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("aspectnet ")


# -- stats on the fixture ---------------------------------------------------------------


def test_stats_on_three_row_fixture(tmp_path, fixture_reviews):
    write_jsonl(fixture_reviews, tmp_path / "fixture.jsonl")
    cfg = write_config(tmp_path / "c.ini", f"[data]\npath = {tmp_path / 'fixture.jsonl'}\n")
    out = tmp_path / "run"
    assert cli("ingest", "--config", cfg, "--out", out) == 0
    assert cli("stats", "--config", cfg, "--out", out) == 0
    stats = json.loads((out / "reports/stats.json").read_text(encoding="utf-8"))
    assert stats["n_reviews"] == 3
    assert stats["n_annotations"] == 5
    assert stats["platforms"] == {"Daraz": 2, "Facebook": 1}
    assert stats["aspects"]["Price"] == {"Positive": 0, "Negative": 1, "Neutral": 1}
    assert "reviews: 3" in (out / "reports/stats.txt").read_text(encoding="utf-8")


# -- full pipeline on a tiny config -----------------------------------------------------


def test_pipeline_records_every_stage(tiny_run):
    _, out = tiny_run
    m = Manifest.open(out)
    assert set(m.stages) == set(PIPELINE)
    for name, rec in m.stages.items():
        for rel in rec["outputs"]:
            assert (out / rel).exists(), rel
    for rel in ("models/transformer.ckpt", "reports/evaluation.json", "reports/ablation.csv",
                "reports/transfer.json", "reports/summary.txt", "config.ini"):
        assert (out / rel).exists(), rel
    assert any(p.suffix == ".json" for p in (out / "explanations").iterdir())


def test_rerun_skips_everything(tiny_run, capsys):
    cfg, out = tiny_run
    capsys.readouterr()
    assert cli("run", "--config", cfg, "--out", out) == 0
    result = json.loads(capsys.readouterr().out)
    assert all(r["skipped"] for r in result.values())


def test_changed_artifact_reruns_stage(tiny_run, capsys):
    cfg, out = tiny_run
    p = out / "reports/stats.txt"
    original = p.read_bytes()
    p.write_bytes(original + b"tampered\n")
    capsys.readouterr()
    assert cli("stats", "--config", cfg, "--out", out) == 0
    assert json.loads(capsys.readouterr().out)["stats"]["skipped"] is False
    assert p.read_bytes() == original


def test_stale_config_exit_4(tiny_run, tmp_path, capsys):
    _, out = tiny_run
    changed = write_config(tmp_path / "changed.ini", TINY.replace("seed = 3", "seed = 4"))
    assert cli("evaluate", "--config", changed, "--out", out) == 4
    assert json.loads(capsys.readouterr().err)["error"] == "StaleConfig"


def test_train_is_byte_identical_across_runs(tiny_run, tmp_path):
    cfg, out = tiny_run
    other = tmp_path / "again"
    c = RunConfig.load(cfg)
    c.set("run", "out", str(other))
    run_stage("ingest", c)
    run_stage("train", c)
    for ck in sorted((out / "models").glob("*.ckpt")):
        assert (other / "models" / ck.name).read_bytes() == ck.read_bytes(), ck.name
    assert (other / "config.ini").read_bytes() == (out / "config.ini").read_bytes()


def test_synth_subcommand(tmp_path, capsys):
    path = tmp_path / "s.jsonl"
    assert cli("synth", path, "-n", 7, "--seed", 2) == 0
    assert json.loads(capsys.readouterr().out)["reviews"] == 7
    assert len(path.read_text(encoding="utf-8").splitlines()) == 7
