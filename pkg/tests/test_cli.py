import json

import numpy as np
import pytest

from endprompt_lab import checkpoint
from endprompt_lab.cli import main
from endprompt_lab.model import init_params


def run(*argv):
    return main([str(a) for a in argv])


def body(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


def test_plan_examples(tmp_path, capsys):
    out = tmp_path / "p.txt"
    assert run("plan", "--a", 4, "--b", 2, "--L", 16, "--out", out) == 0
    assert "coverage_fraction=0.562500" in body(out)[0]
    assert run("plan", "--a", 4, "--b", 2, "--L", 9, "--out", out) == 0
    assert "gap condition unmet" in capsys.readouterr().out
    assert body(out)[0].endswith("intervals=0-8")


def test_plan_errors(capsys):
    assert run("plan", "--a", 4, "--L", 16) == 2
    assert "usage" in capsys.readouterr().err
    assert run("plan", "--a", 10, "--b", 7, "--L", 16) == 2


def test_artifacts_embed_resolved_config(tmp_path):
    out = tmp_path / "p.txt"
    run("plan", "--a", 4, "--b", 2, "--L", 16, "--out", out)
    first = out.read_text().splitlines()[0]
    meta = json.loads(first[len("# meta "):])
    assert meta["config"]["plan"]["a"] == 4 and meta["config"]["model"]["vocab_size"] == 257


def test_bernstein_examples(tmp_path):
    out = tmp_path / "b.csv"
    assert run("bernstein", "--dim", 64, "--scale", 8, "--trials", 20, "--out", out) == 0
    rows = body(out)
    assert len(rows) == 21 and all(r.endswith("true,true") for r in rows[1:])
    assert run("bernstein", "--trials", 0, "--out", out) == 0
    assert body(out) == ["amp_sum,omega_max,sup_S,sup_dS,sup_d2S,bound1,bound2,pass1,pass2"]
    assert run("bernstein", "--scale", 0.5) == 2


def test_spectrum(tmp_path):
    out = tmp_path / "s.csv"
    assert run("spectrum", "--dim", 4, "--scale", 2, "--out", out) == 0
    rows = body(out)
    assert rows[0] == "j,theta,theta_scaled,wavelength_scaled"
    assert rows[1].startswith("0,1,0.5,")


def test_config_errors(tmp_path):
    bad = tmp_path / "c.json"
    bad.write_text('{"model": {"depth": 3}}')
    assert run("plan", "--config", bad, "--b", 2) == 2
    bad.write_text("{not json")
    assert run("plan", "--config", bad, "--b", 2) == 2
    assert run("plan", "--config", "no-such-bundle", "--b", 2) == 2


def test_missing_inputs_exit_2(tmp_path):
    assert run("train", "--config", "smoke", "--out", tmp_path / "m.ckpt") == 2
    assert run("train", "--config", "smoke", "--data", tmp_path / "none.jsonl") == 2
    assert run("eval", "--config", "smoke", "--checkpoint", tmp_path / "none.ckpt") == 2
    assert run("report", tmp_path / "none.csv") == 2


def test_train_zero_steps_writes_init(tmp_path):
    data = tmp_path / "d.jsonl"
    ckpt = tmp_path / "m.ckpt"
    assert run("make-data", "--config", "smoke", "--n-samples", 8, "--out", data) == 0
    assert run("train", "--config", "smoke", "--data", data, "--max-steps", 0, "--seed", 4, "--out", ckpt) == 0
    cfg, params, meta = checkpoint.load(ckpt)
    init = init_params(cfg, 4)
    assert all(np.array_equal(params[k], init[k]) for k in init)
    assert meta["config"]["train"]["max_steps"] == 0


def test_eval_range_error(tmp_path):
    ckpt = tmp_path / "m.ckpt"
    data = tmp_path / "d.jsonl"
    run("make-data", "--config", "smoke", "--n-samples", 8, "--out", data)
    run("train", "--config", "smoke", "--data", data, "--max-steps", 0, "--out", ckpt)
    assert run("eval", "--config", "smoke", "--checkpoint", ckpt, "--T-eval", 2048) == 2


def test_threads_flag_and_env(tmp_path, monkeypatch):
    out = tmp_path / "p.txt"
    assert run("plan", "--b", 2, "--a", 4, "--L", 16, "--threads", 2, "--out", out) == 0
    monkeypatch.setenv("ENDPROMPT_LAB_THREADS", "0")
    assert run("plan", "--b", 2, "--a", 4, "--L", 16, "--out", out) == 2


def test_pretrain_uses_its_own_section(tmp_path):
    ckpt = tmp_path / "base.ckpt"
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": {"model_dim": 16, "num_layers": 1}, "pretrain": {"batch_size": 2}}))
    assert run("train", "--config", cfg, "--pretrain", "--max-steps", 3, "--out", ckpt) == 0
    _, _, meta = checkpoint.load(ckpt)
    assert meta["steps"] == 3 and meta["data"] == "pretrain"
    assert meta["config"]["pretrain"]["steps"] == 3
