import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from mtgn import cli
from mtgn.flow import FlowParams, load_checkpoint, save_checkpoint
from mtgn.numerics import read_points, write_points
from mtgn.saddle import quadrants_visited
from oracles import brute_push, brute_relative_error


def run(*argv):
    return cli.main([str(a) for a in argv])


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def small_task(tmp_path):
    out = tmp_path / "task"
    assert run("synth", "--d", 2, "--layers", 3, "--n", 128, "--seed", 7, "--out", out) == 0
    return out


def test_synth_outputs(small_task):
    names = sorted(p.name for p in small_task.iterdir())
    assert names == ["R_train.csv", "T_test.csv", "T_train.csv", "manifest.json", "scatter.svg", "theta_true.json"]
    svg = (small_task / "scatter.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<circle") == 256
    manifest = json.loads((small_task / "manifest.json").read_text())
    assert manifest["command"] == "synth" and manifest["seed"] == 7
    assert manifest["outputs"]["T_train.csv"] == sha(small_task / "T_train.csv")


def test_synth_default_sizes(tmp_path):
    assert run("synth", "--seed", 7, "--out", tmp_path) == 0
    assert read_points(tmp_path / "T_train.csv").shape == (1000, 2)
    assert load_checkpoint(tmp_path / "theta_true.json").L == 10


def test_synth_rerun_byte_identical(tmp_path, small_task):
    again = tmp_path / "again"
    run("synth", "--d", 2, "--layers", 3, "--n", 128, "--seed", 7, "--out", again)
    for name in ("T_train.csv", "R_train.csv", "T_test.csv", "theta_true.json"):
        assert sha(again / name) == sha(small_task / name)


def test_synth_3d_skips_plot(tmp_path, capsys):
    assert run("synth", "--d", 3, "--layers", 2, "--n", 20, "--out", tmp_path) == 0
    assert not (tmp_path / "scatter.svg").exists()
    notes = json.loads((tmp_path / "manifest.json").read_text())["notes"]
    assert any("d=3" in n for n in notes)
    assert "warning" in capsys.readouterr().err


def _train(task, out, *extra):
    return run("train", "--task", task, "--layers", 3, "--epochs", 3, "--batch", 64, "--out", out, *extra)


def test_train_outputs(tmp_path, small_task):
    out = tmp_path / "run"
    assert _train(small_task, out) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["checkpoint.json", "config.json", "history.csv", "manifest.json", "misfit.svg"]
    lines = (out / "history.csv").read_text().splitlines()
    assert lines[0] == "epoch,sigma,misfit,energy,total,grad_norm" and len(lines) == 4
    assert load_checkpoint(out / "checkpoint.json").L == 3
    cfg = json.loads((out / "config.json").read_text())
    assert cfg["batch_size"] == 64 and cfg["schedule"]["initial"] == 50.0


def test_train_rerun_reproducible(tmp_path, small_task):
    _train(small_task, tmp_path / "a")
    _train(small_task, tmp_path / "b")
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())["outputs"]
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())["outputs"]
    assert ma == mb


def test_train_from_manifest_config(tmp_path, small_task):
    _train(small_task, tmp_path / "a", "--alpha", 0.001, "--seed", 3)
    cfg = json.loads((tmp_path / "a" / "manifest.json").read_text())["config"]
    assert cfg["alpha"] == 0.001 and cfg["seed"] == 3


def test_train_batch_validation(tmp_path, small_task):
    assert _train(small_task, tmp_path / "ok", "--alpha", 0) == 0
    assert run("train", "--task", small_task, "--batch", 8, "--epochs", 1, "--out", tmp_path / "bad") == 1
    assert run("train", "--task", small_task, "--batch", 8, "--epochs", 1, "--layers", 2,
               "--unsafe-small-batch", "--out", tmp_path / "forced") == 0


def test_train_sigma_flags(tmp_path):
    T = np.random.default_rng(0).standard_normal((64, 2))
    write_points(tmp_path / "T.csv", T)
    write_points(tmp_path / "R.csv", 0.7 * T[::-1])
    out = tmp_path / "run"
    code = run("train", "--template", tmp_path / "T.csv", "--reference", tmp_path / "R.csv",
               "--layers", 2, "--epochs", 200, "--batch", 64,
               "--sigma-init", 50, "--sigma-period", 30, "--sigma-floor", 0.78, "--out", out)
    assert code == 0
    rows = (out / "history.csv").read_text().splitlines()[1:]
    sigma = {int(r.split(",")[0]): float(r.split(",")[1]) for r in rows}
    assert sigma[0] == 50.0 and sigma[30] == 25.0 and sigma[199] == 0.78125


def test_train_needs_inputs(tmp_path):
    assert run("train", "--out", tmp_path) == 1


def test_train_ragged_csv(tmp_path, capsys):
    (tmp_path / "T.csv").write_text("x0,x1\n1,2\n3\n")
    write_points(tmp_path / "R.csv", np.zeros((3, 2)))
    code = run("train", "--template", tmp_path / "T.csv", "--reference", tmp_path / "R.csv", "--out", tmp_path)
    assert code == 2
    assert "T.csv:3" in capsys.readouterr().err


def test_train_missing_csv(tmp_path, capsys):
    code = run("train", "--template", tmp_path / "nope.csv", "--reference", tmp_path / "nope.csv", "--out", tmp_path)
    assert code == 2
    assert "nope.csv" in capsys.readouterr().err


def test_train_dimension_mismatch(tmp_path):
    write_points(tmp_path / "T.csv", np.zeros((64, 2)))
    write_points(tmp_path / "R.csv", np.zeros((64, 3)))
    assert run("train", "--template", tmp_path / "T.csv", "--reference", tmp_path / "R.csv", "--out", tmp_path) == 2


def test_train_numeric_failure(tmp_path, small_task, monkeypatch, capsys):
    def boom(*a, **k):
        raise cli.NumericalFailure(4, "loss")

    monkeypatch.setattr(cli, "train", boom)
    assert _train(small_task, tmp_path / "x") == 3
    assert "epoch 4" in capsys.readouterr().err


def test_eval_true_checkpoint(tmp_path, small_task, capsys):
    out = tmp_path / "ev"
    assert run("eval", "--checkpoint", small_task / "theta_true.json", "--task", small_task, "--out", out) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["E"] == 0.0 and metrics["misfit_final"] >= 0
    assert "E = 0" in capsys.readouterr().out


def test_eval_near_zero_checkpoint_matches_oracle(tmp_path, small_task):
    params = FlowParams(1e-3 * np.ones((2, 2, 2)))
    save_checkpoint(tmp_path / "ck.json", params)
    run("eval", "--checkpoint", tmp_path / "ck.json", "--task", small_task, "--out", tmp_path / "ev")
    E = json.loads((tmp_path / "ev" / "metrics.json").read_text())["E"]
    T_test = read_points(small_task / "T_test.csv").tolist()
    true = load_checkpoint(small_task / "theta_true.json")
    want = brute_relative_error(brute_push(params.layers.tolist(), T_test), brute_push(true.layers.tolist(), T_test))
    assert E == pytest.approx(want, rel=1e-12)


def test_eval_missing_inputs(tmp_path, small_task):
    assert run("eval", "--checkpoint", tmp_path / "none.json", "--task", small_task, "--out", tmp_path) == 2


def test_saddle_command(tmp_path):
    assert run("saddle", "--mu", 0.01, "--steps", 5000, "--out", tmp_path) == 0
    pts = np.loadtxt(tmp_path / "trajectory.csv", delimiter=",", skiprows=1)
    assert pts.shape == (5001, 3)
    assert tuple(pts[0]) == (0.0, 1.0, 1.0)
    assert quadrants_visited(pts[:, 1:]) == {1, 2, 3, 4}
    svg = (tmp_path / "path.svg").read_text()
    assert "<polyline" in svg and cli.REFERENCE_COLOUR in svg and cli.TEMPLATE_COLOUR in svg


def test_saddle_custom_start(tmp_path):
    run("saddle", "--steps", 3, "--theta0", 2, "--eta0", -1, "--out", tmp_path)
    first = (tmp_path / "trajectory.csv").read_text().splitlines()[1]
    assert first == "0,2,-1"


@pytest.mark.parametrize("mu", [0, -0.5])
def test_saddle_bad_mu(tmp_path, mu):
    assert run("saddle", "--mu", mu, "--out", tmp_path) == 1


def test_ingest_wide(tmp_path, capsys):
    X = np.random.default_rng(1).standard_normal((5000, 32))
    np.savetxt(tmp_path / "latent.csv", X, delimiter=",")
    assert run("ingest", tmp_path / "latent.csv", "--out", tmp_path / "out") == 0
    assert "d = 32" in capsys.readouterr().out
    summary = json.loads((tmp_path / "out" / "summary.json").read_text())
    assert summary["n"] == 5000 and summary["d"] == 32
    assert np.allclose(summary["mean"], X.mean(axis=0))


def test_ingest_ragged(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("1,2,3\n4,5,6\n7,8\n")
    assert run("ingest", tmp_path / "bad.csv", "--out", tmp_path / "o") == 2
    assert "bad.csv:3" in capsys.readouterr().err


def test_ingest_idempotent(tmp_path):
    np.savetxt(tmp_path / "raw.csv", np.random.default_rng(2).standard_normal((50, 4)), delimiter=",", fmt="%.6e")
    run("ingest", tmp_path / "raw.csv", "--out", tmp_path / "a")
    run("ingest", tmp_path / "a" / "points.csv", "--out", tmp_path / "b")
    assert sha(tmp_path / "a" / "points.csv") == sha(tmp_path / "b" / "points.csv")


def test_bad_flags_exit_usage(capsys):
    with pytest.raises(SystemExit) as err:
        run("synth", "--d", "two")
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        run("nonsense")
    assert err.value.code == 1


def test_help_documents_defaults(capsys):
    with pytest.raises(SystemExit):
        run("train", "--help")
    text = capsys.readouterr().out
    for flag in ("--alpha", "--lr", "--sigma-init", "--sigma-factor", "--sigma-period", "--sigma-floor",
                 "--optimizer", "--bias", "--batch", "--seed"):
        assert flag in text
    assert "default 50.0" in text and "default 0.78" in text


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "mtgn", "saddle", "--steps", "10", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "manifest.json").exists()
