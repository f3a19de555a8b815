import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from cedl.cli import main

BASE = {
    "experiment_id": "cli",
    "data": {"source": "synthetic", "kind": "gaussian", "seed": 4,
             "clusters": [{"mean": [0, 0], "stdev": 0.3, "count": 100, "label": 0},
                          {"mean": [3, 0], "stdev": 0.3, "count": 30, "label": 1},
                          {"mean": [0, 3], "stdev": 0.3, "count": 30, "label": 2}]},
    "encoder": {"hidden": [8], "latent_dim": 2},
    "train": {"epochs": 3, "batch_size": 16, "learning_rate": 1e-2},
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text(yaml.safe_dump(BASE))
    return path


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_run_prints_records(config, tmp_path, capsys):
    assert main(["run", "--config", str(config), "--output-dir", str(tmp_path / "o"),
                 "--objective", "cedl,bce"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert [json.loads(l)["cell"] for l in lines] == ["single-cedl", "single-bce"]
    assert (tmp_path / "o" / "results.jsonl").read_text().splitlines() == lines


def test_flags_override_config(config, tmp_path, capsys):
    main(["run", "--config", str(config), "--output-dir", str(tmp_path / "o"), "--seed", "9",
          "--epochs", "2", "--timing"])
    rec = json.loads(capsys.readouterr().out)
    assert rec["seed"] == 9 and "wall_time_s" in rec


def test_run_from_flags_only(tmp_path, capsys):
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(0, 0.3, (50, 2)), rng.normal(2, 0.3, (10, 2))])
    y = [0] * 50 + [1] * 10
    data = tmp_path / "d.csv"
    data.write_text("".join(f"{a!r},{b!r},{t}\n" for (a, b), t in zip(X.tolist(), y)))
    code = main(["run", "--data", str(data), "--hidden", "4", "--latent-dim", "2", "--epochs", "2",
                 "--output-dir", str(tmp_path / "o")])
    assert code == 0
    assert json.loads(capsys.readouterr().out)["metrics"]["n_positive"] == 4


def test_error_exit_code(tmp_path, capsys):
    code = main(["run", "--data", str(tmp_path / "nope.csv"), "--output-dir", str(tmp_path / "o")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_rotate_and_sweep(config, tmp_path, capsys):
    assert main(["rotate", "--config", str(config), "--modality", "labelled-classes",
                 "--output-dir", str(tmp_path / "r")]) == 0
    cells = [json.loads(l)["cell"] for l in capsys.readouterr().out.splitlines()]
    assert cells == ["rot-k1-cedl", "rot-k2-cedl"]
    assert main(["sweep", "--config", str(config), "--proportions", "0.05,0.1",
                 "--output-dir", str(tmp_path / "s")]) == 0
    cells = [json.loads(l)["cell"] for l in capsys.readouterr().out.splitlines()]
    assert cells == ["sweep-p0.05-cedl", "sweep-p0.05-bce", "sweep-p0.1-cedl", "sweep-p0.1-bce"]


def test_export_and_eval_checkpoint(config, tmp_path, capsys):
    main(["run", "--config", str(config), "--output-dir", str(tmp_path / "o")])
    capsys.readouterr()
    ckpt = tmp_path / "o" / "checkpoints" / "cli__single-cedl.ckpt"
    out = tmp_path / "emb.csv"
    assert main(["export-embeddings", "--checkpoint", str(ckpt), "--config", str(config),
                 "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "label,r0,r1,distance,score"
    assert main(["eval-checkpoint", "--checkpoint", str(ckpt), "--config", str(config),
                 "--out", str(tmp_path / "m.json")]) == 0
    printed = json.loads(capsys.readouterr().out)
    record = json.loads((tmp_path / "o" / "results.jsonl").read_text())
    assert printed == record["metrics"]
    assert json.loads((tmp_path / "m.json").read_text()) == printed
    bad = tmp_path / "wide.csv"
    bad.write_text("1,2,3,0\n4,5,6,1\n")
    assert main(["eval-checkpoint", "--checkpoint", str(ckpt), "--data", str(bad)]) == 1


def _cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "cedl.cli", *args], cwd=cwd, check=True,
                          capture_output=True, text=True).stdout


@pytest.mark.slow
def test_cli_byte_identical_across_processes(config, tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        printed = _cli("sweep", "--config", str(config), "--proportions", "0.05,0.1",
                       "--output-dir", str(out), cwd=tmp_path)
        _cli("export-embeddings", "--checkpoint", str(out / "checkpoints" / "cli__sweep-p0.05-cedl.ckpt"),
             "--config", str(config), "--subset", "all", "--out", str(out / "emb.csv"), cwd=tmp_path)
        outputs.append((printed, _files(out)))
    assert outputs[0][0] == outputs[1][0]
    assert outputs[0][1] == outputs[1][1]
    assert len(outputs[0][1]) == 1 + 4 + 1
