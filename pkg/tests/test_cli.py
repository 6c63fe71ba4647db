from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from layoutcomplete.cli import main
from layoutcomplete.models import ModelConfig


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """One synth -> ingest -> split pipeline shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    runner = CliRunner()
    r = runner.invoke(main, ["synth", "--count", "30", "--seed", "5",
                             "--out-dir", str(root / "data")])
    assert r.exit_code == 0, r.output
    r = runner.invoke(main, ["ingest", "--data-dir", str(root / "data"),
                             "--out", str(root / "corpus.jsonl"), "--ambiguity"])
    assert r.exit_code == 0, r.output
    assert "layouts: 30" in r.output
    assert "mean completions (bfs)" in r.output
    r = runner.invoke(main, ["split", "--corpus", str(root / "corpus.jsonl"),
                             "--out-dir", str(root / "splits"), "--seed", "3"])
    assert r.exit_code == 0, r.output
    return root


@pytest.fixture(scope="module")
def checkpoint(workdir):
    runner = CliRunner()
    cfg = ModelConfig(variant="pointer", embed_dim=16, hidden_dim=16, layers=1,
                      heads=2, ffn_dim=32, seed=0)
    cfg.save(workdir / "model.json")
    r = runner.invoke(main, [
        "train", "--variant", "pointer", "--config", str(workdir / "model.json"),
        "--corpus", str(workdir / "splits" / "train.jsonl"),
        "--valid", str(workdir / "splits" / "valid.jsonl"),
        "--order", "bfs", "--steps", "12", "--batch-size", "4",
        "--out", str(workdir / "pointer.ckpt"),
    ])
    assert r.exit_code == 0, r.output
    assert (workdir / "pointer.ckpt").exists()
    assert (workdir / "pointer.curve.tsv").exists()
    return workdir / "pointer.ckpt"


def test_split_outputs(workdir):
    sizes = {}
    for name in ("train", "valid", "test"):
        lines = (workdir / "splits" / f"{name}.jsonl").read_text().splitlines()
        sizes[name] = len([l for l in lines if l.strip()])
    assert sizes["train"] + sizes["valid"] + sizes["test"] == 30
    assert sizes["train"] == 24


def test_eval_command(workdir, checkpoint):
    runner = CliRunner()
    r = runner.invoke(main, [
        "eval", "--checkpoint", str(checkpoint),
        "--corpus", str(workdir / "splits" / "test.jsonl"),
        "--order", "bfs", "--fraction", "0.8",
    ])
    assert r.exit_code == 0, r.output
    assert "F1" in r.output and "Edit" in r.output
    r = runner.invoke(main, [
        "eval", "--checkpoint", str(checkpoint),
        "--corpus", str(workdir / "splits" / "test.jsonl"),
        "--order", "bfs", "--fraction", "0.8", "--relaxed",
    ])
    assert r.exit_code == 0, r.output
    assert "relaxed" in r.output


def test_matrix_command(workdir, checkpoint):
    runner = CliRunner()
    config = {
        "test_corpus": str(workdir / "splits" / "test.jsonl"),
        "out_dir": str(workdir / "reports"),
        "orders": ["bfs"],
        "fractions": [0.8],
        "checkpoints": {"pointer:bfs": str(checkpoint),
                        "recursive:bfs": str(checkpoint)},
    }
    (workdir / "matrix.json").write_text(json.dumps(config))
    r = runner.invoke(main, ["matrix", "--config", str(workdir / "matrix.json")])
    # the recursive slot points at a pointer checkpoint: the loaded model
    # is still a pointer; matrix runs it under the recursive row label
    assert r.exit_code == 0, r.output
    report = (workdir / "reports" / "report.txt").read_text()
    assert "pointer" in report
    assert (workdir / "reports" / "report.tsv").exists()


def test_matrix_missing_checkpoint(workdir):
    runner = CliRunner()
    config = {
        "test_corpus": str(workdir / "splits" / "test.jsonl"),
        "out_dir": str(workdir / "reports2"),
        "orders": ["bfs"],
        "checkpoints": {"pointer:bfs": str(workdir / "nope.ckpt"),
                        "recursive:bfs": str(workdir / "nope.ckpt")},
    }
    (workdir / "matrix2.json").write_text(json.dumps(config))
    r = runner.invoke(main, ["matrix", "--config", str(workdir / "matrix2.json")])
    assert r.exit_code != 0


def test_complete_command(workdir, checkpoint, tmp_path):
    from layoutcomplete.corpus import load_manifest

    manifest = load_manifest()
    partial = {
        "type": manifest[1],
        "bounds": [0, 0, 72, 128],
        "terminal": False,
        "children": [
            {"type": manifest[5], "bounds": [0, 0, 36, 64], "terminal": True,
             "children": []},
        ],
    }
    path = tmp_path / "partial.json"
    path.write_text(json.dumps(partial))
    runner = CliRunner()
    r = runner.invoke(main, [
        "complete", "--checkpoint", str(checkpoint), "--partial", str(path),
        "--order", "bfs",
    ])
    assert r.exit_code == 0, r.output
    doc = json.loads(r.output)
    assert doc["root"]["type"] == manifest[1]
    assert doc["root"]["predicted"] is False
    assert "logProb" in doc


def test_train_rejects_mismatched_config(workdir):
    runner = CliRunner()
    cfg = ModelConfig(variant="vanilla", embed_dim=16, hidden_dim=16, layers=1,
                      heads=2, ffn_dim=32)
    cfg.save(workdir / "vanilla.json")
    r = runner.invoke(main, [
        "train", "--variant", "pointer", "--config", str(workdir / "vanilla.json"),
        "--corpus", str(workdir / "splits" / "train.jsonl"),
        "--valid", str(workdir / "splits" / "valid.jsonl"),
        "--out", str(workdir / "x.ckpt"),
    ])
    assert r.exit_code != 0
