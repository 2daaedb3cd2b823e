import csv
import json
import subprocess
import sys

import pytest

from hoopscore.cli import main
from hoopscore.features import BIT_LABELS

SMALL = ["--players", "12", "--pairs", "10", "--duration", "3"]


def tree(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["simulate", "--out", str(root / "ds"), "--seed", "5", *SMALL]) == 0
    assert main(["train", "--pairs", str(root / "ds/train/pairs.csv"), "--out", str(root / "model"),
                 "--segment-length", "6", "--stride", "2"]) == 0
    return root


def test_simulate_layout(workspace):
    ds = workspace / "ds"
    assert (ds / "metadata.json").exists()
    assert len(list((ds / "train/streams").glob("*.csv"))) == 6
    assert len(rows(ds / "test/pairs.csv")) == 11
    assert rows(ds / "test/pairs.csv")[0] == ["stream_file_a", "stream_file_b", "label"]


def test_simulate_is_deterministic(workspace, tmp_path):
    assert main(["simulate", "--out", str(tmp_path / "again"), "--seed", "5", *SMALL]) == 0
    assert tree(tmp_path / "again") == tree(workspace / "ds")


def test_simulate_validation(tmp_path, capsys):
    assert main(["simulate", "--players", "3", "--out", str(tmp_path / "x")]) == 1
    err = capsys.readouterr().err
    assert "need at least 4 players" in err and err.count("\n") == 1
    assert not (tmp_path / "x").exists()


def test_simulate_refuses_non_empty_out(workspace, capsys):
    assert main(["simulate", "--out", str(workspace / "ds"), *SMALL]) == 1
    assert "not empty" in capsys.readouterr().err


def test_simulate_runtime_failure_leaves_nothing(tmp_path, capsys):
    assert main(["simulate", "--out", str(tmp_path / "x"), "--players", "4", "--pairs", "50",
                 "--duration", "2"]) == 2
    assert not (tmp_path / "x").exists()
    assert list(tmp_path.iterdir()) == []


def test_train_outputs(workspace, tmp_path, capsys):
    model = json.loads((workspace / "model/model.json").read_text())
    assert model["segment_length"] == 6 and len(model["weights"]) == 256
    trace = rows(workspace / "model/trace.csv")
    assert trace[0] == ["iteration", "hinge_loss"] and len(trace) == 102
    assert main(["train", "--pairs", str(workspace / "ds/train/pairs.csv"), "--out", str(tmp_path),
                 "--segment-length", "6", "--stride", "2"]) == 0
    assert "final hinge loss" in capsys.readouterr().out
    assert (tmp_path / "model.json").read_bytes() == (workspace / "model/model.json").read_bytes()


@pytest.mark.parametrize("flags", [["--iterations", "0"], ["--learning-rate", "-1"], ["--segment-length", "7"]])
def test_train_validation(workspace, tmp_path, flags):
    assert main(["train", "--pairs", str(workspace / "ds/train/pairs.csv"), "--out", str(tmp_path / "m"),
                 *flags]) == 1
    assert not (tmp_path / "m").exists()


def test_train_missing_input(tmp_path, capsys):
    assert main(["train", "--pairs", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "m")]) == 2
    assert not (tmp_path / "m").exists()


def test_config_file_and_flag_precedence(workspace, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"pairs": str(workspace / "ds/train/pairs.csv"), "iterations": 3,
                               "segment_length": 6, "stride": 2}))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert len(rows(tmp_path / "a/trace.csv")) == 5
    assert main(["train", "--config", str(cfg), "--iterations", "5", "--out", str(tmp_path / "b")]) == 0
    assert len(rows(tmp_path / "b/trace.csv")) == 7
    cfg.write_text(json.dumps({"iterations": 3, "bogus": 1}))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "c")]) == 1


def test_evaluate(workspace, tmp_path, capsys):
    assert main(["evaluate", "--model", str(workspace / "model/model.json"),
                 "--pairs", str(workspace / "ds/test/pairs.csv"), "--out", str(tmp_path)]) == 0
    assert capsys.readouterr().out.startswith("accuracy ")
    table = rows(tmp_path / "verdicts.csv")
    assert table[0] == ["pair", "score_a", "score_b", "label", "correct"]
    assert len(table) - 1 == 10


def test_evaluate_ablation(workspace, tmp_path, capsys):
    assert main(["evaluate", "--ablation", "no_gm", "--train-pairs", str(workspace / "ds/train/pairs.csv"),
                 "--pairs", str(workspace / "ds/test/pairs.csv"), "--segment-length", "6", "--stride", "2",
                 "--out", str(tmp_path)]) == 0
    assert len(rows(tmp_path / "verdicts.csv")) == 11
    assert main(["evaluate", "--ablation", "no_gm", "--pairs", str(workspace / "ds/test/pairs.csv")]) == 1
    assert main(["evaluate", "--ablation", "nonsense", "--pairs", "x", "--train-pairs", "y"]) == 1


def test_ablate(workspace, tmp_path):
    assert main(["ablate", "--train-pairs", str(workspace / "ds/train/pairs.csv"),
                 "--test-pairs", str(workspace / "ds/test/pairs.csv"), "--variants", "full,no_gm,unit_weights",
                 "--segment-length", "6", "--stride", "2", "--out", str(tmp_path)]) == 0
    table = rows(tmp_path / "ablation.csv")
    assert table[0] == ["variant", "method", "accuracy"]
    assert [r[1] for r in table[1:]] == ["Ours", "Ours: no GMs", "Ours: all weights w set to 1"]


def test_score(workspace, tmp_path, capsys):
    stream = next((workspace / "ds/test/streams").glob("*.csv"))
    assert main(["score", "--model", str(workspace / "model/model.json"), "--stream", str(stream),
                 "--out", str(tmp_path)]) == 0
    total = float(capsys.readouterr().out.split()[-1])
    table = rows(tmp_path / "contributions.csv")
    assert table[0] == ["start_frame", "relevance", "contribution", "weighted_term"]
    rel = sum(float(r[1]) for r in table[1:])
    weighted = sum(float(r[3]) for r in table[1:])
    assert weighted / rel == pytest.approx(total, rel=1e-9, abs=1e-15)


def test_score_one_relevant_segment(workspace, tmp_path, capsys):
    stream = tmp_path / "s.csv"
    lines = ["frame,p_shoot,p_possess,p_made,x,y"]
    lines += [f"{i},{0.8 if i == 2 else 0.0},0.5,0.0,14.0,7.5" for i in range(6)]  # model segments are 6 frames
    stream.write_text("\n".join(lines) + "\n")
    assert main(["score", "--model", str(workspace / "model/model.json"), "--stream", str(stream)]) == 0
    out, err = capsys.readouterr()
    table = list(csv.reader(out.splitlines()))
    assert len(table) == 2 and float(table[1][1]) == 0.8
    assert float(err.split()[-1]) == pytest.approx(float(table[1][2]))


def test_score_without_relevance(workspace, tmp_path, capsys):
    stream = tmp_path / "quiet.csv"
    stream.write_text("\n".join(f"{i},0,0.5,0,14,7.5" for i in range(20)) + "\n")
    assert main(["score", "--model", str(workspace / "model/model.json"), "--stream", str(stream)]) == 2
    assert "no relevant segments" in capsys.readouterr().err


def test_inspect(workspace, capsys):
    assert main(["inspect", "--model", str(workspace / "model/model.json"), "--top", "4"]) == 0
    table = list(csv.reader(capsys.readouterr().out.splitlines()))
    assert table[0] == ["index", "weight", *BIT_LABELS]
    assert len(table) == 5
    for row in table[1:]:
        index = int(row[0])
        assert [int(b) for b in row[2:]] == [(index >> k) & 1 for k in range(8)]


def test_inspect_too_many(workspace, capsys):
    assert main(["inspect", "--model", str(workspace / "model/model.json"), "--top", "257"]) == 2
    assert "active mixtures" in capsys.readouterr().err
    assert main(["inspect", "--model", str(workspace / "model/model.json"), "--top", "0"]) == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hoopscore.cli", "simulate", "--players", "2",
                           "--out", str(tmp_path / "x")], capture_output=True, text=True)
    assert proc.returncode == 1 and "need at least 4 players" in proc.stderr


def test_unknown_subcommand():
    assert main(["frobnicate"]) == 1
