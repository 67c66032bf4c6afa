import numpy as np
import pytest

from satfuse import cli
from satfuse.cli import dispatch, parse_config_file
from satfuse.dataset import read_satbin
from satfuse.errors import ConfigError


def run(*argv):
    return dispatch(list(argv))


def test_help_exits_zero():
    with pytest.raises(SystemExit) as exc:
        dispatch(["--help"])
    assert exc.value.code == 0


def test_missing_required_flag_exits_two():
    with pytest.raises(SystemExit) as exc:
        dispatch(["rank"])
    assert exc.value.code == 2


def test_unknown_subcommand_exits_two():
    with pytest.raises(SystemExit) as exc:
        dispatch(["frobnicate"])
    assert exc.value.code == 2


def test_domain_error_exits_one(tmp_path):
    missing = tmp_path / "nope.satbin"
    assert run("extract", "--in", str(missing), "--out", str(tmp_path / "x.csv")) == 1


def test_config_file_parsing(tmp_path):
    path = tmp_path / "train.cfg"
    path.write_text(
        "# training config\n"
        "epochs = 3\n"
        "dense_widths = 32,128\n"
        "batchnorm_after_first_dense = true\n"
        "padding = same\n"
        "dropout_before_final = 0.2\n"
    )
    cfg = parse_config_file(path)
    assert cfg == {
        "epochs": 3,
        "dense_widths": (32, 128),
        "batchnorm_after_first_dense": True,
        "padding": "same",
        "dropout_before_final": 0.2,
    }


def test_config_file_bad_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("this is not a key value line\n")
    with pytest.raises(ConfigError):
        parse_config_file(path)


def test_convert_npz(tmp_path):
    rng = np.random.default_rng(0)
    npz = tmp_path / "raw.npz"
    np.savez(npz, patches=rng.integers(0, 256, (5, 28, 28, 4), dtype=np.uint8),
             labels=np.array([0, 1, 2, 3, 0], dtype=np.uint8), num_classes=4)
    out = tmp_path / "converted.satbin"
    assert run("convert", "--in", str(npz), "--out", str(out)) == 0
    assert len(read_satbin(out)) == 5


def test_full_pipeline_smoke(tmp_path):
    train = tmp_path / "train.satbin"
    test = tmp_path / "test.satbin"
    assert run("synth", "--out", str(train), "--classes", "4", "--per-class", "8", "--seed", "1") == 0
    assert run("synth", "--out", str(test), "--classes", "4", "--per-class", "4", "--seed", "2") == 0

    ft_train = tmp_path / "ft_train.csv"
    ft_test = tmp_path / "ft_test.csv"
    assert run("extract", "--in", str(train), "--out", str(ft_train)) == 0
    assert run("extract", "--in", str(test), "--out", str(ft_test)) == 0

    full = tmp_path / "ft_all.csv"
    assert run("extract", "--in", str(train), "--out", str(full), "--all") == 0
    header = full.read_text().splitlines()[0]
    assert len(header.split(",")) == 151  # 150 features + label

    rank_out = tmp_path / "ranking.csv"
    assert run("rank", "--features", str(full), "--threshold", "0.3", "--out", str(rank_out)) == 0
    lines = rank_out.read_text().splitlines()
    assert lines[0] == "rank,feature,delta_mean,delta_sigma,d_s,selected"
    assert len(lines) == 151

    ckpt = tmp_path / "model.ckpt"
    report = tmp_path / "report.csv"
    assert run(
        "train", "--train", str(train), "--test", str(test),
        "--features-train", str(ft_train), "--features-test", str(ft_test),
        "--epochs", "1", "--seed", "0", "--out", str(ckpt), "--report", str(report),
    ) == 0
    assert report.read_text().splitlines()[0] == "epoch,train_loss,train_accuracy,test_accuracy"

    pred = tmp_path / "pred.csv"
    assert run("predict", "--ckpt", str(ckpt), "--in", str(test),
               "--features", str(ft_test), "--out", str(pred)) == 0
    rows = pred.read_text().splitlines()
    assert rows[0].startswith("index,pred,p0")
    probs = np.array([[float(v) for v in row.split(",")[2:]] for row in rows[1:]])
    preds = np.array([int(row.split(",")[1]) for row in rows[1:]])
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_array_equal(preds, probs.argmax(axis=1))

    eval_out = tmp_path / "eval.csv"
    assert run("eval", "--pred", str(pred), "--labels", str(test), "--out", str(eval_out)) == 0
    assert eval_out.read_text().startswith("metric,value\naccuracy,")

    mc_out = tmp_path / "mcnemar.csv"
    assert run("mcnemar", "--pred-a", str(pred), "--pred-b", str(pred),
               "--labels", str(test), "--out", str(mc_out)) == 0
    assert mc_out.read_text().splitlines()[1].startswith("0,0,0")

    stats_out = tmp_path / "stats.csv"
    assert run("stats", "--in", str(train), "--features", str(ft_train),
               "--name", "synth", "--out", str(stats_out)) == 0
    lines = stats_out.read_text().splitlines()
    assert lines[0] == "dataset,type,delta_mean,delta_sigma"
    assert len(lines) == 3


def test_train_feature_misalignment(tmp_path, capsys):
    a = tmp_path / "a.satbin"
    b = tmp_path / "b.satbin"
    run("synth", "--out", str(a), "--per-class", "4", "--seed", "1")
    run("synth", "--out", str(b), "--per-class", "5", "--seed", "1")
    feats = tmp_path / "f.csv"
    run("extract", "--in", str(b), "--out", str(feats))
    code = run("train", "--train", str(a), "--features-train", str(feats),
               "--epochs", "1", "--out", str(tmp_path / "m.ckpt"))
    assert code == 1
    assert "config" in capsys.readouterr().err
