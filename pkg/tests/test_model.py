import numpy as np
import pytest

from satfuse import model, nn
from satfuse.dataset import synth_generate, to_unit
from satfuse.errors import CheckpointVersionError, ConfigError


def small_config(**kw):
    defaults = dict(num_classes=4, epochs=1, seed=0, batch_size=16, dtype="float64")
    defaults.update(kw)
    return model.ModelConfig(**defaults)


def test_bottleneck_widths():
    cfg = small_config()
    assert cfg.bottleneck_width() == 12 * 12 * 64  # 9216
    net = model.DeepSatV2(cfg)
    assert net.fused_width == 9216 + 22
    cfg_same = small_config(padding="same")
    assert cfg_same.bottleneck_width() == 14 * 14 * 64  # 12544


def test_fusion_disabled_widths():
    net = model.DeepSatV2(small_config(fused_feature_width=0))
    assert net.fused_width == 9216


def test_single_dense_ablation_builds():
    net = model.DeepSatV2(small_config(dense_widths=(32,)))
    x = to_unit(synth_generate(2, 4, 0).patches[:2])
    feats = np.zeros((2, 22))
    logits, _ = net.forward(x, feats)
    assert logits.shape == (2, 4)


def test_invalid_configs():
    with pytest.raises(ConfigError):
        model.ModelConfig(padding="circular")
    with pytest.raises(ConfigError):
        model.ModelConfig(dense_widths=())
    with pytest.raises(ConfigError):
        model.ModelConfig(dropout_before_final=1.0)
    with pytest.raises(ConfigError):
        model.ModelConfig.from_dict({"no_such_key": 1})


def test_forward_rows_sum_to_one():
    net = model.DeepSatV2(small_config())
    ds = synth_generate(3, 4, 1)
    probs = net.predict_proba(ds.patches, np.zeros((len(ds), 22)))
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-9)


def test_plain_cnn_ignores_features():
    net = model.DeepSatV2(small_config(fused_feature_width=0))
    ds = synth_generate(2, 4, 2)
    p1 = net.predict_proba(ds.patches, None)
    p2 = net.predict_proba(ds.patches, None)
    np.testing.assert_array_equal(p1, p2)


def test_duplicate_patch_identical_rows():
    net = model.DeepSatV2(small_config())
    patch = synth_generate(1, 4, 3).patches[:1]
    patches = np.concatenate([patch, patch])
    probs = net.predict_proba(patches, np.zeros((2, 22)))
    np.testing.assert_array_equal(probs[0], probs[1])


def test_feature_width_mismatch():
    net = model.DeepSatV2(small_config())
    x = to_unit(synth_generate(1, 4, 0).patches)
    with pytest.raises(ValueError):
        net.forward(x, np.zeros((1, 5)))


def test_train_smoke():
    ds = synth_generate(10, 4, 4)
    feats = np.random.default_rng(0).normal(size=(len(ds), 22))
    net = model.DeepSatV2(small_config())
    report = model.train(net, ds, feats, ds, feats)
    assert len(report.train_loss) == 1
    assert np.isfinite(report.train_loss[0])
    assert 0.0 <= report.test_accuracy[0] <= 1.0


def test_train_deterministic():
    ds = synth_generate(8, 4, 5)
    feats = np.random.default_rng(1).normal(size=(len(ds), 22))
    nets = []
    for _ in range(2):
        net = model.DeepSatV2(small_config(seed=9))
        model.train(net, ds, feats)
        nets.append(net)
    for name in nets[0].params:
        np.testing.assert_array_equal(nets[0].params[name], nets[1].params[name])


def test_checkpoint_roundtrip(tmp_path):
    ds = synth_generate(8, 4, 6)
    feats = np.random.default_rng(2).normal(size=(len(ds), 22))
    net = model.DeepSatV2(small_config())
    model.train(net, ds, feats)
    net.feature_scaler = (np.zeros(22), np.ones(22))
    path = tmp_path / "model.ckpt"
    model.save_checkpoint(net, path)
    loaded = model.load_checkpoint(path)
    p1 = net.predict_proba(ds.patches, feats)
    p2 = loaded.predict_proba(ds.patches, feats)
    np.testing.assert_array_equal(p1, p2)
    # saving the loaded model reproduces the file byte for byte
    path2 = tmp_path / "model2.ckpt"
    model.save_checkpoint(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_checkpoint_bad_file(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(CheckpointVersionError):
        model.load_checkpoint(path)


def test_end_to_end_gradient():
    ds = synth_generate(1, 4, 7)
    patch = ds.patches[0]
    x = np.stack([to_unit(patch), to_unit(255 - patch)])
    feats = np.random.default_rng(3).normal(size=(2, 22))
    y = np.array([0, 2])
    net = model.DeepSatV2(small_config())

    def loss():
        logits, _ = net.forward(x, feats, mode="train", rng=np.random.default_rng(13))
        return nn.softmax_ce(logits, y)[0]

    logits, cache = net.forward(x, feats, mode="train", rng=np.random.default_rng(13))
    _, dlogits = nn.softmax_ce(logits, y)
    grads = net.backward(dlogits, cache)
    names = sorted(net.params)
    err = nn.grad_check(
        loss,
        [net.params[n] for n in names],
        [grads[n] for n in names],
        step=1e-6,
        sample=8,
        rng=np.random.default_rng(99),
    )
    assert err < 1e-3
