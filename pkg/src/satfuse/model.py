"""Fused-feature CNN: architecture assembly, training and checkpoints.

Layer stack: conv(32)-ReLU-conv(64)-ReLU-maxpool-dropout(0.25)-flatten-
concat(handcrafted)-dense(32)-batchnorm-ReLU-[dense(128)-ReLU]-dropout(0.2)-
dense(K)-softmax. Fusion width 0 disables the concat and yields the plain
CNN baseline. Training uses mini-batch Adadelta on cross-entropy.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field, asdict

import numpy as np

from . import nn
from .dataset import to_unit
from .errors import CheckpointVersionError, ConfigError

CKPT_MAGIC = b"SFCK"
CKPT_VERSION = 1


@dataclass
class ModelConfig:
    num_classes: int = 4
    conv_maps: tuple = (32, 64)
    kernel: int = 3
    dropout_after_pool: float = 0.25
    fused_feature_width: int = 22
    dense_widths: tuple = (32, 128)
    batchnorm_after_first_dense: bool = True
    dropout_before_final: float = 0.2
    padding: str = "valid"
    batch_size: int = 128
    epochs: int = 20
    seed: int = 0
    dtype: str = "float32"

    def __post_init__(self):
        self.conv_maps = tuple(self.conv_maps)
        self.dense_widths = tuple(self.dense_widths)
        if self.padding not in ("valid", "same"):
            raise ConfigError(f"unknown padding mode {self.padding!r}")
        if not self.dense_widths or any(w <= 0 for w in self.dense_widths):
            raise ConfigError("dense_widths must be positive")
        if not (0 <= self.dropout_after_pool < 1 and 0 <= self.dropout_before_final < 1):
            raise ConfigError("dropout rates must lie in [0, 1)")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")

    @property
    def pad(self):
        return self.kernel // 2 if self.padding == "same" else 0

    def bottleneck_width(self, height=28, width=28):
        h, w = height, width
        for _ in self.conv_maps:
            if self.padding == "valid":
                h, w = h - self.kernel + 1, w - self.kernel + 1
        return (h // 2) * (w // 2) * self.conv_maps[-1]

    @classmethod
    def from_dict(cls, d):
        known = cls().__dict__.keys()
        unknown = set(d) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def _uniform_init(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class DeepSatV2:
    """The fused classifier; owns parameters, gradients and BN state."""

    def __init__(self, config: ModelConfig, in_channels=4):
        self.config = config
        dtype = np.dtype(config.dtype)
        rng = np.random.default_rng(config.seed)
        k = config.kernel
        c1, c2 = config.conv_maps
        self.params = {}
        self.params["conv1_w"] = _uniform_init(
            rng, (k, k, in_channels, c1), k * k * in_channels, k * k * c1, dtype)
        self.params["conv1_b"] = np.zeros(c1, dtype=dtype)
        self.params["conv2_w"] = _uniform_init(rng, (k, k, c1, c2), k * k * c1, k * k * c2, dtype)
        self.params["conv2_b"] = np.zeros(c2, dtype=dtype)

        width = config.bottleneck_width() + config.fused_feature_width
        self.fused_width = width
        for i, out in enumerate(config.dense_widths):
            self.params[f"dense{i}_w"] = _uniform_init(rng, (width, out), width, out, dtype)
            self.params[f"dense{i}_b"] = np.zeros(out, dtype=dtype)
            width = out
        self.params["out_w"] = _uniform_init(
            rng, (width, config.num_classes), width, config.num_classes, dtype)
        self.params["out_b"] = np.zeros(config.num_classes, dtype=dtype)

        self.bn = (
            nn.BatchNormState(config.dense_widths[0], dtype=dtype)
            if config.batchnorm_after_first_dense
            else None
        )
        if self.bn is not None:
            self.params["bn_gamma"] = self.bn.gamma
            self.params["bn_beta"] = self.bn.beta

    def forward(self, x, feats, mode="infer", rng=None):
        """Returns (logits, cache). ``x`` is (N,H,W,C) float in [0,1];
        ``feats`` is (N,F) scaled handcrafted features (ignored when
        fusion is disabled)."""
        cfg = self.config
        p = self.params
        cache = {}
        a, cache["conv1"] = nn.conv2d_forward(x, p["conv1_w"], p["conv1_b"], cfg.pad)
        a, cache["relu1"] = nn.relu(a)
        a, cache["conv2"] = nn.conv2d_forward(a, p["conv2_w"], p["conv2_b"], cfg.pad)
        a, cache["relu2"] = nn.relu(a)
        a, cache["pool"] = nn.maxpool2_forward(a)
        a, cache["drop1"] = nn.dropout_forward(a, cfg.dropout_after_pool, mode, rng)
        cache["flat_shape"] = a.shape
        a = a.reshape(a.shape[0], -1)
        if cfg.fused_feature_width:
            if feats is None or feats.shape[1] != cfg.fused_feature_width:
                raise ValueError("handcrafted feature width mismatch")
            a, cache["concat"] = nn.concat_forward(a, feats.astype(a.dtype))
        for i in range(len(cfg.dense_widths)):
            a, cache[f"dense{i}"] = nn.dense_forward(a, p[f"dense{i}_w"], p[f"dense{i}_b"])
            if i == 0 and self.bn is not None:
                a, cache["bn"] = nn.batchnorm_forward(a, self.bn, mode)
            a, cache[f"relu_d{i}"] = nn.relu(a)
        a, cache["drop2"] = nn.dropout_forward(a, cfg.dropout_before_final, mode, rng)
        logits, cache["out"] = nn.dense_forward(a, p["out_w"], p["out_b"])
        return logits, cache

    def backward(self, dlogits, cache):
        """Gradients w.r.t. every parameter, as a dict mirroring params."""
        cfg = self.config
        grads = {}
        da, grads["out_w"], grads["out_b"] = nn.dense_backward(dlogits, cache["out"])
        da = nn.dropout_backward(da, cache["drop2"])
        for i in reversed(range(len(cfg.dense_widths))):
            da = nn.relu_backward(da, cache[f"relu_d{i}"])
            if i == 0 and self.bn is not None:
                da, grads["bn_gamma"], grads["bn_beta"] = nn.batchnorm_backward(da, cache["bn"])
            da, grads[f"dense{i}_w"], grads[f"dense{i}_b"] = nn.dense_backward(
                da, cache[f"dense{i}"])
        if cfg.fused_feature_width:
            da, _ = nn.concat_backward(da, cache["concat"])
        da = da.reshape(cache["flat_shape"])
        da = nn.dropout_backward(da, cache["drop1"])
        da = nn.maxpool2_backward(da, cache["pool"])
        da = nn.relu_backward(da, cache["relu2"])
        da, grads["conv2_w"], grads["conv2_b"] = nn.conv2d_backward(da, cache["conv2"])
        da = nn.relu_backward(da, cache["relu1"])
        _, grads["conv1_w"], grads["conv1_b"] = nn.conv2d_backward(
            da, cache["conv1"], need_dx=False)
        return grads

    def predict_proba(self, patches, feats, batch_size=256):
        out = []
        dtype = np.dtype(self.config.dtype)
        for lo in range(0, len(patches), batch_size):
            x = to_unit(patches[lo:lo + batch_size]).astype(dtype)
            f = None if feats is None else feats[lo:lo + batch_size]
            logits, _ = self.forward(x, f, mode="infer")
            out.append(nn.softmax(logits.astype(np.float64)))
        return np.concatenate(out, axis=0)


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    train_accuracy: list = field(default_factory=list)
    test_accuracy: list = field(default_factory=list)
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)


def train(model: DeepSatV2, train_set, train_feats, test_set=None, test_feats=None,
          log=None) -> TrainReport:
    """Mini-batch Adadelta training; deterministic for a fixed seed."""
    cfg = model.config
    dtype = np.dtype(cfg.dtype)
    rng = np.random.default_rng(cfg.seed + 1)
    opt = {name: nn.AdadeltaState(p.shape, dtype=dtype) for name, p in model.params.items()}
    report = TrainReport(config=asdict(model.config))
    n = len(train_set)
    start = time.monotonic()
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses, correct = [], 0
        for lo in range(0, n, cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            x = to_unit(train_set.patches[idx]).astype(dtype)
            f = None if train_feats is None else train_feats[idx].astype(dtype)
            y = train_set.labels[idx]
            logits, cache = model.forward(x, f, mode="train", rng=rng)
            loss, dlogits = nn.softmax_ce(logits.astype(np.float64), y)
            grads = model.backward(dlogits.astype(dtype), cache)
            for name, g in grads.items():
                nn.adadelta_step(model.params[name], g, opt[name])
            losses.append(loss)
            correct += int((logits.argmax(axis=1) == y).sum())
        report.train_loss.append(float(np.mean(losses)))
        report.train_accuracy.append(correct / n)
        if test_set is not None:
            probs = model.predict_proba(test_set.patches, test_feats)
            acc = float((probs.argmax(axis=1) == test_set.labels).mean())
        else:
            acc = float("nan")
        report.test_accuracy.append(acc)
        if log:
            log(f"epoch {epoch + 1}/{cfg.epochs} "
                f"loss {report.train_loss[-1]:.4f} "
                f"train_acc {report.train_accuracy[-1]:.4f} test_acc {acc:.4f}")
    report.wall_time = time.monotonic() - start
    model.optimizer_state = opt
    return report


# ---------------------------------------------------------------------------
# checkpoint format: magic, u32 version, u32 json length, config json,
# u32 tensor count, then per tensor: u16 name length, name, 8-byte dtype
# tag, u8 ndim, u32 dims, raw little-endian data.

def _extra_tensors(model):
    extra = {}
    scaler = getattr(model, "feature_scaler", None)
    if scaler is not None:
        extra["feat_scaler_mean"], extra["feat_scaler_std"] = scaler
    if model.bn is not None:
        extra["bn_running_mean"] = model.bn.running_mean
        extra["bn_running_var"] = model.bn.running_var
    opt = getattr(model, "optimizer_state", None)
    if opt:
        for name, state in opt.items():
            extra[f"opt.{name}.acc_grad_sq"] = state.acc_grad_sq
            extra[f"opt.{name}.acc_update_sq"] = state.acc_update_sq
    return extra


def save_checkpoint(model: DeepSatV2, path):
    tensors = dict(model.params)
    tensors.update(_extra_tensors(model))
    meta = json.dumps({"config": asdict(model.config)}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<II", CKPT_VERSION, len(meta)))
        fh.write(meta)
        fh.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            arr = np.ascontiguousarray(tensors[name])
            enc = name.encode()
            fh.write(struct.pack("<H", len(enc)))
            fh.write(enc)
            fh.write(arr.dtype.str.encode().ljust(8, b"\0"))
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.astype(arr.dtype.newbyteorder("<")).tobytes())


def load_checkpoint(path) -> DeepSatV2:
    with open(path, "rb") as fh:
        if fh.read(4) != CKPT_MAGIC:
            raise CheckpointVersionError(f"{path}: not a checkpoint file")
        version, meta_len = struct.unpack("<II", fh.read(8))
        if version != CKPT_VERSION:
            raise CheckpointVersionError(f"{path}: unsupported version {version}")
        meta = json.loads(fh.read(meta_len))
        (count,) = struct.unpack("<I", fh.read(4))
        tensors = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode()
            dtype = np.dtype(fh.read(8).rstrip(b"\0").decode())
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            arr = np.frombuffer(fh.read(dtype.itemsize * int(np.prod(shape, dtype=np.int64))),
                                dtype=dtype).reshape(shape)
            tensors[name] = arr.copy()
    cfg = meta["config"]
    model = DeepSatV2(ModelConfig.from_dict(cfg))
    for name in model.params:
        if name not in tensors:
            raise CheckpointVersionError(f"{path}: missing tensor {name}")
        model.params[name] = tensors[name]
    if model.bn is not None:
        model.bn.gamma = model.params["bn_gamma"]
        model.bn.beta = model.params["bn_beta"]
        model.bn.running_mean = tensors["bn_running_mean"]
        model.bn.running_var = tensors["bn_running_var"]
    if "feat_scaler_mean" in tensors:
        model.feature_scaler = (tensors["feat_scaler_mean"], tensors["feat_scaler_std"])
    opt = {}
    for name in model.params:
        key = f"opt.{name}.acc_grad_sq"
        if key in tensors:
            state = nn.AdadeltaState(tensors[key].shape, dtype=tensors[key].dtype)
            state.acc_grad_sq = tensors[key]
            state.acc_update_sq = tensors[f"opt.{name}.acc_update_sq"]
            opt[name] = state
    if opt:
        model.optimizer_state = opt
    return model
