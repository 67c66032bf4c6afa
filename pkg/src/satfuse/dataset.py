"""Labeled patch container: SATBIN binary format, splits, synthetic data.

SATBIN layout (little-endian):
    bytes 0-3   magic ``SATB``
    u32         patch count
    u16         height
    u16         width
    u16         channels
    u16         num_classes
    u32         reserved (zero)
    payload     count * H * W * C bytes, patch-major, row-major,
                channel-interleaved (R, G, B, NIR per pixel)
    labels      count bytes, u8 class index
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, FormatError

MAGIC = b"SATB"
HEADER = struct.Struct("<4sIHHHHI")  # 20 bytes
PATCH_SHAPE = (28, 28, 4)


@dataclass
class LabeledSet:
    """Immutable bundle of patches (N, H, W, C uint8) and class labels."""

    patches: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.patches = np.ascontiguousarray(self.patches, dtype=np.uint8)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if self.patches.ndim != 4:
            raise ValueError("patches must be N x H x W x C")
        if len(self.labels) != len(self.patches):
            raise ValueError("label count does not match patch count")
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if len(self.labels) and self.labels.max() >= self.num_classes:
            raise FormatError("label out of range for num_classes")

    def __len__(self):
        return len(self.patches)

    def subset(self, indices) -> "LabeledSet":
        idx = np.asarray(indices)
        return LabeledSet(self.patches[idx], self.labels[idx], self.num_classes)


def read_satbin(path) -> LabeledSet:
    """Load a SATBIN file; raises FormatError on any structural defect."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER.size:
        raise FormatError(f"{path}: shorter than SATBIN header")
    magic, count, h, w, c, k, reserved = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    payload = count * h * w * c
    expected = HEADER.size + payload + count
    if len(raw) != expected:
        raise FormatError(
            f"{path}: expected {expected} bytes for {count} patches, got {len(raw)}"
        )
    pixels = np.frombuffer(raw, np.uint8, payload, HEADER.size).reshape(count, h, w, c)
    labels = np.frombuffer(raw, np.uint8, count, HEADER.size + payload)
    if count and labels.max() >= k:
        raise FormatError(f"{path}: label {labels.max()} >= num_classes {k}")
    return LabeledSet(pixels.copy(), labels.copy(), k)


def write_satbin(dataset: LabeledSet, path) -> None:
    """Write a SATBIN file; read_satbin(write_satbin(s)) == s bit-exact."""
    n, h, w, c = dataset.patches.shape
    header = HEADER.pack(MAGIC, n, h, w, c, dataset.num_classes, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dataset.patches.tobytes())
        fh.write(dataset.labels.tobytes())


def split(dataset: LabeledSet, fraction: float, seed: int):
    """Stratified split into (first, second) with |first| ~ fraction * N.

    Exact partition: every input index lands in exactly one half.
    Deterministic for a given seed.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError("fraction must lie in (0, 1)")
    if len(dataset) == 0:
        raise DegenerateInputError("cannot split an empty set")
    rng = np.random.default_rng(seed)
    first, second = [], []
    for k in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.labels == k)
        rng.shuffle(idx)
        cut = int(round(fraction * len(idx)))
        first.extend(idx[:cut])
        second.extend(idx[cut:])
    return dataset.subset(sorted(first)), dataset.subset(sorted(second))


def synth_generate(num_per_class: int, num_classes: int, seed: int) -> LabeledSet:
    """Synthetic stand-in for the real 28x28x4 patch sets.

    Classes differ in mean channel intensity (NIR means spaced 40 gray
    levels apart) and in texture: per-class spatial smoothing windows give
    distinct autocorrelation, so co-occurrence features carry signal too.
    """
    if num_classes not in (4, 6):
        raise ValueError("num_classes must be 4 or 6")
    if num_per_class <= 0:
        raise ValueError("num_per_class must be positive")
    rng = np.random.default_rng(seed)
    h, w, c = PATCH_SHAPE
    # (R, G, B, NIR) base means per class; NIR spaced >= 40 apart.
    base = np.array(
        [
            [90, 120, 70, 45],
            [60, 140, 90, 90],
            [130, 100, 60, 135],
            [100, 90, 130, 180],
            [150, 150, 150, 222],
            [70, 60, 110, 65],
        ],
        dtype=np.float64,
    )[:num_classes]
    smooth = [1, 2, 3, 5, 2, 4][:num_classes]  # moving-average window per class
    noise_std = [30.0, 40.0, 50.0, 45.0, 28.0, 55.0][:num_classes]

    patches = np.empty((num_classes * num_per_class, h, w, c), dtype=np.uint8)
    labels = np.empty(num_classes * num_per_class, dtype=np.uint8)
    i = 0
    for k in range(num_classes):
        win = smooth[k]
        kernel = np.ones((win, win)) / (win * win)
        for _ in range(num_per_class):
            noise = rng.normal(0.0, noise_std[k], size=(h + win, w + win, c))
            if win > 1:
                # separable moving average; valid region cropped below
                noise = np.apply_along_axis(
                    lambda m: np.convolve(m, np.ones(win) / win, mode="same"), 0, noise
                )
                noise = np.apply_along_axis(
                    lambda m: np.convolve(m, np.ones(win) / win, mode="same"), 1, noise
                )
                noise *= win  # keep per-pixel std comparable across classes
            patch = base[k][None, None, :] + noise[:h, :w, :]
            patches[i] = np.clip(patch, 0, 255).astype(np.uint8)
            labels[i] = k
            i += 1
    return LabeledSet(patches, labels, num_classes)


def to_unit(patch: np.ndarray) -> np.ndarray:
    """Scale byte pixels to [0, 1] float64."""
    return np.asarray(patch, dtype=np.float64) / 255.0
