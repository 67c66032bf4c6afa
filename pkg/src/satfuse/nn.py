"""Minimal NHWC neural-network kernels with hand-rolled backward passes.

Forward functions return (output, cache); the matching backward consumes
the upstream gradient and the cache. Everything is pure numpy; convolution
goes through im2col + matmul so BLAS does the heavy lifting. Analytic
gradients are verified against central finite differences in the tests.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


# ---------------------------------------------------------------------------
# convolution

def _im2col(x, kh, kw):
    """(N,H,W,C) -> (N*H'*W', C*kh*kw) patch matrix; one straight copy,
    no transpose of the large array."""
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))  # N,H',W',C,kh,kw
    n, oh, ow, c = windows.shape[:4]
    return windows.reshape(n * oh * ow, c * kh * kw), (n, oh, ow)


def conv2d_forward(x, w, b, pad=0):
    """Cross-correlation, stride 1. x: (N,H,W,Cin); w: (kh,kw,Cin,Cout)."""
    if x.ndim != 4 or w.ndim != 4 or x.shape[3] != w.shape[2]:
        raise ValueError("conv2d shape mismatch")
    if pad:
        x = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    kh, kw, cin, cout = w.shape
    cols, (n, oh, ow) = _im2col(x, kh, kw)
    wmat = w.transpose(2, 0, 1, 3).reshape(cin * kh * kw, cout)
    y = (cols @ wmat).reshape(n, oh, ow, cout) + b
    return y, (w, pad, cols)


def conv2d_backward(dy, cache, need_dx=True):
    """Returns (dx, dw, db); dx is w.r.t. the unpadded input (None when
    ``need_dx`` is off, e.g. for the first layer)."""
    w, pad, cols = cache
    kh, kw, cin, cout = w.shape
    n, oh, ow, _ = dy.shape
    dyf = dy.reshape(n * oh * ow, cout)
    db = dyf.sum(axis=0)
    dw = (cols.T @ dyf).reshape(cin, kh, kw, cout).transpose(1, 2, 0, 3)
    if not need_dx:
        return None, dw, db
    # full correlation of dy with the spatially flipped kernel
    dy_pad = np.pad(dy, ((0, 0), (kh - 1, kh - 1), (kw - 1, kw - 1), (0, 0)))
    cols2, (_, h, wdt) = _im2col(dy_pad, kh, kw)
    wflip = w[::-1, ::-1].transpose(3, 0, 1, 2).reshape(cout * kh * kw, cin)
    dx = (cols2 @ wflip).reshape(n, h, wdt, cin)
    if pad:
        dx = dx[:, pad:-pad, pad:-pad, :]
    return dx, dw, db


# ---------------------------------------------------------------------------
# elementwise / pooling

def relu(x):
    return np.maximum(x, 0.0), x > 0


def relu_backward(dy, mask):
    return dy * mask


def maxpool2_forward(x):
    """2x2 max pooling, stride 2; ties route the gradient to the first
    window position in row-major order."""
    n, h, w, c = x.shape
    if h % 2 or w % 2:
        raise ValueError("maxpool2 needs even spatial dimensions")
    wins = x.reshape(n, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 2, 4, 5)
    flat = wins.reshape(n, h // 2, w // 2, 4, c)
    arg = flat.argmax(axis=3)
    y = np.take_along_axis(flat, arg[:, :, :, None, :], axis=3)[:, :, :, 0, :]
    return y, (x.shape, arg)


def maxpool2_backward(dy, cache):
    shape, arg = cache
    n, h, w, c = shape
    dflat = np.zeros((n, h // 2, w // 2, 4, c), dtype=dy.dtype)
    np.put_along_axis(dflat, arg[:, :, :, None, :], dy[:, :, :, None, :], axis=3)
    return (
        dflat.reshape(n, h // 2, w // 2, 2, 2, c)
        .transpose(0, 1, 3, 2, 4, 5)
        .reshape(n, h, w, c)
    )


def dropout_forward(x, rate, mode, rng=None):
    """Inverted dropout; identity at inference or rate 0."""
    if not 0.0 <= rate < 1.0:
        raise ValueError("dropout rate must lie in [0, 1)")
    if mode != "train" or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


# ---------------------------------------------------------------------------
# dense / batchnorm / fusion

def dense_forward(x, w, b):
    if x.shape[1] != w.shape[0]:
        raise ValueError("dense shape mismatch")
    return x @ w + b, (x, w)


def dense_backward(dy, cache):
    x, w = cache
    return dy @ w.T, x.T @ dy, dy.sum(axis=0)


class BatchNormState:
    """Learnable scale/shift plus running statistics for inference."""

    def __init__(self, dim, momentum=0.99, eps=1e-5, dtype=np.float64):
        self.gamma = np.ones(dim, dtype=dtype)
        self.beta = np.zeros(dim, dtype=dtype)
        self.running_mean = np.zeros(dim, dtype=dtype)
        self.running_var = np.ones(dim, dtype=dtype)
        self.momentum = momentum
        self.eps = eps


def batchnorm_forward(x, state, mode):
    if mode == "train":
        if x.shape[0] < 2:
            raise ValueError("batchnorm training needs a batch of >= 2")
        mean = x.mean(axis=0)
        var = x.var(axis=0)
        state.running_mean = state.momentum * state.running_mean + (1 - state.momentum) * mean
        state.running_var = state.momentum * state.running_var + (1 - state.momentum) * var
    else:
        mean, var = state.running_mean, state.running_var
    inv_std = 1.0 / np.sqrt(var + state.eps)
    xhat = (x - mean) * inv_std
    return state.gamma * xhat + state.beta, (xhat, inv_std, state.gamma, mode)


def batchnorm_backward(dy, cache):
    """Returns (dx, dgamma, dbeta). Inference mode treats mean/var as
    constants (per-sample normalization only)."""
    xhat, inv_std, gamma, mode = cache
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * gamma
    if mode != "train":
        return dxhat * inv_std, dgamma, dbeta
    n = xhat.shape[0]
    dx = (inv_std / n) * (n * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))
    return dx, dgamma, dbeta


def concat_forward(a, b):
    """Fusion: CNN bottleneck first, handcrafted features second."""
    if a.shape[0] != b.shape[0]:
        raise ValueError("concat batch mismatch")
    return np.concatenate([a, b], axis=1), a.shape[1]


def concat_backward(dy, width_a):
    return dy[:, :width_a], dy[:, width_a:]


# ---------------------------------------------------------------------------
# loss

def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_ce(logits, labels):
    """Mean cross-entropy loss and gradient w.r.t. logits."""
    n, k = logits.shape
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("need at least 2 classes")
    if labels.max() >= k:
        raise ValueError("label out of range")
    probs = softmax(logits)
    loss = float(-np.log(np.maximum(probs[np.arange(n), labels], 1e-300)).mean())
    grad = probs.copy()
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


# ---------------------------------------------------------------------------
# optimizer

class AdadeltaState:
    """Decaying accumulators of squared gradients and squared updates."""

    def __init__(self, shape, rho=0.95, epsilon=1e-6, dtype=np.float64):
        self.acc_grad_sq = np.zeros(shape, dtype=dtype)
        self.acc_update_sq = np.zeros(shape, dtype=dtype)
        self.rho = rho
        self.epsilon = epsilon


def adadelta_step(param, grad, state):
    """In-place Adadelta update; returns the applied delta."""
    if param.shape != grad.shape:
        raise ValueError("parameter/gradient shape mismatch")
    rho, eps = state.rho, state.epsilon
    state.acc_grad_sq = rho * state.acc_grad_sq + (1.0 - rho) * grad * grad
    delta = -np.sqrt(state.acc_update_sq + eps) / np.sqrt(state.acc_grad_sq + eps) * grad
    state.acc_update_sq = rho * state.acc_update_sq + (1.0 - rho) * delta * delta
    param += delta
    return delta


# ---------------------------------------------------------------------------
# verification

def numerical_gradient(f, x, step=1e-5):
    """Central finite differences of a scalar function at x."""
    grad = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        hi = f()
        x[idx] = orig - step
        lo = f()
        x[idx] = orig
        grad[idx] = (hi - lo) / (2.0 * step)
        it.iternext()
    return grad


def grad_check(f, arrays, analytic, step=1e-5, sample=None, rng=None):
    """Max relative error between analytic and finite-difference gradients.

    ``arrays`` and ``analytic`` are parallel lists; with ``sample`` only
    that many randomly chosen coordinates per array are probed (needed for
    whole-model checks where full enumeration is too slow).
    """
    worst = 0.0
    for x, g in zip(arrays, analytic):
        if sample is None or x.size <= sample:
            numeric = numerical_gradient(f, x, step=step)
            worst = max(worst, max_relative_error(g, numeric))
            continue
        flat = x.reshape(-1)
        gflat = np.asarray(g).reshape(-1)
        for i in rng.choice(x.size, size=sample, replace=False):
            orig = flat[i]
            flat[i] = orig + step
            hi = f()
            flat[i] = orig - step
            lo = f()
            flat[i] = orig
            numeric = (hi - lo) / (2.0 * step)
            err = abs(gflat[i] - numeric) / max(abs(gflat[i]) + abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


def max_relative_error(analytic, numeric):
    num = np.abs(analytic - numeric)
    den = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float((num / den).max()) if num.size else 0.0
