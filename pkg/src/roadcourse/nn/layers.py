"""Numeric layers of the labeling network.

All functions operate on (batch, channels, height, width) arrays.
Products and reductions accumulate in float64 regardless of the storage
dtype; forward results are cast back to the input dtype, gradients are
returned in float64.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigError


def _im2col(x: np.ndarray, k: int) -> np.ndarray:
    """(B, C, H, W) -> (B*H'*W', C*k*k) patch matrix, float64."""
    windows = sliding_window_view(x, (k, k), axis=(2, 3))  # (B,C,H',W',k,k)
    b, _, hp, wp = windows.shape[:4]
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * hp * wp, -1)
    return cols.astype(np.float64, copy=False), hp, wp


def conv2d(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Valid cross-correlation.

    Arguments:
        x: input (B, C, H, W).
        w: filter bank (O, C, k, k).
        b: biases (O,).

    Returns:
        (B, O, H-k+1, W-k+1) in x's dtype.
    """
    k = w.shape[-1]
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ConfigError(
            f"conv shapes incompatible: input {x.shape}, filters {w.shape}"
        )
    if x.shape[2] < k or x.shape[3] < k:
        raise ConfigError(f"conv input {x.shape[2:]} smaller than kernel {k}x{k}")
    cols, hp, wp = _im2col(x, k)
    out = cols @ w.reshape(w.shape[0], -1).astype(np.float64).T
    out += b.astype(np.float64)
    return (
        out.reshape(x.shape[0], hp, wp, w.shape[0])
        .transpose(0, 3, 1, 2)
        .astype(x.dtype)
    )


def conv2d_backward(x: np.ndarray, w: np.ndarray, dy: np.ndarray):
    """Gradients of the valid cross-correlation.

    Arguments:
        x: forward input (B, C, H, W).
        w: filter bank (O, C, k, k).
        dy: output gradient (B, O, H', W').

    Returns:
        (dx, dw, db); dx in x's dtype, dw/db float64.
    """
    k = w.shape[-1]
    cols, hp, wp = _im2col(x, k)
    dy_mat = dy.transpose(0, 2, 3, 1).reshape(-1, w.shape[0]).astype(np.float64)
    dw = (dy_mat.T @ cols).reshape(w.shape)
    db = dy_mat.sum(axis=0)
    # input gradient = full correlation of dy with the flipped filter bank
    pad = k - 1
    dy_pad = np.pad(dy, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    w_swapped = w[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)
    dx = conv2d(dy_pad.astype(x.dtype), w_swapped, np.zeros(w.shape[1]))
    return dx, dw, db


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, dy: np.ndarray) -> np.ndarray:
    return dy * (x > 0)


def maxpool2(x: np.ndarray):
    """2x2 max pooling, stride 2 (patch mode).

    Returns:
        (out, idx): pooled output (B, C, H//2, W//2) and the per-window
        argmax (first maximum in row-major window order), kept for the
        backward pass.
    """
    b, c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    win = (
        x[:, :, : h2 * 2, : w2 * 2]
        .reshape(b, c, h2, 2, w2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h2, w2, 4)
    )
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool2_backward(x_shape, idx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """Route pooled gradients back to the argmax positions."""
    b, c, h, w = x_shape
    h2, w2 = idx.shape[2], idx.shape[3]
    flat = np.zeros((b, c, h2, w2, 4), dtype=np.float64)
    np.put_along_axis(flat, idx[..., None], dy[..., None].astype(np.float64), axis=-1)
    win = (
        flat.reshape(b, c, h2, w2, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h2 * 2, w2 * 2)
    )
    dx = np.zeros((b, c, h, w), dtype=np.float64)
    dx[:, :, : h2 * 2, : w2 * 2] = win
    return dx


def overlap_pool(x: np.ndarray) -> np.ndarray:
    """2x2 max pooling, stride 1 (dense mode); output (B, C, H-1, W-1)."""
    a = np.maximum(x[:, :, :-1, :-1], x[:, :, :-1, 1:])
    b = np.maximum(x[:, :, 1:, :-1], x[:, :, 1:, 1:])
    return np.maximum(a, b)


def softmax(logits: np.ndarray, axis: int = 1) -> np.ndarray:
    """Numerically stable softmax in float64."""
    z = logits.astype(np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy over a batch.

    Arguments:
        logits: (B, K) raw scores.
        labels: (B,) integer class IDs.

    Returns:
        (loss, dlogits): scalar float64 loss and (B, K) float64 gradient.
    """
    z = logits.astype(np.float64)
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1, keepdims=True))
    log_probs = z - log_norm
    n = len(labels)
    loss = -log_probs[np.arange(n), labels].sum() / n
    dlogits = np.exp(log_probs)
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n
