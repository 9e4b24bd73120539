"""Array-level building blocks: batched forward/backward ops and the dense
matrix builders used by the compiled inference path.

Every op is linear or piecewise linear. Convolutions use same-size zero
padding. Pooling is 2x2 averaging; upsampling is 2x2 replication.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ShapeError


def conv2d(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Same-padded convolution. x: (B,C,H,W), kernel: (O,C,k,k) -> (B,O,H,W)."""
    if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[1]:
        raise ShapeError(f"conv2d shapes x={x.shape} kernel={kernel.shape}")
    k = kernel.shape[2]
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))
    return np.einsum("bcijuv,ocuv->boij", win, kernel)


def conv2d_backward(
    x: np.ndarray, kernel: np.ndarray, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients (dx, dkernel) of conv2d under upstream grad_out."""
    k = kernel.shape[2]
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    win = sliding_window_view(xp, (k, k), axis=(2, 3))
    dkernel = np.einsum("boij,bcijuv->ocuv", grad_out, win)
    gp = np.pad(grad_out, ((0, 0), (0, 0), (p, p), (p, p)))
    gwin = sliding_window_view(gp, (k, k), axis=(2, 3))
    dx = np.einsum("boijuv,ocuv->bcij", gwin, kernel[:, :, ::-1, ::-1])
    return dx, dkernel


def avg_pool2(x: np.ndarray) -> np.ndarray:
    """2x2 average pooling; spatial dims must be even."""
    b, c, h, w = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"avg_pool2 needs even spatial dims, got {x.shape}")
    return x.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))


def avg_pool2_backward(grad_out: np.ndarray) -> np.ndarray:
    g = np.repeat(np.repeat(grad_out, 2, axis=2), 2, axis=3)
    return g * 0.25


def upsample2(x: np.ndarray) -> np.ndarray:
    """2x2 nearest-neighbor replication."""
    return np.repeat(np.repeat(x, 2, axis=2), 2, axis=3)


def upsample2_backward(grad_out: np.ndarray) -> np.ndarray:
    b, c, h, w = grad_out.shape
    return grad_out.reshape(b, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))


def time_embedding(t: float, dim: int) -> np.ndarray:
    """Sinusoidal position features of the timestep, length dim (even)."""
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    ang = float(t) * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)])


def conv_matrix(kernel: np.ndarray, side: int) -> np.ndarray:
    """Dense matrix of the same-padded conv on flattened (C, side, side).

    Built by pushing basis images through conv2d itself, so the matrix is
    definitionally consistent with the op. Returns (O*side*side, C*side*side).
    """
    o, c, _, _ = kernel.shape
    in_dim = c * side * side
    out_dim = o * side * side
    mat = np.empty((out_dim, in_dim))
    chunk = max(1, 131072 // (side * side * 9))
    basis = np.eye(in_dim)
    for start in range(0, in_dim, chunk):
        block = basis[start : start + chunk].reshape(-1, c, side, side)
        out = conv2d(block, kernel)
        mat[:, start : start + chunk] = out.reshape(block.shape[0], out_dim).T
    return mat


def pool_matrix(channels: int, side: int) -> np.ndarray:
    """Dense matrix of avg_pool2 on flattened (channels, side, side)."""
    in_dim = channels * side * side
    basis = np.eye(in_dim).reshape(in_dim, channels, side, side)
    out = avg_pool2(basis)
    return out.reshape(in_dim, -1).T.copy()


def upsample_matrix(channels: int, side: int) -> np.ndarray:
    """Dense matrix of upsample2 on flattened (channels, side, side)."""
    in_dim = channels * side * side
    basis = np.eye(in_dim).reshape(in_dim, channels, side, side)
    out = upsample2(basis)
    return out.reshape(in_dim, -1).T.copy()


def averaging_filter_matrix(side: int, kernel_size: int) -> np.ndarray:
    """Dense uniform smoothing filter on a flattened (side, side) image.

    Zero padded; normalization is by the full kernel area everywhere, so
    border outputs average fewer in-bounds taps against the same divisor.
    """
    k = int(kernel_size)
    if k < 1 or k % 2 == 0:
        raise ShapeError(f"filter kernel must be odd and positive, got {k}")
    kernel = np.full((1, 1, k, k), 1.0 / (k * k))
    return conv_matrix(kernel, side)
