"""
합성곱 신경망 기본 연산 (순전파 + 역전파), 입력 형태 (B, C, H, W)

conv2d_forward / conv2d_backward       : k×k 합성곱, stride, zero "same" 패딩 (sliding_window_view + tensordot)
avgpool_forward / avgpool_backward     : r×r 평균 풀링 (stride r)
upsample_forward / upsample_backward   : 최근접 r배 업샘플
relu / relu_backward
sigmoid                                : scipy.special.expit
global_avgpool / global_avgpool_backward
glorot_uniform(rng, shape, fan_in, fan_out)
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from modules.errors import ShapeError
from modules.numeric.rng import Xoshiro256


def glorot_uniform(rng: Xoshiro256, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(shape, -limit, limit)


# ─── 합성곱 ───────────────────────────────────────────────────────────────────

def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1, pad: int | None = None):
    """
    Args:
        x: (B, Cin, H, W)
        w: (Cout, Cin, k, k)
        b: (Cout,)
        stride: 보폭
        pad: 패딩 (None 이면 k//2)

    Returns:
        (out (B, Cout, Ho, Wo), cache)
    """
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError(f"conv2d 형태 불일치: x{x.shape}, w{w.shape}")
    k = w.shape[2]
    pad = k // 2 if pad is None else pad
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    win = sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(win, w, axes=([1, 4, 5], [1, 2, 3]))  # (B, Ho, Wo, Cout)
    out = out.transpose(0, 3, 1, 2) + b[None, :, None, None]
    return np.ascontiguousarray(out), (x.shape, xp.shape, win, w, stride, pad)


def conv2d_backward(dout: np.ndarray, cache):
    """(dx, dw, db)."""
    x_shape, xp_shape, win, w, stride, pad = cache
    k = w.shape[2]
    _, _, Ho, Wo = dout.shape
    db = dout.sum(axis=(0, 2, 3))
    dw = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))  # (Cout, Cin, k, k)
    dwin = np.tensordot(dout, w, axes=([1], [0]))               # (B, Ho, Wo, Cin, k, k)
    dxp = np.zeros(xp_shape)
    for i in range(k):
        for j in range(k):
            dxp[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += \
                dwin[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    if pad:
        dxp = dxp[:, :, pad:-pad, pad:-pad]
    return dxp, dw, db


# ─── 풀링 / 업샘플 ────────────────────────────────────────────────────────────

def _check_divisible(x: np.ndarray, r: int, op: str) -> None:
    if x.shape[2] % r or x.shape[3] % r:
        raise ShapeError(f"{op}: 비율 {r} 이 특징맵 {x.shape[2]}×{x.shape[3]} 을 나누지 않습니다")


def avgpool_forward(x: np.ndarray, r: int) -> np.ndarray:
    _check_divisible(x, r, "avgpool")
    B, C, H, W = x.shape
    return x.reshape(B, C, H // r, r, W // r, r).mean(axis=(3, 5))


def avgpool_backward(dout: np.ndarray, r: int) -> np.ndarray:
    return np.repeat(np.repeat(dout, r, axis=2), r, axis=3) / (r * r)


def upsample_forward(x: np.ndarray, r: int) -> np.ndarray:
    return np.repeat(np.repeat(x, r, axis=2), r, axis=3)


def upsample_backward(dout: np.ndarray, r: int) -> np.ndarray:
    B, C, H, W = dout.shape
    return dout.reshape(B, C, H // r, r, W // r, r).sum(axis=(3, 5))


# ─── 활성화 ───────────────────────────────────────────────────────────────────

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def relu_backward(dout: np.ndarray, x: np.ndarray) -> np.ndarray:
    return dout * (x > 0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x)


def global_avgpool(x: np.ndarray) -> np.ndarray:
    return x.mean(axis=(2, 3))


def global_avgpool_backward(dout: np.ndarray, shape) -> np.ndarray:
    B, C, H, W = shape
    return np.broadcast_to(dout[:, :, None, None] / (H * W), shape).copy()
