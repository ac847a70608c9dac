"""
자기보정 합성곱(SCConv) 블록

SCConvParams                    : 3×3 커널 F1..F4 (C/2 → C/2) + 편향, 풀링 비율 r
init_scconv(rng, channels, r)   : Glorot 균등 초기화, 편향 0
scconv_forward(x, p)            : (out, cache)
scconv_backward(dout, cache, p) : (dx, grads dict w1..b4)

채널을 반으로 나눠
  X1: M  = σ(X1 + Up_r(F2(AvgPool_r(X1))))   (보정 게이트)
      Y1 = F4(F3(X1) ⊙ M)
  X2: Y2 = F1(X2)
  out = concat(Y1, Y2)
"""

from dataclasses import dataclass

import numpy as np

from modules.errors import ShapeError
from modules.numeric.rng import Xoshiro256
from modules.pose.layers import (
    avgpool_backward, avgpool_forward, conv2d_backward, conv2d_forward,
    glorot_uniform, sigmoid, upsample_backward, upsample_forward,
)

KERNELS = ("w1", "w2", "w3", "w4")
BIASES  = ("b1", "b2", "b3", "b4")


@dataclass
class SCConvParams:
    w1: np.ndarray
    w2: np.ndarray
    w3: np.ndarray
    w4: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    b4: np.ndarray
    r: int = 4

    @property
    def half(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def from_dict(cls, params: dict[str, np.ndarray], prefix: str, r: int) -> "SCConvParams":
        return cls(**{k: params[f"{prefix}.{k}"] for k in KERNELS + BIASES}, r=r)

    def to_dict(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.{k}": getattr(self, k) for k in KERNELS + BIASES}


def init_scconv(rng: Xoshiro256, channels: int, r: int = 4) -> SCConvParams:
    if channels % 2:
        raise ShapeError(f"SCConv 채널 수는 짝수여야 합니다: {channels}")
    h = channels // 2
    fan = h * 9
    ws = {k: glorot_uniform(rng, (h, h, 3, 3), fan, fan) for k in KERNELS}
    bs = {k: np.zeros(h) for k in BIASES}
    return SCConvParams(**ws, **bs, r=r)


def scconv_forward(x: np.ndarray, p: SCConvParams):
    """
    Args:
        x: (B, C, H, W), C 짝수, r 이 H·W 를 나눠야 함
        p: SCConvParams

    Returns:
        (out (B, C, H, W), cache)

    Raises:
        ShapeError: C 홀수, 채널 폭 불일치, r 이 H 또는 W 를 나누지 않음
    """
    C = x.shape[1]
    if C % 2:
        raise ShapeError(f"SCConv 입력 채널이 홀수입니다: {C}")
    if C // 2 != p.half:
        raise ShapeError(f"SCConv 채널 폭 불일치: 입력 {C}, 파라미터 {2 * p.half}")
    if x.shape[2] % p.r or x.shape[3] % p.r:
        raise ShapeError(f"SCConv 풀링 비율 {p.r} 이 {x.shape[2]}×{x.shape[3]} 을 나누지 않습니다")

    h = C // 2
    x1, x2 = x[:, :h], x[:, h:]
    pooled = avgpool_forward(x1, p.r)
    t, c2 = conv2d_forward(pooled, p.w2, p.b2)
    gate = sigmoid(x1 + upsample_forward(t, p.r))
    a, c3 = conv2d_forward(x1, p.w3, p.b3)
    q = a * gate
    y1, c4 = conv2d_forward(q, p.w4, p.b4)
    y2, c1 = conv2d_forward(x2, p.w1, p.b1)
    out = np.concatenate([y1, y2], axis=1)
    return out, (gate, a, c1, c2, c3, c4)


def scconv_backward(dout: np.ndarray, cache, p: SCConvParams):
    gate, a, c1, c2, c3, c4 = cache
    h = p.half
    dy1, dy2 = dout[:, :h], dout[:, h:]

    dq, dw4, db4 = conv2d_backward(dy1, c4)
    da = dq * gate
    dgate = dq * a
    ds = dgate * gate * (1.0 - gate)

    dx1 = ds.copy()
    dt = upsample_backward(ds, p.r)
    dpooled, dw2, db2 = conv2d_backward(dt, c2)
    dx1 += avgpool_backward(dpooled, p.r)
    dx1_a, dw3, db3 = conv2d_backward(da, c3)
    dx1 += dx1_a

    dx2, dw1, db1 = conv2d_backward(dy2, c1)
    dx = np.concatenate([dx1, dx2], axis=1)
    grads = {"w1": dw1, "w2": dw2, "w3": dw3, "w4": dw4,
             "b1": db1, "b2": db2, "b3": db3, "b4": db4}
    return dx, grads
