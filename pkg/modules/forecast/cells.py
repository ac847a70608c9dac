"""
순환 셀 (LSTM / GRU) 과 시퀀스 레이어

CellParams                                 : 입력 가중치 W, 순환 가중치 U, 편향 b
init_cell(rng, kind, in_dim, hidden)       : Glorot 균등 초기화, 편향 0
lstm_cell_forward(x, h, c, p)              : (h', c', cache)   게이트 순서 i, f, g, o
lstm_cell_backward(dh, dc, cache, p)       : (dx, dh_prev, dc_prev, grads)
gru_cell_forward(x, h, p)                  : (h', cache)       블록 순서 z, r, h̃
gru_cell_backward(dh, cache, p)            : (dx, dh_prev, grads)
layer_forward(kind, xs, p, state)          : 시퀀스 (T, B, in) 전체 전개
layer_backward(kind, dhs, dstate, caches, p): BPTT

상태(state)는 LSTM 이면 (h, c), GRU 면 (h,) 튜플입니다.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from modules.errors import ConfigError, ShapeError
from modules.numeric.rng import Xoshiro256
from modules.pose.layers import glorot_uniform

CELLS = ("lstm", "gru")
_GATES = {"lstm": 4, "gru": 3}


@dataclass
class CellParams:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    @property
    def hidden(self) -> int:
        return self.U.shape[0]

    @classmethod
    def from_dict(cls, params: dict[str, np.ndarray], prefix: str) -> "CellParams":
        return cls(params[f"{prefix}.W"], params[f"{prefix}.U"], params[f"{prefix}.b"])

    def to_dict(self, prefix: str) -> dict[str, np.ndarray]:
        return {f"{prefix}.W": self.W, f"{prefix}.U": self.U, f"{prefix}.b": self.b}


def check_cell(kind: str) -> str:
    if kind not in CELLS:
        raise ConfigError(f"알 수 없는 셀 종류: {kind} (가능: {list(CELLS)})")
    return kind


def init_cell(rng: Xoshiro256, kind: str, in_dim: int, hidden: int) -> CellParams:
    g = _GATES[check_cell(kind)]
    W = glorot_uniform(rng, (in_dim, g * hidden), in_dim, hidden)
    U = glorot_uniform(rng, (hidden, g * hidden), hidden, hidden)
    return CellParams(W, U, np.zeros(g * hidden))


def _check(x: np.ndarray, h: np.ndarray, p: CellParams, gates: int) -> None:
    H = p.hidden
    if p.W.shape[1] != gates * H or p.U.shape != (H, gates * H) or p.b.shape != (gates * H,):
        raise ShapeError(f"셀 파라미터 형태 오류: W{p.W.shape} U{p.U.shape} b{p.b.shape}")
    if x.shape[-1] != p.W.shape[0]:
        raise ShapeError(f"입력 차원 {x.shape[-1]} ≠ W 행 수 {p.W.shape[0]}")
    if h.shape[-1] != H:
        raise ShapeError(f"은닉 상태 차원 {h.shape[-1]} ≠ {H}")


# ─── LSTM ─────────────────────────────────────────────────────────────────────

def lstm_cell_forward(x: np.ndarray, h: np.ndarray, c: np.ndarray, p: CellParams):
    """
    Args:
        x: (in,) 또는 (B, in)
        h, c: (H,) 또는 (B, H)

    Returns:
        (h', c', cache)
    """
    _check(x, h, p, 4)
    H = p.hidden
    z = x @ p.W + h @ p.U + p.b
    i = expit(z[..., :H])
    f = expit(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = expit(z[..., 3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    return h_new, c_new, (x, h, c, i, f, g, o, tc)


def lstm_cell_backward(dh: np.ndarray, dc: np.ndarray, cache, p: CellParams):
    x, h, c, i, f, g, o, tc = cache
    do = dh * tc
    dct = dc + dh * o * (1.0 - tc * tc)
    di = dct * g
    dg = dct * i
    df = dct * c
    dc_prev = dct * f
    dz = np.concatenate(
        [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g * g), do * o * (1.0 - o)], axis=-1
    )
    x2, h2, dz2 = np.atleast_2d(x), np.atleast_2d(h), np.atleast_2d(dz)
    grads = {"W": x2.T @ dz2, "U": h2.T @ dz2, "b": dz2.sum(axis=0)}
    return dz @ p.W.T, dz @ p.U.T, dc_prev, grads


# ─── GRU ──────────────────────────────────────────────────────────────────────

def gru_cell_forward(x: np.ndarray, h: np.ndarray, p: CellParams):
    """
    z = σ(xW_z + hU_z + b_z), r = σ(xW_r + hU_r + b_r)
    h̃ = tanh(xW_h + (r⊙h)U_h + b_h),  h' = (1−z)⊙h + z⊙h̃

    Returns:
        (h', cache)
    """
    _check(x, h, p, 3)
    H = p.hidden
    xw = x @ p.W + p.b
    hu = h @ p.U[:, :2 * H]
    z = expit(xw[..., :H] + hu[..., :H])
    r = expit(xw[..., H:2 * H] + hu[..., H:])
    rh = r * h
    ht = np.tanh(xw[..., 2 * H:] + rh @ p.U[:, 2 * H:])
    h_new = (1.0 - z) * h + z * ht
    return h_new, (x, h, z, r, rh, ht)


def gru_cell_backward(dh: np.ndarray, cache, p: CellParams):
    x, h, z, r, rh, ht = cache
    H = p.hidden
    da_h = dh * z * (1.0 - ht * ht)
    da_z = dh * (ht - h) * z * (1.0 - z)
    drh = da_h @ p.U[:, 2 * H:].T
    da_r = drh * h * r * (1.0 - r)
    dh_prev = dh * (1.0 - z) + drh * r + da_z @ p.U[:, :H].T + da_r @ p.U[:, H:2 * H].T
    da = np.concatenate([da_z, da_r, da_h], axis=-1)

    x2, h2, rh2 = np.atleast_2d(x), np.atleast_2d(h), np.atleast_2d(rh)
    da2 = np.atleast_2d(da)
    dU = np.concatenate([h2.T @ da2[:, :2 * H], rh2.T @ da2[:, 2 * H:]], axis=1)
    grads = {"W": x2.T @ da2, "U": dU, "b": da2.sum(axis=0)}
    return da @ p.W.T, dh_prev, grads


# ─── 시퀀스 레이어 ────────────────────────────────────────────────────────────

def zero_state(kind: str, batch: int, hidden: int) -> tuple:
    h = np.zeros((batch, hidden))
    return (h, np.zeros((batch, hidden))) if kind == "lstm" else (h,)


def layer_forward(kind: str, xs: np.ndarray, p: CellParams, state: tuple):
    """
    Args:
        xs   : (T, B, in) 입력 시퀀스
        state: 초기 상태

    Returns:
        (hs (T, B, H), 마지막 상태, 스텝별 cache 목록)
    """
    hs = np.empty((xs.shape[0], xs.shape[1], p.hidden))
    caches = []
    for t in range(xs.shape[0]):
        if kind == "lstm":
            h, c, cache = lstm_cell_forward(xs[t], state[0], state[1], p)
            state = (h, c)
        else:
            h, cache = gru_cell_forward(xs[t], state[0], p)
            state = (h,)
        hs[t] = h
        caches.append(cache)
    return hs, state, caches


def layer_backward(kind: str, dhs: np.ndarray, dstate: tuple, caches: list, p: CellParams):
    """
    Args:
        dhs   : (T, B, H) 각 스텝 출력에 대한 기울기
        dstate: 마지막 상태에 대한 기울기

    Returns:
        (dxs (T, B, in), 초기 상태 기울기, {"W", "U", "b"})
    """
    grads = {"W": np.zeros_like(p.W), "U": np.zeros_like(p.U), "b": np.zeros_like(p.b)}
    dxs = np.empty((dhs.shape[0], dhs.shape[1], p.W.shape[0]))
    dh = dstate[0]
    dc = dstate[1] if kind == "lstm" else None
    for t in range(dhs.shape[0] - 1, -1, -1):
        if kind == "lstm":
            dx, dh, dc, g = lstm_cell_backward(dhs[t] + dh, dc, caches[t], p)
        else:
            dx, dh, g = gru_cell_backward(dhs[t] + dh, caches[t], p)
        dxs[t] = dx
        for k in grads:
            grads[k] += g[k]
    return dxs, ((dh, dc) if kind == "lstm" else (dh,)), grads
