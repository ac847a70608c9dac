"""
2단 적층 인코더-디코더 (움직임 예측)

ForecastModel                         : 셀 종류, 은닉 크기, n, f, 파라미터 dict, 표준화 통계
init_forecast(cell, n, f, hidden, seed, mean, std) : 초기 모델
standardize / destandardize           : 좌표별 (x − mean) / std 와 그 역
encdec_forward(model, past)           : (B, n, 16) → (B, f, 16) 픽셀 단위
encdec_forward_std(model, xs)         : 표준화 공간 순전파 (학습용, cache 포함)
encdec_backward(model, cache, dy)     : 표준화 출력 기울기 → 파라미터 기울기
save_forecast / load_forecast         : ARMF1 컨테이너

흐름
  enc1: n 스텝 입력 → 시퀀스,  enc2: 그 시퀀스 → 마지막 은닉 = context
  디코더 입력 = context 를 f 번 반복
  dec1 초기 상태 = enc1 마지막 상태, dec2 초기 상태 = enc2 마지막 상태
  스텝마다 out 투영 (H → 16)
"""

from dataclasses import dataclass, field

import numpy as np

from modules.artifact import load_armf, save_armf
from modules.errors import ConfigError, ShapeError
from modules.forecast.cells import (
    CellParams, check_cell, init_cell, layer_backward, layer_forward, zero_state,
)
from modules.numeric.rng import Xoshiro256
from modules.pose.layers import glorot_uniform

N_COORDS = 16
LAYERS = ("enc1", "enc2", "dec1", "dec2")


@dataclass
class ForecastModel:
    cell: str
    n: int
    f: int
    hidden: int = 64
    seed: int = 0
    params: dict[str, np.ndarray] = field(default_factory=dict)
    mean: np.ndarray = field(default_factory=lambda: np.zeros(N_COORDS))
    std: np.ndarray = field(default_factory=lambda: np.ones(N_COORDS))

    def __post_init__(self):
        check_cell(self.cell)
        if self.n < 1 or self.f < 1 or self.hidden < 1:
            raise ConfigError(f"n, f, hidden 은 1 이상이어야 합니다: n={self.n}, f={self.f}, hidden={self.hidden}")
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != (N_COORDS,) or self.std.shape != (N_COORDS,):
            raise ShapeError(f"표준화 통계는 {N_COORDS}개여야 합니다: mean{self.mean.shape} std{self.std.shape}")
        if np.any(self.std <= 0):
            raise ConfigError("표준화 std 는 모두 양수여야 합니다")

    def descriptor(self) -> dict:
        return {
            "kind": "forecast", "cell": self.cell, "n": self.n, "f": self.f,
            "hidden": self.hidden, "seed": self.seed,
            "mean": self.mean.tolist(), "std": self.std.tolist(),
        }


def init_forecast(cell: str, n: int, f: int, hidden: int = 64, seed: int = 0,
                  mean=None, std=None) -> ForecastModel:
    """Glorot 균등 초기화, 편향 0 (LSTM forget 게이트 포함)."""
    check_cell(cell)
    rng = Xoshiro256(seed)
    p: dict[str, np.ndarray] = {}
    for name, in_dim in zip(LAYERS, (N_COORDS, hidden, hidden, hidden)):
        p.update(init_cell(rng, cell, in_dim, hidden).to_dict(name))
    p["out.W"] = glorot_uniform(rng, (hidden, N_COORDS), hidden, N_COORDS)
    p["out.b"] = np.zeros(N_COORDS)
    return ForecastModel(cell, n, f, hidden, seed, p,
                         np.zeros(N_COORDS) if mean is None else mean,
                         np.ones(N_COORDS) if std is None else std)


def standardize(model: ForecastModel, x: np.ndarray) -> np.ndarray:
    return (np.asarray(x, dtype=np.float64) - model.mean) / model.std


def destandardize(model: ForecastModel, z: np.ndarray) -> np.ndarray:
    return np.asarray(z, dtype=np.float64) * model.std + model.mean


# ─── 순전파 / 역전파 ──────────────────────────────────────────────────────────

def encdec_forward_std(model: ForecastModel, xs: np.ndarray):
    """
    Args:
        xs: (B, n, 16) 표준화된 과거 창

    Returns:
        (ys (B, f, 16) 표준화 공간 예측, cache)
    """
    if xs.ndim != 3 or xs.shape[1:] != (model.n, N_COORDS):
        raise ShapeError(f"과거 창 형태 {xs.shape[1:]} ≠ ({model.n}, {N_COORDS})")
    kind, H, p = model.cell, model.hidden, model.params
    cells = {name: CellParams.from_dict(p, name) for name in LAYERS}
    B = xs.shape[0]
    seq = xs.transpose(1, 0, 2)

    hs1, st1, c_e1 = layer_forward(kind, seq, cells["enc1"], zero_state(kind, B, H))
    _, st2, c_e2 = layer_forward(kind, hs1, cells["enc2"], zero_state(kind, B, H))
    dec_in = np.broadcast_to(st2[0], (model.f, B, H))
    ds1, _, c_d1 = layer_forward(kind, dec_in, cells["dec1"], st1)
    ds2, _, c_d2 = layer_forward(kind, ds1, cells["dec2"], st2)
    ys = ds2 @ p["out.W"] + p["out.b"]
    cache = (cells, c_e1, c_e2, c_d1, c_d2, ds2, B)
    return ys.transpose(1, 0, 2), cache


def encdec_backward(model: ForecastModel, cache, dys: np.ndarray) -> dict[str, np.ndarray]:
    """dys (B, f, 16): 표준화 출력에 대한 손실 기울기 → 파라미터 기울기 dict."""
    kind, H, p = model.cell, model.hidden, model.params
    cells, c_e1, c_e2, c_d1, c_d2, ds2, B = cache
    dy = dys.transpose(1, 0, 2)
    g: dict[str, np.ndarray] = {
        "out.W": np.einsum("tbh,tbk->hk", ds2, dy),
        "out.b": dy.sum(axis=(0, 1)),
    }
    dds2 = dy @ p["out.W"].T

    zero = zero_state(kind, B, H)
    dds1, dst2, gd2 = layer_backward(kind, dds2, zero, c_d2, cells["dec2"])
    ddec_in, dst1, gd1 = layer_backward(kind, dds1, zero, c_d1, cells["dec1"])
    dctx = ddec_in.sum(axis=0)

    denc2_final = (dst2[0] + dctx,) + tuple(dst2[1:])
    dhs1, _, ge2 = layer_backward(kind, np.zeros((model.n, B, H)), denc2_final, c_e2, cells["enc2"])
    _, _, ge1 = layer_backward(kind, dhs1, dst1, c_e1, cells["enc1"])

    for name, grads in (("enc1", ge1), ("enc2", ge2), ("dec1", gd1), ("dec2", gd2)):
        g.update({f"{name}.{k}": v for k, v in grads.items()})
    return g


def encdec_forward(model: ForecastModel, past: np.ndarray) -> np.ndarray:
    """
    Args:
        past: (n, 16) 또는 (B, n, 16) 픽셀 좌표

    Returns:
        (f, 16) 또는 (B, f, 16) 픽셀 좌표 예측

    Raises:
        ShapeError: 과거 창 길이가 n 이 아닌 경우
    """
    past = np.asarray(past, dtype=np.float64)
    single = past.ndim == 2
    xs = standardize(model, past[None] if single else past)
    ys, _ = encdec_forward_std(model, xs)
    out = destandardize(model, ys)
    return out[0] if single else out


# ─── 저장 ─────────────────────────────────────────────────────────────────────

def save_forecast(model: ForecastModel, path) -> None:
    save_armf(path, model.descriptor(), model.params)


def load_forecast(path) -> ForecastModel:
    header, tensors = load_armf(path)
    if header.get("kind") != "forecast":
        raise ConfigError(f"예측 모델 파일이 아닙니다: {path} (kind={header.get('kind')})")
    return ForecastModel(header["cell"], int(header["n"]), int(header["f"]), int(header["hidden"]),
                         int(header["seed"]), tensors, np.array(header["mean"]), np.array(header["std"]))
