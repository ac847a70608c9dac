"""
키포인트 회귀 백본 (토이 규모)

BackboneModel                      : 구조 기술자 + 파라미터 dict
init_backbone(variant, ...)        : Glorot 초기화, 헤드는 0 가중치 + 평균 키포인트 편향
backbone_forward(model, images)    : (features B×D, keypoints B×16, cache)
backbone_backward(model, cache, d) : 파라미터별 기울기 dict
extract_features(model, images)    : N×D 특징 행렬 (배치 처리)
save_backbone / load_backbone      : ARMF1 컨테이너
backbone_hash(model)               : 파라미터 해시 (ELM 짝 확인용)

구조 (input 96 기준):
  stem 3×3 conv s2 (1→8) + ReLU → 1×1 widen (→16) → block1 → avgpool 2
  → 1×1 widen (→32) → block2 → avgpool 2 → GAP ⇒ features(32) → linear head ⇒ 16
block 은 variant 에 따라 SCConv 블록 또는 3×3 conv + ReLU (plain).
"""

from dataclasses import dataclass, field

import numpy as np

from modules.artifact import load_armf, save_armf, tensors_hash
from modules.errors import ConfigError, ShapeError
from modules.numeric.rng import Xoshiro256
from modules.pose.layers import (
    avgpool_backward, avgpool_forward, conv2d_backward, conv2d_forward,
    global_avgpool, global_avgpool_backward, glorot_uniform, relu, relu_backward,
)
from modules.pose.scconv import SCConvParams, init_scconv, scconv_backward, scconv_forward

VARIANTS   = ("scconv", "plain")
N_OUTPUTS  = 16
STEM_CH    = 8
WIDTHS     = (16, 32)


@dataclass
class BackboneModel:
    variant: str = "scconv"
    input_size: int = 96
    pool_rate: int = 4
    seed: int = 0
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def feature_dim(self) -> int:
        return WIDTHS[-1]

    def descriptor(self) -> dict:
        return {
            "kind": "backbone",
            "variant": self.variant,
            "input_size": self.input_size,
            "pool_rate": self.pool_rate,
            "stem_channels": STEM_CH,
            "widths": list(WIDTHS),
            "feature_dim": self.feature_dim,
            "n_outputs": N_OUTPUTS,
            "seed": self.seed,
        }


def init_backbone(variant: str = "scconv", input_size: int = 96, seed: int = 0,
                  head_bias: np.ndarray | None = None, pool_rate: int = 4) -> BackboneModel:
    """
    Args:
        variant   : "scconv" | "plain"
        input_size: 정사각 입력 크기 (stem 이후 크기와 그 절반이 pool_rate 로 나눠져야 함)
        seed      : 초기화 시드
        head_bias : 헤드 편향 초기값 (보통 학습셋 평균 키포인트), None 이면 0
    """
    if variant not in VARIANTS:
        raise ConfigError(f"알 수 없는 variant: {variant} (가능: {list(VARIANTS)})")
    s1 = (input_size + 1) // 2
    if s1 % 4 or (variant == "scconv" and (s1 % pool_rate or (s1 // 2) % pool_rate)):
        raise ConfigError(f"입력 {input_size} 는 풀링 구조(2×2 두 번, SCConv r={pool_rate})와 맞지 않습니다")
    rng = Xoshiro256(seed)
    p: dict[str, np.ndarray] = {}
    p["stem.w"] = glorot_uniform(rng, (STEM_CH, 1, 3, 3), 9, STEM_CH * 9)
    p["stem.b"] = np.zeros(STEM_CH)
    p["widen1.w"] = glorot_uniform(rng, (WIDTHS[0], STEM_CH, 1, 1), STEM_CH, WIDTHS[0])
    p["widen1.b"] = np.zeros(WIDTHS[0])
    p["widen2.w"] = glorot_uniform(rng, (WIDTHS[1], WIDTHS[0], 1, 1), WIDTHS[0], WIDTHS[1])
    p["widen2.b"] = np.zeros(WIDTHS[1])
    for name, width in (("block1", WIDTHS[0]), ("block2", WIDTHS[1])):
        if variant == "scconv":
            p.update(init_scconv(rng, width, pool_rate).to_dict(name))
        else:
            p[f"{name}.w"] = glorot_uniform(rng, (width, width, 3, 3), width * 9, width * 9)
            p[f"{name}.b"] = np.zeros(width)
    p["head.w"] = np.zeros((WIDTHS[1], N_OUTPUTS))
    p["head.b"] = np.zeros(N_OUTPUTS) if head_bias is None else np.asarray(head_bias, dtype=np.float64).copy()
    return BackboneModel(variant, input_size, pool_rate, seed, p)


# ─── 순전파 / 역전파 ──────────────────────────────────────────────────────────

def _as_batch(images: np.ndarray, size: int) -> np.ndarray:
    x = np.asarray(images)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (size, size):
        raise ShapeError(f"입력 이미지 크기 불일치: {x.shape[1:]} (기대 {size}×{size})")
    scale = 1.0 / 255.0 if x.dtype == np.uint8 else 1.0
    return x.astype(np.float64)[:, None] * scale


def _block_forward(model: BackboneModel, name: str, x: np.ndarray):
    p = model.params
    if model.variant == "scconv":
        sp = SCConvParams.from_dict(p, name, model.pool_rate)
        out, cache = scconv_forward(x, sp)
        return out, ("scconv", sp, cache)
    z, cache = conv2d_forward(x, p[f"{name}.w"], p[f"{name}.b"])
    return relu(z), ("plain", z, cache)


def _block_backward(name: str, dout: np.ndarray, bcache) -> tuple[np.ndarray, dict]:
    kind = bcache[0]
    if kind == "scconv":
        _, sp, cache = bcache
        dx, g = scconv_backward(dout, cache, sp)
        return dx, {f"{name}.{k}": v for k, v in g.items()}
    _, z, cache = bcache
    dx, dw, db = conv2d_backward(relu_backward(dout, z), cache)
    return dx, {f"{name}.w": dw, f"{name}.b": db}


def backbone_forward(model: BackboneModel, images: np.ndarray):
    """
    Args:
        model : BackboneModel
        images: (H,W) 또는 (B,H,W). uint8 이면 [0,1] 로 스케일

    Returns:
        (features (B, 32), keypoints (B, 16) 픽셀 단위, cache)

    Raises:
        ShapeError: 입력 크기 불일치
    """
    p = model.params
    x = _as_batch(images, model.input_size)
    z0, c_stem = conv2d_forward(x, p["stem.w"], p["stem.b"], stride=2, pad=1)
    a0 = relu(z0)
    w1, c_w1 = conv2d_forward(a0, p["widen1.w"], p["widen1.b"], pad=0)
    b1, k_b1 = _block_forward(model, "block1", w1)
    q1 = avgpool_forward(b1, 2)
    w2, c_w2 = conv2d_forward(q1, p["widen2.w"], p["widen2.b"], pad=0)
    b2, k_b2 = _block_forward(model, "block2", w2)
    q2 = avgpool_forward(b2, 2)
    feats = global_avgpool(q2)
    kp = feats @ p["head.w"] + p["head.b"]
    cache = (z0, c_stem, c_w1, k_b1, c_w2, k_b2, q2.shape, feats)
    return feats, kp, cache


def backbone_backward(model: BackboneModel, cache, dkp: np.ndarray) -> dict[str, np.ndarray]:
    """키포인트 출력 기울기 dkp (B×16) → 모든 파라미터 기울기."""
    p = model.params
    z0, c_stem, c_w1, k_b1, c_w2, k_b2, q2_shape, feats = cache
    g: dict[str, np.ndarray] = {}
    g["head.w"] = feats.T @ dkp
    g["head.b"] = dkp.sum(axis=0)
    dfeats = dkp @ p["head.w"].T
    dq2 = global_avgpool_backward(dfeats, q2_shape)
    db2 = avgpool_backward(dq2, 2)
    dw2, gb2 = _block_backward("block2", db2, k_b2)
    g.update(gb2)
    dq1, g["widen2.w"], g["widen2.b"] = conv2d_backward(dw2, c_w2)
    db1 = avgpool_backward(dq1, 2)
    dw1, gb1 = _block_backward("block1", db1, k_b1)
    g.update(gb1)
    da0, g["widen1.w"], g["widen1.b"] = conv2d_backward(dw1, c_w1)
    _, g["stem.w"], g["stem.b"] = conv2d_backward(relu_backward(da0, z0), c_stem)
    return g


def extract_features(model: BackboneModel, images: np.ndarray, batch: int = 64) -> np.ndarray:
    """N 장 이미지 → N×D 특징 (GAP 직후 벡터)."""
    images = np.asarray(images)
    if images.ndim == 2:
        images = images[None]
    out = np.empty((images.shape[0], model.feature_dim))
    for s in range(0, images.shape[0], batch):
        out[s:s + batch] = backbone_forward(model, images[s:s + batch])[0]
    return out


def predict_keypoints(model: BackboneModel, images: np.ndarray, batch: int = 64) -> np.ndarray:
    images = np.asarray(images)
    out = np.empty((images.shape[0], N_OUTPUTS))
    for s in range(0, images.shape[0], batch):
        out[s:s + batch] = backbone_forward(model, images[s:s + batch])[1]
    return out


# ─── 저장 ─────────────────────────────────────────────────────────────────────

def backbone_hash(model: BackboneModel) -> str:
    return tensors_hash(model.params)


def save_backbone(model: BackboneModel, path) -> None:
    save_armf(path, model.descriptor(), model.params)


def load_backbone(path) -> BackboneModel:
    header, tensors = load_armf(path)
    if header.get("kind") != "backbone":
        raise ConfigError(f"백본 모델 파일이 아닙니다: {path} (kind={header.get('kind')})")
    return BackboneModel(header["variant"], int(header["input_size"]), int(header["pool_rate"]),
                         int(header["seed"]), tensors)
