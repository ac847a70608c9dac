"""
Extreme Learning Machine 회귀 헤드

ElmModel                                  : 커널 종류, 은닉 파라미터, 출력 가중치 β, λ, 시드, 백본 해시
kernel_activation(model, X)               : 은닉층 출력 H (N×L)
elm_train(features, targets, kernel, n_hidden, lam, seed) : 1회 최소제곱 학습
elm_predict(model, features)              : H·β (N×16)
neuron_sweep(features, targets, kernels, ...) : 커널 × 뉴런 수 × fold 교차검증 표
lightest_within(curve, tolerance)         : 커널별 최저 MSE 의 (1+tol) 이내인 최소 뉴런 수
evaluate_fold(backbone, images, targets, val_idx, fold, ...) : fold 백본의 헤드 기준선 vs 커널별 ELM 기록
refine_poses(backbone, elm, images)       : 특징 추출 → ELM 예측 → PoseFrame 목록
save_elm / load_elm                       : ARMF1 컨테이너

커널
  linear : H = XW + b
  tanh   : H = tanh(XW + b)
  rbf    : H[i,j] = exp(−γⱼ‖xᵢ − aⱼ‖²), λ = 0
  rbf_l2 : rbf 은닉층 + 릿지(L2) 출력 해, λ > 0 (기본 1e-3)
"""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist

from modules.artifact import load_armf, parallel_map, save_armf
from modules.errors import ConfigError, ShapeError
from modules.evaluation.metrics import MetricRecord, kfold_split, mae, mse, train_indices
from modules.logs import log_event
from modules.numeric.linalg import solve_least_squares
from modules.numeric.rng import Xoshiro256, derive_seed
from modules.pose.backbone import BackboneModel, backbone_hash, extract_features, predict_keypoints
from modules.synth.dataset import PoseFrame

logger = logging.getLogger(__name__)

KERNELS = ("linear", "tanh", "rbf", "rbf_l2")
DEFAULT_RIDGE = 1e-3
N_TARGETS = 16


@dataclass
class ElmModel:
    kernel: str
    n_hidden: int
    beta: np.ndarray
    lam: float = 0.0
    seed: int = 0
    weights: np.ndarray | None = None   # D×L (linear, tanh)
    bias: np.ndarray | None = None      # L
    centers: np.ndarray | None = None   # L×D (rbf, rbf_l2)
    widths: np.ndarray | None = None    # L
    backbone_hash: str | None = None

    @property
    def feature_dim(self) -> int:
        return self.weights.shape[0] if self.weights is not None else self.centers.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        out = {"beta": self.beta}
        for name in ("weights", "bias", "centers", "widths"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


def resolve_lambda(kernel: str, lam: float | None) -> float:
    """커널별 λ 규칙: rbf_l2 ⇔ λ > 0."""
    if kernel not in KERNELS:
        raise ConfigError(f"알 수 없는 ELM 커널: {kernel} (가능: {list(KERNELS)})")
    if kernel == "rbf_l2":
        lam = DEFAULT_RIDGE if lam is None else float(lam)
        if lam <= 0:
            raise ConfigError(f"rbf_l2 커널은 λ > 0 이어야 합니다: {lam}")
        return lam
    if lam not in (None, 0, 0.0):
        raise ConfigError(f"{kernel} 커널은 λ = 0 으로만 학습합니다: {lam}")
    return 0.0


def kernel_activation(model: ElmModel, X: np.ndarray) -> np.ndarray:
    """
    Raises:
        ShapeError: X 의 열 수가 모델 입력 차원과 다른 경우
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.feature_dim:
        raise ShapeError(f"특징 차원 불일치: X 열 {X.shape[1]} vs 모델 {model.feature_dim}")
    if model.kernel in ("linear", "tanh"):
        Z = X @ model.weights + model.bias
        return Z if model.kernel == "linear" else np.tanh(Z)
    return np.exp(-model.widths[None, :] * cdist(X, model.centers, "sqeuclidean"))


def _draw_hidden(kernel: str, features: np.ndarray, n_hidden: int, rng: Xoshiro256) -> dict:
    n, d = features.shape
    if kernel in ("linear", "tanh"):
        return {"weights": rng.uniform((d, n_hidden), -1.0, 1.0), "bias": rng.uniform(n_hidden, -1.0, 1.0)}
    take = min(n_hidden, n)
    centers = features[rng.permutation(n)[:take]]
    if n_hidden > n:
        lo, hi = features.min(axis=0), features.max(axis=0)
        extra = lo + (hi - lo) * rng.uniform((n_hidden - n, d))
        centers = np.vstack([centers, extra])
    widths = 10.0 ** rng.uniform(n_hidden, -1.0, 1.0)  # 로그 균등 [0.1, 10]
    return {"centers": centers, "widths": widths}


def elm_train(features: np.ndarray, targets: np.ndarray, kernel: str, n_hidden: int,
              lam: float | None = None, seed: int = 0, backbone_hash: str | None = None) -> ElmModel:
    """
    은닉 파라미터를 시드 난수로 뽑고 β = solve_least_squares(H, T, λ) 를 한 번 풉니다.

    Args:
        features: N×D 특징
        targets : N×16 키포인트
        kernel  : linear | tanh | rbf | rbf_l2
        n_hidden: 은닉 뉴런 수 L (≥ 1)
        lam     : rbf_l2 의 릿지 계수 (None → 1e-3), 그 외 커널은 0
        seed    : 은닉 파라미터 시드

    Raises:
        ConfigError: N < 2, L < 1, D = 0, λ 규칙 위반
        ShapeError : 특징/타깃 행 수 불일치
    """
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    lam = resolve_lambda(kernel, lam)
    if features.ndim != 2 or targets.ndim != 2 or features.shape[0] != targets.shape[0]:
        raise ShapeError(f"특징/타깃 형태 불일치: {features.shape} vs {targets.shape}")
    if features.shape[0] < 2:
        raise ConfigError(f"ELM 학습에는 샘플이 2개 이상 필요합니다: {features.shape[0]}")
    if n_hidden < 1:
        raise ConfigError(f"n_hidden 은 1 이상이어야 합니다: {n_hidden}")
    if features.shape[1] == 0:
        raise ConfigError("특징 차원이 0 이라 은닉 파라미터를 만들 수 없습니다")

    hidden = _draw_hidden(kernel, features, n_hidden, Xoshiro256(seed))
    model = ElmModel(kernel, n_hidden, np.zeros((n_hidden, targets.shape[1])), lam, seed,
                     backbone_hash=backbone_hash, **hidden)
    H = kernel_activation(model, features)
    model.beta = solve_least_squares(H, targets, lam)
    return model


def elm_predict(model: ElmModel, features: np.ndarray) -> np.ndarray:
    return kernel_activation(model, features) @ model.beta


# ─── 뉴런 수 스윕 ─────────────────────────────────────────────────────────────

def _sweep_cell(args) -> list[dict]:
    features, targets, folds, kernel, n_hidden, lam, seed = args
    rows = []
    for k, val_idx in enumerate(folds):
        tr_idx = train_indices(features.shape[0], val_idx)
        model = elm_train(features[tr_idx], targets[tr_idx], kernel, n_hidden, lam, seed)
        pred = elm_predict(model, features[val_idx])
        rows.append({"kernel": kernel, "n_hidden": n_hidden, "fold": k,
                     "mse": mse(targets[val_idx], pred), "mae": mae(targets[val_idx], pred)})
    return rows


@dataclass
class SweepResult:
    folds: pd.DataFrame   # kernel, n_hidden, fold, mse, mae
    curve: pd.DataFrame   # kernel, n_hidden, mse, mae (fold 평균)


def neuron_sweep(features: np.ndarray, targets: np.ndarray, kernels=KERNELS,
                 n_min: int = 100, n_max: int = 1000, step: int = 50, folds: int = 5,
                 seed: int = 0, lam: float | None = None, workers: int = 1) -> SweepResult:
    """
    커널 × 뉴런 수(n_min..n_max, step) 마다 k-fold 평균 MSE 를 계산합니다.

    셀 (커널 i, 뉴런 j) 의 은닉 시드는 derive_seed(seed, 셀 번호) 입니다.
    중복된 커널 이름은 경고 후 한 번만 평가합니다.

    Raises:
        ConfigError: n_max < n_min, step ≤ 0, 샘플 수 < folds
    """
    if n_max < n_min or step <= 0:
        raise ConfigError(f"스윕 범위 오류: min={n_min}, max={n_max}, step={step}")
    features = np.asarray(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if features.shape[0] < folds:
        raise ConfigError(f"샘플 수({features.shape[0]})가 fold 수({folds})보다 적습니다")

    unique = list(dict.fromkeys(kernels))
    if len(unique) != len(list(kernels)):
        log_event(logger, "elm.sweep.duplicate_kernels", logging.WARNING, given=",".join(kernels))
    for k in unique:
        resolve_lambda(k, lam if k == "rbf_l2" else None)

    counts = list(range(n_min, n_max + 1, step))
    splits = kfold_split(features.shape[0], folds, seed)
    jobs = []
    for i, kernel in enumerate(unique):
        for j, n_hidden in enumerate(counts):
            cell_seed = derive_seed(seed, i * len(counts) + j)
            jobs.append((features, targets, splits, kernel, n_hidden,
                         lam if kernel == "rbf_l2" else None, cell_seed))
    rows = [r for cell in parallel_map(_sweep_cell, jobs, workers) for r in cell]
    fold_df = pd.DataFrame(rows, columns=["kernel", "n_hidden", "fold", "mse", "mae"])
    curve = (fold_df.groupby(["kernel", "n_hidden"], sort=False)[["mse", "mae"]]
             .mean().reset_index())
    log_event(logger, "elm.sweep.done", kernels=len(unique), counts=len(counts), rows=len(curve))
    return SweepResult(fold_df, curve)


def lightest_within(curve: pd.DataFrame, tolerance: float = 0.05) -> pd.DataFrame:
    """커널별로 최저 평균 MSE 의 (1 + tolerance) 배 이내에 드는 가장 작은 뉴런 수."""
    rows = []
    for kernel, grp in curve.groupby("kernel", sort=False):
        best = grp["mse"].min()
        ok = grp[grp["mse"] <= best * (1.0 + tolerance)].sort_values("n_hidden")
        first = ok.iloc[0]
        rows.append({"kernel": kernel, "n_hidden": int(first["n_hidden"]), "mse": float(first["mse"]),
                     "best_n_hidden": int(grp.loc[grp["mse"].idxmin(), "n_hidden"]), "best_mse": float(best)})
    return pd.DataFrame(rows)


# ─── fold 단위 보정 평가 ──────────────────────────────────────────────────────

def evaluate_fold(backbone: BackboneModel, images: np.ndarray, targets: np.ndarray, val_idx: np.ndarray,
                  fold: int, kernels=KERNELS, n_hidden: int = 1000, lam: float | None = None,
                  seed: int = 0) -> list[MetricRecord]:
    """
    한 fold 의 백본으로 헤드 직접 출력(기준선)과 커널별 ELM 을 같은 검증셋에서 비교합니다.

    커널 i 의 은닉 시드는 derive_seed(seed, i) 입니다.

    Returns:
        [기준선 기록, 커널별 기록...]  context = {"stage": "refine", "model", "fold"[, "kernel"]}
    """
    targets = np.asarray(targets, dtype=np.float64)
    tr_idx = train_indices(images.shape[0], val_idx)
    y = targets[val_idx]
    head = predict_keypoints(backbone, images[val_idx])
    records = [MetricRecord({"stage": "refine", "model": "backbone-head", "fold": fold}, mse(y, head), mae(y, head))]

    feats = extract_features(backbone, images)
    bb_hash = backbone_hash(backbone)
    for i, kernel in enumerate(dict.fromkeys(kernels)):
        elm = elm_train(feats[tr_idx], targets[tr_idx], kernel, n_hidden,
                        lam if kernel == "rbf_l2" else None, derive_seed(seed, i), bb_hash)
        pred = elm_predict(elm, feats[val_idx])
        records.append(MetricRecord({"stage": "refine", "model": f"elm-{kernel}", "kernel": kernel, "fold": fold},
                                    mse(y, pred), mae(y, pred)))
        log_event(logger, "elm.train", fold=fold, kernel=kernel, n_hidden=n_hidden, mse=records[-1].mse)
    return records


# ─── 포즈 보정 ────────────────────────────────────────────────────────────────

def refine_poses(backbone: BackboneModel, elm: ElmModel, images: np.ndarray,
                 frame_ids=None) -> list[PoseFrame]:
    """
    Raises:
        ShapeError : 백본 특징 차원과 ELM 입력 차원 불일치
        ConfigError: ELM 에 기록된 백본 해시가 주어진 백본과 다른 경우
    """
    if backbone.feature_dim != elm.feature_dim:
        raise ShapeError(f"백본 특징 차원 {backbone.feature_dim} ≠ ELM 입력 차원 {elm.feature_dim}")
    if elm.backbone_hash is not None and elm.backbone_hash != backbone_hash(backbone):
        raise ConfigError(
            f"ELM 이 다른 백본으로 학습되었습니다: {elm.backbone_hash} ≠ {backbone_hash(backbone)}"
        )
    images = np.asarray(images)
    pred = elm_predict(elm, extract_features(backbone, images))
    ids = range(len(pred)) if frame_ids is None else frame_ids
    return [PoseFrame(int(i), p) for i, p in zip(ids, pred)]


# ─── 저장 ─────────────────────────────────────────────────────────────────────

def save_elm(model: ElmModel, path) -> None:
    header = {"kind": "elm", "kernel": model.kernel, "n_hidden": model.n_hidden,
              "lambda": model.lam, "seed": model.seed, "backbone_hash": model.backbone_hash}
    save_armf(path, header, model.tensors())


def load_elm(path) -> ElmModel:
    header, t = load_armf(path)
    if header.get("kind") != "elm":
        raise ConfigError(f"ELM 모델 파일이 아닙니다: {path} (kind={header.get('kind')})")
    return ElmModel(header["kernel"], int(header["n_hidden"]), t["beta"], float(header["lambda"]),
                    int(header["seed"]), t.get("weights"), t.get("bias"), t.get("centers"),
                    t.get("widths"), header.get("backbone_hash"))
