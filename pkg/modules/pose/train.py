"""
포즈 백본 학습 (Adam + MSE, k-fold 교차검증)

PoseHyper                                 : epochs, lr, batch, folds, seed, variant, log_every
fit_backbone(images, targets, hyper, seed): 단일 모델 학습 → (model, loss_history)
train_pose(images, targets, hyper, workers): fold 별 모델 + MetricRecord + 요약(포즈 표 행 형식)
keypoint_errors(y, p)                     : 관절별 평균 유클리드 오차 (8개)
"""

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from modules.artifact import parallel_map
from modules.errors import ConfigError, NumericalError, ShapeError
from modules.evaluation.metrics import MetricRecord, format_mean_std, kfold_split, mae, mse, summarize, train_indices
from modules.logs import log_event
from modules.numeric.optim import Adam
from modules.numeric.rng import Xoshiro256, derive_seed
from modules.pose.backbone import (
    N_OUTPUTS, BackboneModel, backbone_backward, backbone_forward, init_backbone, predict_keypoints,
)

logger = logging.getLogger(__name__)


@dataclass
class PoseHyper:
    epochs: int = 500
    lr: float = 1e-4
    batch: int = 8
    folds: int = 5
    seed: int = 0
    variant: str = "scconv"
    log_every: int = 50

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1:
            raise ConfigError(f"epochs, batch 는 1 이상이어야 합니다: {self.epochs}, {self.batch}")
        if self.lr <= 0:
            raise ConfigError(f"lr 은 양수여야 합니다: {self.lr}")


@dataclass
class PoseTrainResult:
    models: list[BackboneModel]
    records: list[MetricRecord]
    folds: list[np.ndarray]
    histories: list[list[float]]
    keypoint_mae: list[list[float]] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)

    def summary(self) -> dict:
        """포즈 표 행 형식: {"model", "MSE", "MAE", ...숫자 컬럼}."""
        mses = [r.mse for r in self.records]
        maes = [r.mae for r in self.records]
        m_mse, s_mse = summarize(mses)
        m_mae, s_mae = summarize(maes)
        return {
            "model": self.records[0].context.get("model") if self.records else None,
            "MSE": format_mean_std(mses), "MAE": format_mean_std(maes),
            "mse_mean": m_mse, "mse_std": s_mse, "mae_mean": m_mae, "mae_std": s_mae,
        }


def keypoint_errors(y: np.ndarray, p: np.ndarray) -> list[float]:
    d = (np.asarray(y) - np.asarray(p)).reshape(-1, N_OUTPUTS // 2, 2)
    return np.sqrt((d * d).sum(axis=2)).mean(axis=0).tolist()


def _check_data(images: np.ndarray, targets: np.ndarray) -> None:
    if images.ndim != 3:
        raise ShapeError(f"이미지는 (N,H,W) 여야 합니다: {images.shape}")
    if targets.shape != (images.shape[0], N_OUTPUTS):
        raise ShapeError(f"타깃은 (N,{N_OUTPUTS}) 이어야 합니다: {targets.shape}")


def fit_backbone(images: np.ndarray, targets: np.ndarray, hyper: PoseHyper, seed: int,
                 label: str = "full") -> tuple[BackboneModel, list[float]]:
    """
    평균 키포인트로 헤드 편향을 잡고, 에폭마다 한 번 셔플하며 미니배치 Adam 으로 학습합니다.

    Returns:
        (학습된 모델, 에폭별 평균 학습 손실)

    Raises:
        NumericalError: 손실이 비유한 값이 된 경우 (에폭·배치 위치 포함)
    """
    _check_data(images, targets)
    model = init_backbone(hyper.variant, images.shape[1], seed, head_bias=targets.mean(axis=0))
    opt = Adam(lr=hyper.lr)
    rng = Xoshiro256(derive_seed(seed, 1))
    n = images.shape[0]
    history: list[float] = []
    for epoch in range(hyper.epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, hyper.batch):
            idx = order[s:s + hyper.batch]
            _, kp, cache = backbone_forward(model, images[idx])
            resid = kp - targets[idx]
            loss = float(np.mean(resid * resid))
            if not np.isfinite(loss):
                raise NumericalError(
                    f"포즈 학습 손실이 비유한 값입니다 ({label}, epoch={epoch}, batch_start={s})"
                )
            grads = backbone_backward(model, cache, 2.0 * resid / resid.size)
            opt.step(model.params, grads)
            total += loss * idx.size
        history.append(total / n)
        if hyper.log_every and (epoch % hyper.log_every == 0 or epoch == hyper.epochs - 1):
            log_event(logger, "pose.epoch", run=label, epoch=epoch, loss=history[-1])
    return model, history


def _train_fold(args) -> tuple:
    images, targets, hyper, fold, val_idx = args
    started = time.perf_counter()
    tr_idx = train_indices(images.shape[0], val_idx)
    seed = derive_seed(hyper.seed, fold)
    log_event(logger, "pose.fold.start", fold=fold, train=tr_idx.size, val=val_idx.size)
    model, history = fit_backbone(images[tr_idx], targets[tr_idx], hyper, seed, label=f"fold{fold}")
    pred = predict_keypoints(model, images[val_idx])
    y = targets[val_idx]
    record = MetricRecord(
        {"stage": "pose", "model": f"backbone-{hyper.variant}", "fold": fold},
        mse(y, pred), mae(y, pred),
    )
    log_event(logger, "pose.fold.done", fold=fold, mse=record.mse, mae=record.mae)
    return model, record, history, keypoint_errors(y, pred), time.perf_counter() - started


def train_pose(images: np.ndarray, targets: np.ndarray, hyper: PoseHyper, workers: int = 1) -> PoseTrainResult:
    """
    k-fold 교차검증 학습.

    Args:
        images : (N, H, W) uint8 프레임
        targets: (N, 16) 주석 좌표 (픽셀)
        hyper  : PoseHyper
        workers: fold 병렬 프로세스 수

    Returns:
        PoseTrainResult (fold 순서의 모델·기록·분할·손실 이력)

    Raises:
        ConfigError   : 샘플 수 < folds
        ShapeError    : 이미지/타깃 정합 오류
        NumericalError: 비유한 손실
    """
    images = np.asarray(images)
    targets = np.asarray(targets, dtype=np.float64)
    _check_data(images, targets)
    if images.shape[0] < hyper.folds:
        raise ConfigError(f"샘플 수({images.shape[0]})가 fold 수({hyper.folds})보다 적습니다")
    folds = kfold_split(images.shape[0], hyper.folds, hyper.seed)
    jobs = [(images, targets, hyper, k, v) for k, v in enumerate(folds)]
    out = parallel_map(_train_fold, jobs, workers)
    return PoseTrainResult(
        models=[o[0] for o in out],
        records=[o[1] for o in out],
        folds=folds,
        histories=[o[2] for o in out],
        keypoint_mae=[o[3] for o in out],
        wall_times=[o[4] for o in out],
    )


def hyper_dict(hyper: PoseHyper) -> dict:
    return asdict(hyper)
