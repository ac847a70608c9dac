"""
움직임 예측 학습 (시간순 분할, 전체 BPTT, Adam + 전역 노름 클리핑)

WindowSample                          : 과거 n×16, 미래 f×16
WindowSet                             : 시계열의 strided view 로 만든 창 묶음 (len, 인덱싱 지원)
windowize(series, n, f, stride)       : 창 개수 = floor((T − n − f) / stride) + 1
ForecastHyper                         : epochs, lr, batch, hidden, clip, val_fraction, stride, seed, log_every
train_forecast(series, cell, n, f, hyper) : ForecastRun (모델, 검증 MSE/MAE, 스텝별 MSE, 손실 이력)
predict_windows(model, series, stride): 질의 창마다 f×16 예측
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from modules.errors import ConfigError, NumericalError, ShapeError
from modules.evaluation.metrics import MetricRecord, mae, mse
from modules.forecast.encdec import (
    N_COORDS, ForecastModel, destandardize, encdec_backward, encdec_forward_std, init_forecast, standardize,
)
from modules.logs import log_event
from modules.numeric.optim import Adam, clip_global_norm
from modules.numeric.rng import Xoshiro256, derive_seed

logger = logging.getLogger(__name__)

MIN_STD = 1e-8
PREDICT_BATCH = 512


@dataclass(frozen=True)
class WindowSample:
    past: np.ndarray
    future: np.ndarray


@dataclass
class WindowSet:
    past: np.ndarray    # (S, n, 16) view
    future: np.ndarray  # (S, f, 16) view
    starts: np.ndarray  # 각 창의 과거 첫 행 인덱스

    def __len__(self) -> int:
        return self.past.shape[0]

    def __getitem__(self, i: int) -> WindowSample:
        return WindowSample(self.past[i], self.future[i])


def _as_series(series) -> np.ndarray:
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 2 or series.shape[1] != N_COORDS:
        raise ShapeError(f"시계열은 (T, {N_COORDS}) 이어야 합니다: {series.shape}")
    return series


def windowize(series, n: int, f: int, stride: int = 1) -> WindowSet:
    """
    Raises:
        ConfigError: n, f, stride < 1 또는 T < n + f
        ShapeError : 열 수가 16 이 아님
    """
    series = _as_series(series)
    if n < 1 or f < 1 or stride < 1:
        raise ConfigError(f"n, f, stride 는 1 이상이어야 합니다: n={n}, f={f}, stride={stride}")
    T = series.shape[0]
    if T < n + f:
        raise ConfigError(f"시계열 길이 {T} 가 n + f = {n + f} 보다 짧습니다")
    win = sliding_window_view(series, n + f, axis=0)[::stride].transpose(0, 2, 1)  # (S, n+f, 16)
    starts = np.arange(0, T - n - f + 1, stride)
    return WindowSet(win[:, :n], win[:, n:], starts)


@dataclass
class ForecastHyper:
    epochs: int = 500
    lr: float = 1e-4
    batch: int = 256
    hidden: int = 64
    clip: float = 5.0
    val_fraction: float = 0.2
    stride: int = 1
    seed: int = 0
    log_every: int = 50
    purge: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch < 1 or self.hidden < 1:
            raise ConfigError(f"epochs, batch, hidden 은 1 이상이어야 합니다: {self.epochs}, {self.batch}, {self.hidden}")
        if self.lr <= 0:
            raise ConfigError(f"lr 은 양수여야 합니다: {self.lr}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError(f"val_fraction 은 (0, 1) 범위여야 합니다: {self.val_fraction}")


@dataclass
class ForecastRun:
    model: ForecastModel
    record: MetricRecord
    horizon_mse: list[float]
    history: list[float] = field(default_factory=list)
    n_train: int = 0
    n_val: int = 0
    purged: int = 0

    def extra(self) -> dict:
        return {"horizon_mse": self.horizon_mse, "loss_history": self.history,
                "n_train": self.n_train, "n_val": self.n_val, "purged": self.purged}


def chronological_split(windows: WindowSet, n: int, f: int, val_fraction: float,
                        purge: bool = True) -> tuple[np.ndarray, np.ndarray, int]:
    """
    앞쪽 창은 학습, 뒤쪽 창은 검증. purge 이면 검증 첫 행과 겹치는 학습 창을 뺍니다.

    Returns:
        (학습 인덱스, 검증 인덱스, 제거된 창 수)
    """
    S = len(windows)
    n_val = max(1, int(round(S * val_fraction)))
    n_train = S - n_val
    if n_train < 1:
        raise ConfigError(f"학습 창이 없습니다 (창 {S}개, val_fraction={val_fraction})")
    val_idx = np.arange(n_train, S)
    train_idx = np.arange(n_train)
    if purge:
        keep = windows.starts[train_idx] + n + f - 1 < windows.starts[n_train]
        if keep.any():
            dropped = int(n_train - keep.sum())
            return train_idx[keep], val_idx, dropped
        log_event(logger, "forecast.purge.skipped", logging.WARNING, windows=S, n=n, f=f)
    return train_idx, val_idx, 0


def _fit_stats(series: np.ndarray, last_row: int) -> tuple[np.ndarray, np.ndarray]:
    rows = series[:last_row + 1]
    mean = rows.mean(axis=0)
    std = rows.std(axis=0)
    return mean, np.where(std < MIN_STD, 1.0, std)


def _predict_std(model: ForecastModel, past_std: np.ndarray, idx: np.ndarray) -> np.ndarray:
    out = np.empty((idx.size, model.f, N_COORDS))
    for s in range(0, idx.size, PREDICT_BATCH):
        part = idx[s:s + PREDICT_BATCH]
        out[s:s + part.size] = encdec_forward_std(model, past_std[part])[0]
    return out


def train_forecast(series, cell: str, n: int, f: int, hyper: ForecastHyper) -> ForecastRun:
    """
    Args:
        series: (T, 16) 픽셀 좌표 시계열 (T ≥ n + f + 1)
        cell  : "lstm" | "gru"
        n, f  : 과거 / 미래 창 길이
        hyper : ForecastHyper

    Returns:
        ForecastRun. 검증 MSE/MAE 는 픽셀 단위, 학습 손실은 표준화 공간

    Raises:
        ConfigError   : 시계열 길이 부족, 잘못된 하이퍼파라미터
        NumericalError: 비유한 손실
    """
    series = _as_series(series)
    if series.shape[0] < n + f + 1:
        raise ConfigError(f"시계열 길이 {series.shape[0]} 는 n + f + 1 = {n + f + 1} 이상이어야 합니다")
    windows = windowize(series, n, f, hyper.stride)
    train_idx, val_idx, purged = chronological_split(windows, n, f, hyper.val_fraction, hyper.purge)
    last_train_row = int(windows.starts[train_idx[-1]]) + n + f - 1
    mean, std = _fit_stats(series, last_train_row)

    model = init_forecast(cell, n, f, hyper.hidden, hyper.seed, mean, std)
    zwin = windowize(standardize(model, series), n, f, hyper.stride)
    opt = Adam(lr=hyper.lr)
    rng = Xoshiro256(derive_seed(hyper.seed, 1))
    label = f"{cell}-n{n}-f{f}"
    history: list[float] = []
    for epoch in range(hyper.epochs):
        order = train_idx[rng.permutation(train_idx.size)]
        total = 0.0
        for s in range(0, order.size, hyper.batch):
            idx = order[s:s + hyper.batch]
            ys, cache = encdec_forward_std(model, zwin.past[idx])
            resid = ys - zwin.future[idx]
            loss = float(np.mean(resid * resid))
            if not math.isfinite(loss):
                raise NumericalError(f"예측 학습 손실이 비유한 값입니다 ({label}, epoch={epoch}, batch_start={s})")
            grads = encdec_backward(model, cache, 2.0 * resid / resid.size)
            grads, _ = clip_global_norm(grads, hyper.clip)
            opt.step(model.params, grads)
            total += loss * idx.size
        history.append(total / order.size)
        if hyper.log_every and (epoch % hyper.log_every == 0 or epoch == hyper.epochs - 1):
            log_event(logger, "forecast.epoch", run=label, epoch=epoch, loss=history[-1])

    pred = destandardize(model, _predict_std(model, zwin.past, val_idx))
    y = windows.future[val_idx]
    err = pred - y
    horizon = np.mean(err * err, axis=(0, 2)).tolist()
    record = MetricRecord({"stage": "forecast", "cell": cell, "n": n, "f": f}, mse(y, pred), mae(y, pred))
    log_event(logger, "forecast.done", run=label, mse=record.mse, mae=record.mae,
              train=train_idx.size, val=val_idx.size, purged=purged)
    return ForecastRun(model, record, horizon, history, int(train_idx.size), int(val_idx.size), purged)


def predict_windows(model: ForecastModel, series, stride: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """
    길이 n 의 질의 창마다 f×16 을 예측합니다.

    Returns:
        (창 시작 인덱스 (K,), 예측 (K, f, 16) 픽셀 단위)

    Raises:
        ConfigError: T < n 또는 stride < 1
    """
    series = _as_series(series)
    if stride < 1:
        raise ConfigError(f"stride 는 1 이상이어야 합니다: {stride}")
    if series.shape[0] < model.n:
        raise ConfigError(f"질의 시계열 길이 {series.shape[0]} 가 n = {model.n} 보다 짧습니다")
    past = sliding_window_view(standardize(model, series), model.n, axis=0)[::stride].transpose(0, 2, 1)
    starts = np.arange(0, series.shape[0] - model.n + 1, stride)
    idx = np.arange(starts.size)
    return starts, destandardize(model, _predict_std(model, past, idx))


def hyper_dict(hyper: ForecastHyper) -> dict:
    return asdict(hyper)
