"""
평가 지표 / 교차검증 분할 / 박스플롯 통계

mse(y, p), mae(y, p)     : 스칼라 잔차 전체(샘플×16, 예측이면 ×f)에 대한 평균, 픽셀 단위, 정규화 없음
MetricRecord             : (context, mse, mae)
kfold_split(n, k, seed)  : 시드 셔플 후 연속 구간 k개 (앞쪽 n % k 개 fold 가 1개씩 더 큼)
boxplot_stats(values)    : type-7 사분위수, 1.5×IQR 수염, 이상치
summarize(values)        : (mean, std), 표의 "mean±std" 용 (모표준편차)
"""

from dataclasses import dataclass, field

import numpy as np

from modules.errors import ConfigError, ShapeError
from modules.numeric.rng import Xoshiro256


def _residuals(y, p) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).ravel()
    p = np.asarray(p, dtype=np.float64).ravel()
    if y.shape != p.shape:
        raise ShapeError(f"길이 불일치: {y.size} vs {p.size}")
    if y.size == 0:
        raise ConfigError("빈 입력으로는 오차를 계산할 수 없습니다")
    return y - p


def mse(y, p) -> float:
    r = _residuals(y, p)
    return float(np.mean(r * r))


def mae(y, p) -> float:
    return float(np.mean(np.abs(_residuals(y, p))))


@dataclass
class MetricRecord:
    context: dict = field(default_factory=dict)
    mse: float = 0.0
    mae: float = 0.0

    def __post_init__(self):
        for name in ("mse", "mae"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"{name} 는 0 이상 유한값이어야 합니다: {v}")
            setattr(self, name, v)

    def to_dict(self) -> dict:
        return {"context": dict(self.context), "mse": self.mse, "mae": self.mae}


def kfold_split(n: int, k: int, seed: int = 0) -> list[np.ndarray]:
    """
    Args:
        n   : 샘플 수
        k   : fold 수 (2 ≤ k ≤ n)
        seed: 셔플 시드

    Returns:
        k 개의 검증 인덱스 배열 (각각 오름차순). 합집합은 0..n−1 을 정확히 한 번씩 덮음.

    Raises:
        ConfigError: k < 2 또는 k > n
    """
    if k < 2 or k > n:
        raise ConfigError(f"fold 수는 2 이상 샘플 수({n}) 이하여야 합니다: k={k}")
    perm = Xoshiro256(seed).permutation(n)
    base, extra = divmod(n, k)
    folds, start = [], 0
    for i in range(k):
        size = base + (1 if i < extra else 0)
        folds.append(np.sort(perm[start:start + size]))
        start += size
    return folds


def train_indices(n: int, val_idx: np.ndarray) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    mask[val_idx] = False
    return np.flatnonzero(mask)


def summarize(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()), float(v.std())


def format_mean_std(values, digits: int = 2) -> str:
    m, s = summarize(values)
    return f"{m:.{digits}f}±{s:.{digits}f}"


@dataclass
class BoxplotStats:
    median: float
    q1: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: list[float]

    def to_dict(self) -> dict:
        return {
            "median": self.median, "q1": self.q1, "q3": self.q3,
            "whisker_lo": self.whisker_lo, "whisker_hi": self.whisker_hi,
            "outliers": list(self.outliers),
        }


def boxplot_stats(values) -> BoxplotStats:
    """
    type-7(선형 보간) 사분위수와 1.5×IQR 울타리 기준 수염·이상치.

    수염은 울타리 안쪽의 가장 먼 데이터이며, 그런 값이 사분위수 안쪽에 없으면 사분위수로 둡니다.

    Raises:
        ConfigError: 빈 입력
    """
    x = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if x.size == 0:
        raise ConfigError("박스플롯 통계에는 값이 1개 이상 필요합니다")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75], method="linear")
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr

    inside_hi = x[x <= hi_fence]
    whisker_hi = q3 if inside_hi.size == 0 or inside_hi.max() < q3 else float(inside_hi.max())
    inside_lo = x[x >= lo_fence]
    whisker_lo = q1 if inside_lo.size == 0 or inside_lo.min() > q1 else float(inside_lo.min())
    outliers = [float(v) for v in x if v < lo_fence or v > hi_fence]
    return BoxplotStats(float(med), float(q1), float(q3), float(whisker_lo), float(whisker_hi), outliers)
