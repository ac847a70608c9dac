"""
관절각 궤적 생성

SynthConfig                   : 합성 데이터 설정 (시드, fps, 길이, 스크립트, 노이즈, 렌더 크기, 서브샘플)
gen_trajectory(config, arm)   : (프레임 수 × 7) 관절각 시계열

동작 프리미티브 (구간 길이 segment_s, 스크립트를 순환하며 duration_s 를 채움)
  reach_to_rack  : 현재 자세 → 랙 근처 목표 자세로 코사인 이징 이동
  cable_exchange : 현재 자세 중심으로 sin² 진동 (케이블 교체 동작)
  idle           : 현재 자세 유지 + 양 끝에서 0이 되는 미세 떨림

모든 프리미티브는 구간 양 끝에서 속도가 0이므로 이어 붙여도 C¹ 연속입니다.
"""

from dataclasses import dataclass, field

import numpy as np

from modules.errors import ConfigError
from modules.numeric.rng import Xoshiro256
from modules.synth.kinematics import N_LINKS, ArmModel

PRIMITIVES = ("reach_to_rack", "cable_exchange", "idle")

HOME_POSE = np.array([0.0, 0.35, -0.7, 0.35, 0.0, 0.0, 0.0])
RACK_POSE = np.array([0.3, 0.9, -0.9, -0.2, 0.4, 0.3, 0.0])


@dataclass
class SynthConfig:
    seed: int = 0
    fps: float = 20.0
    duration_s: float = 60.0
    script: list[str] = field(default_factory=lambda: list(PRIMITIVES))
    noise_sigma: float = 1.0
    render_size: int = 96
    subsample_per_s: float = 1.0
    segment_s: float = 5.0
    jitter: float = 0.01
    render_all: bool = True

    def __post_init__(self):
        if self.fps <= 0:
            raise ConfigError(f"fps 는 양수여야 합니다: {self.fps}")
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma 는 0 이상이어야 합니다: {self.noise_sigma}")
        if self.render_size < 32:
            raise ConfigError(f"render_size 는 32 이상이어야 합니다: {self.render_size}")
        if self.subsample_per_s <= 0 or self.subsample_per_s > self.fps:
            raise ConfigError(f"subsample_per_s 는 (0, fps] 범위여야 합니다: {self.subsample_per_s}")
        if self.segment_s <= 0:
            raise ConfigError(f"segment_s 는 양수여야 합니다: {self.segment_s}")
        unknown = [p for p in self.script if p not in PRIMITIVES]
        if unknown:
            raise ConfigError(f"알 수 없는 프리미티브: {unknown} (가능: {list(PRIMITIVES)})")

    @property
    def n_frames(self) -> int:
        return int(round(self.duration_s * self.fps))

    @property
    def subsample_step(self) -> int:
        """주석 프레임 간격 (프레임 단위)."""
        return max(1, int(round(self.fps / self.subsample_per_s)))


# ─── 프리미티브 ───────────────────────────────────────────────────────────────

def _cosine_ease(x: np.ndarray) -> np.ndarray:
    """[0,1] → [0,1], 양 끝 기울기 0."""
    return 0.5 * (1.0 - np.cos(np.pi * np.clip(x, 0.0, 1.0)))


def _reach(start: np.ndarray, tau: np.ndarray, rng: Xoshiro256, config: SynthConfig) -> np.ndarray:
    target = RACK_POSE + rng.uniform(N_LINKS, -0.25, 0.25)
    s = _cosine_ease(tau)[:, None]
    return start + (target - start) * s


def _cable_exchange(start: np.ndarray, tau: np.ndarray, rng: Xoshiro256, config: SynthConfig) -> np.ndarray:
    direction = rng.uniform(N_LINKS, -0.3, 0.3)
    cycles = 2 + int(rng.uniform((), 0.0, 2.0))  # 구간당 2~3회 왕복
    wave = np.sin(np.pi * cycles * tau) ** 2
    return start + wave[:, None] * direction


def _idle(start: np.ndarray, tau: np.ndarray, rng: Xoshiro256, config: SynthConfig) -> np.ndarray:
    amp = config.jitter * rng.uniform(N_LINKS, -1.0, 1.0)
    freq = 1 + int(rng.uniform((), 0.0, 8.0))
    envelope = np.sin(2.0 * np.pi * freq * tau) * np.sin(np.pi * tau)
    return start + envelope[:, None] * amp


_DISPATCH = {
    "reach_to_rack": _reach,
    "cable_exchange": _cable_exchange,
    "idle": _idle,
}


def gen_trajectory(config: SynthConfig, arm: ArmModel | None = None) -> np.ndarray:
    """
    스크립트된 프리미티브를 이어 붙인 관절각 시계열.

    Args:
        config: SynthConfig (duration_s > 0, script 비어 있지 않아야 함)
        arm   : 팔 모델 (관절각 공간만 다루므로 궤적 자체에는 쓰이지 않음)

    Returns:
        (round(duration_s·fps), 7) float64 배열, 라디안

    Raises:
        ConfigError: duration_s ≤ 0 또는 빈 스크립트
    """
    if config.duration_s <= 0:
        raise ConfigError(f"duration_s 는 양수여야 합니다: {config.duration_s}")
    if not config.script:
        raise ConfigError("동작 스크립트가 비어 있습니다")
    n = config.n_frames
    rng = Xoshiro256(config.seed)
    seg_frames = max(1, int(round(config.segment_s * config.fps)))
    angles = np.empty((n, N_LINKS))
    pose = HOME_POSE.copy()
    start, k = 0, 0
    while start < n:
        stop = min(n, start + seg_frames)
        tau = np.arange(seg_frames + 1, dtype=np.float64) / seg_frames
        name = config.script[k % len(config.script)]
        segment = _DISPATCH[name](pose, tau, rng, config)
        angles[start:stop] = segment[: stop - start]
        pose = segment[-1]  # tau = 1: 다음 구간의 시작 자세
        start, k = stop, k + 1
    return angles
