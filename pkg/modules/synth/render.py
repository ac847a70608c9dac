"""
프레임 렌더링 (8비트 그레이스케일)

render_background(size, seed) : 시드 고정 저주파 배경 (작은 난수 격자를 bicubic 확대)
render_frame(pose, size, seed): 배경 위에 관절 사이 안티앨리어싱 선분 + 관절 원판

같은 (pose, size, seed) 는 항상 같은 바이트 이미지를 만듭니다.
"""

from functools import lru_cache

import cv2
import numpy as np

from modules.errors import ConfigError
from modules.numeric.rng import Xoshiro256

JOINT_INTENSITY = 255
LINK_INTENSITY  = 170
CLUTTER_MAX     = 60
JOINT_RADIUS_PX = 2.0
LINK_WIDTH_PX   = 2

_SHIFT = 4                 # cv2 서브픽셀 고정소수점 비트 수
_SCALE = 1 << _SHIFT
_CLUTTER_GRID = 6


@lru_cache(maxsize=8)
def _background(size: int, seed: int) -> bytes:
    rng = Xoshiro256(seed)
    coarse = rng.uniform((_CLUTTER_GRID, _CLUTTER_GRID), 0.0, float(CLUTTER_MAX)).astype(np.float32)
    smooth = cv2.resize(coarse, (size, size), interpolation=cv2.INTER_CUBIC)
    return np.clip(np.rint(smooth), 0, CLUTTER_MAX).astype(np.uint8).tobytes()


def render_background(size: int, seed: int = 0) -> np.ndarray:
    if size < 32:
        raise ConfigError(f"렌더 크기는 32 이상이어야 합니다: {size}")
    return np.frombuffer(_background(int(size), int(seed)), dtype=np.uint8).reshape(size, size).copy()


def _fixed_point(xy: np.ndarray, size: int) -> tuple[int, int]:
    # 화면 밖 좌표는 넓은 상자로 잘라 정수 오버플로를 막고, 실제 클리핑은 cv2 에 맡김
    lim = 4.0 * size
    x, y = np.clip(xy, -lim, lim)
    return int(round(x * _SCALE)), int(round(y * _SCALE))


def render_frame(pose, size: int = 96, seed: int = 0) -> np.ndarray:
    """
    PoseFrame(또는 16개 좌표) → size×size uint8 이미지.

    Args:
        pose: PoseFrame 또는 x0,y0,…,x7,y7 배열 (픽셀)
        size: 정사각 렌더 크기 (≥ 32)
        seed: 배경 시드

    Returns:
        (size, size) uint8 배열
    """
    coords = np.asarray(getattr(pose, "coords", pose), dtype=np.float64).reshape(-1, 2)
    img = render_background(size, seed)
    pts = [_fixed_point(p, size) for p in coords]
    for a, b in zip(pts[:-1], pts[1:]):
        cv2.line(img, a, b, LINK_INTENSITY, LINK_WIDTH_PX, cv2.LINE_AA, _SHIFT)
    radius = int(round(JOINT_RADIUS_PX * _SCALE))
    for p in pts:
        cv2.circle(img, p, radius, JOINT_INTENSITY, -1, cv2.LINE_AA, _SHIFT)
    return img
