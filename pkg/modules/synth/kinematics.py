"""
팔 기구학 / 카메라 투영

ArmModel                         : 7링크 체인 (링크 길이, 관절 축, 베이스 자세)
Camera                           : 핀홀 카메라 (초점거리, 주점, 이미지 크기, 외부 변환)
forward_kinematics(arm, angles)  : 8개 키포인트의 3D 좌표 (m)
project(points3d, cam)           : 픽셀 좌표 (u, v)

키포인트 순서: 0 = 베이스 원점, k = k번째 링크 끝 (1..6 관절, 7 = 툴 끝).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from modules.errors import ConfigError, ShapeError

N_LINKS     = 7
N_KEYPOINTS = N_LINKS + 1

# UR-5 와 비슷한 비율의 기본 체인 (합 1.02 m)
DEFAULT_LINKS = (0.10, 0.32, 0.28, 0.10, 0.08, 0.08, 0.06)

# 로컬 프레임 기준 관절 축: 요(x) → 피치(z)×3 → 비틀림(x) → 피치(y) → 롤(x)
DEFAULT_AXES = (
    (1.0, 0.0, 0.0),
    (0.0, 0.0, 1.0),
    (0.0, 0.0, 1.0),
    (0.0, 0.0, 1.0),
    (1.0, 0.0, 0.0),
    (0.0, 1.0, 0.0),
    (1.0, 0.0, 0.0),
)


def _rigid(rotation: np.ndarray, translation) -> np.ndarray:
    T = np.eye(4)
    T[:3, :3] = rotation
    T[:3, 3] = translation
    return T


def _default_base() -> np.ndarray:
    # 로컬 x축(링크 방향)이 월드 −y(이미지 위쪽)를 향하도록 z축 −90° 회전
    return _rigid(Rotation.from_rotvec([0.0, 0.0, -np.pi / 2]).as_matrix(), [0.0, 0.0, 0.0])


@dataclass
class ArmModel:
    link_lengths: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_LINKS))
    joint_axes: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_AXES))
    base_pose: np.ndarray = field(default_factory=_default_base)

    def __post_init__(self):
        self.link_lengths = np.asarray(self.link_lengths, dtype=np.float64)
        self.joint_axes = np.asarray(self.joint_axes, dtype=np.float64)
        self.base_pose = np.asarray(self.base_pose, dtype=np.float64)
        if self.link_lengths.shape != (N_LINKS,):
            raise ConfigError(f"링크 길이는 {N_LINKS}개여야 합니다: {self.link_lengths.shape}")
        if np.any(self.link_lengths <= 0):
            raise ConfigError(f"링크 길이는 양수여야 합니다: {self.link_lengths.tolist()}")
        if self.joint_axes.shape != (N_LINKS, 3):
            raise ConfigError(f"관절 축은 {N_LINKS}×3 이어야 합니다: {self.joint_axes.shape}")
        norms = np.linalg.norm(self.joint_axes, axis=1)
        if np.any(norms == 0):
            raise ConfigError("관절 축에 영벡터가 있습니다")
        self.joint_axes = self.joint_axes / norms[:, None]
        if self.base_pose.shape != (4, 4):
            raise ConfigError(f"base_pose 는 4×4 강체 변환이어야 합니다: {self.base_pose.shape}")

    def to_dict(self) -> dict:
        return {
            "link_lengths": self.link_lengths.tolist(),
            "joint_axes": self.joint_axes.tolist(),
            "base_pose": self.base_pose.tolist(),
        }


@dataclass
class Camera:
    focal: float = 100.0
    principal_point: tuple[float, float] = (48.0, 48.0)
    image_size: tuple[int, int] = (96, 96)
    extrinsic: np.ndarray = field(default_factory=lambda: _rigid(np.eye(3), [0.0, 0.3, 2.0]))

    def __post_init__(self):
        self.extrinsic = np.asarray(self.extrinsic, dtype=np.float64)
        w, h = self.image_size
        cx, cy = self.principal_point
        if self.focal <= 0:
            raise ConfigError(f"focal 은 양수여야 합니다: {self.focal}")
        if not (0 <= cx < w and 0 <= cy < h):
            raise ConfigError(f"주점 ({cx}, {cy}) 이 이미지 {w}×{h} 밖에 있습니다")

    @classmethod
    def for_render(cls, size: int) -> "Camera":
        """렌더 크기에 맞춘 기본 카메라 (96 px 기준 값을 비례 조정)."""
        scale = size / 96.0
        return cls(focal=100.0 * scale, principal_point=(size / 2.0, size / 2.0), image_size=(size, size))

    def to_dict(self) -> dict:
        return {
            "focal": self.focal,
            "principal_point": list(self.principal_point),
            "image_size": list(self.image_size),
            "extrinsic": self.extrinsic.tolist(),
        }


def forward_kinematics(arm: ArmModel, angles) -> np.ndarray:
    """
    관절각(rad) 7개 → 키포인트 8개의 월드 좌표 (8×3, m).

    point 0 은 베이스 원점이고, point k 는 point k−1 에서 누적 회전을 적용한 링크 k
    (로컬 x 방향, 길이 l_k) 만큼 나아간 위치입니다.
    """
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (N_LINKS,):
        raise ShapeError(f"관절각은 {N_LINKS}개여야 합니다: {angles.shape}")
    if not np.all(np.isfinite(angles)):
        raise ConfigError("관절각에 비유한 값이 있습니다")

    rotations = Rotation.from_rotvec(arm.joint_axes * angles[:, None]).as_matrix()
    pts = np.zeros((N_KEYPOINTS, 3))
    R = np.eye(3)
    for k in range(N_LINKS):
        R = R @ rotations[k]
        pts[k + 1] = pts[k] + R[:, 0] * arm.link_lengths[k]

    Rb, tb = arm.base_pose[:3, :3], arm.base_pose[:3, 3]
    return pts @ Rb.T + tb


def project(points3d: np.ndarray, cam: Camera) -> np.ndarray:
    """
    월드 좌표 (K×3) → 픽셀 좌표 (K×2). u = cx + f·X/Z, v = cy + f·Y/Z.

    Raises:
        ConfigError: 카메라 앞(Z > 0)에 있지 않은 점이 있는 경우
    """
    points3d = np.atleast_2d(np.asarray(points3d, dtype=np.float64))
    if points3d.shape[-1] != 3:
        raise ShapeError(f"3D 점 배열은 K×3 이어야 합니다: {points3d.shape}")
    R, t = cam.extrinsic[:3, :3], cam.extrinsic[:3, 3]
    pc = points3d @ R.T + t
    if np.any(pc[:, 2] <= 0):
        bad = np.flatnonzero(pc[:, 2] <= 0).tolist()
        raise ConfigError(f"카메라 뒤쪽(깊이 ≤ 0) 점이 있습니다: index={bad}")
    cx, cy = cam.principal_point
    u = cx + cam.focal * pc[:, 0] / pc[:, 2]
    v = cy + cam.focal * pc[:, 1] / pc[:, 2]
    return np.stack([u, v], axis=1)
