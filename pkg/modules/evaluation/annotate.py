"""
자동 주석: 학습된 백본 + ELM 으로 전체 프레임 시퀀스에 포즈를 붙입니다.

auto_annotate(backbone, elm, frames_dir, out_csv, manifest, batch) : PoseFrame 목록 (poses_full.csv 형식으로 저장)
list_frames(frames_dir)                                           : (frame_ids, 경로) frame_id 오름차순
"""

import logging
import re
from pathlib import Path

import numpy as np

from modules.errors import ArtifactIOError
from modules.logs import log_event
from modules.pose.backbone import BackboneModel
from modules.pose.elm import ElmModel, refine_poses
from modules.synth.dataset import PoseFrame, read_frame, write_pose_csv

logger = logging.getLogger(__name__)

_FRAME_RE = re.compile(r"frame_(\d+)\.pgm$")


def list_frames(frames_dir: str | Path) -> tuple[np.ndarray, list[Path]]:
    frames_dir = Path(frames_dir)
    if not frames_dir.is_dir():
        raise ArtifactIOError(f"프레임 디렉토리가 없습니다: {frames_dir}")
    found = []
    for p in frames_dir.iterdir():
        m = _FRAME_RE.search(p.name)
        if m:
            found.append((int(m.group(1)), p))
    found.sort()
    return np.array([i for i, _ in found], dtype=np.int64), [p for _, p in found]


def auto_annotate(backbone: BackboneModel, elm: ElmModel, frames_dir: str | Path, out_csv: str | Path,
                  manifest: dict | None = None, batch: int = 512) -> list[PoseFrame]:
    """
    Args:
        backbone  : 학습된 백본 (ELM 이 학습될 때 쓴 것과 같아야 함)
        elm       : 전체 데이터로 학습한 ELM
        frames_dir: frame_%06d.pgm 디렉토리
        out_csv   : 출력 CSV (frame_id,x0,y0,…,x7,y7)
        manifest  : 주어지면 n_images 와 프레임 파일 수를 대조
        batch     : 한 번에 읽어 처리할 프레임 수

    Returns:
        frame_id 순 PoseFrame 목록

    Raises:
        ArtifactIOError: 프레임 없음, 읽기 실패, 매니페스트 개수 불일치
    """
    ids, paths = list_frames(frames_dir)
    if not paths:
        raise ArtifactIOError(f"프레임 파일이 없습니다: {frames_dir}")
    if manifest is not None and int(manifest.get("n_images", len(paths))) != len(paths):
        raise ArtifactIOError(
            f"프레임 수 {len(paths)} 가 매니페스트 n_images={manifest['n_images']} 와 다릅니다: {frames_dir}"
        )

    poses: list[PoseFrame] = []
    for s in range(0, len(paths), batch):
        images = np.stack([read_frame(p) for p in paths[s:s + batch]])
        poses.extend(refine_poses(backbone, elm, images, ids[s:s + batch]))
        log_event(logger, "annotate.progress", logging.DEBUG, done=len(poses), total=len(paths))

    write_pose_csv(out_csv, ids, np.stack([p.coords for p in poses]))
    log_event(logger, "annotate.done", frames=len(poses), out=str(out_csv))
    return poses
