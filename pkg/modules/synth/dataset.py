"""
합성 데이터셋 생성 / 입출력

PoseFrame                               : 한 프레임의 키포인트 8개 (16개 좌표)
POSE_COLUMNS                            : frame_id,x0,y0,…,x7,y7
write_pose_csv(path, frame_ids, coords) : 소수 6자리, LF, UTF-8
read_pose_csv(path)                     : (frame_ids, coords N×16)
synth_dataset(config, arm, cam, out_dir, force, workers) : 매니페스트 dict
load_annotated(data_dir)                : (frame_ids, images, targets), frame_id 로 정렬·정합
import_via(json_path, out_csv)          : VGG Image Annotator JSON → poses_annotated.csv 형식

출력 디렉토리 구성:
  poses_full.csv          : 전 프레임 정답 투영 (노이즈 없음)
  poses_annotated.csv     : 1초 1프레임 서브샘플 + 가우시안 주석 노이즈(σ px)
  poses_annotated_gt.csv  : 위 서브샘플의 노이즈 없는 정답
  frames/frame_%06d.pgm   : 렌더 프레임 (P5)
  manifest.json           : 시드, fps, 개수, 노이즈, 렌더 크기, 키포인트 순서
"""

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import cv2
import numpy as np
import pandas as pd

from modules.artifact import prepare_out_dir, write_json
from modules.errors import ArtifactIOError, ConfigError, ShapeError
from modules.logs import log_event
from modules.numeric.rng import Xoshiro256, derive_seed
from modules.synth.kinematics import N_KEYPOINTS, ArmModel, Camera, forward_kinematics, project
from modules.synth.render import render_frame
from modules.synth.trajectory import SynthConfig, gen_trajectory

logger = logging.getLogger(__name__)

POSE_COLUMNS = ["frame_id"] + [f"{a}{k}" for k in range(N_KEYPOINTS) for a in ("x", "y")]
FRAME_PATTERN = "frame_{:06d}.pgm"

KEYPOINT_ORDER_NOTE = (
    "8 keypoints ordered base→tool: 0 = base origin, 1..6 = joint positions at the end of "
    "links 1..6, 7 = tool tip; coords are x0,y0,...,x7,y7 in render pixels"
)
FPS_NOTE = "20 FPS adopted (recording description); camera table lists 21 fps"


@dataclass(frozen=True)
class PoseFrame:
    frame_id: int
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64).reshape(-1)
        if coords.shape != (2 * N_KEYPOINTS,):
            raise ShapeError(f"PoseFrame 좌표는 {2 * N_KEYPOINTS}개여야 합니다: {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ConfigError(f"PoseFrame {self.frame_id}: 비유한 좌표")
        object.__setattr__(self, "coords", coords)

    def keypoints(self) -> np.ndarray:
        """(8, 2) 형태."""
        return self.coords.reshape(N_KEYPOINTS, 2)


# ─── CSV 입출력 ───────────────────────────────────────────────────────────────

def write_pose_csv(path: str | Path, frame_ids, coords: np.ndarray) -> Path:
    path = Path(path)
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2 * N_KEYPOINTS)
    df = pd.DataFrame(coords, columns=POSE_COLUMNS[1:])
    df.insert(0, "frame_id", np.asarray(frame_ids, dtype=np.int64))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        df.to_csv(path, index=False, float_format="%.6f", lineterminator="\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(f"CSV 저장 실패: {path}: {e}") from e
    return path


def read_pose_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    path = Path(path)
    if not path.exists():
        raise ArtifactIOError(f"포즈 CSV 가 없습니다: {path}")
    try:
        df = pd.read_csv(path)
    except Exception as e:
        raise ArtifactIOError(f"포즈 CSV 읽기 오류: {path}: {e}") from e
    missing = [c for c in POSE_COLUMNS if c not in df.columns]
    if missing:
        raise ArtifactIOError(f"포즈 CSV 컬럼 누락 {missing}: {path}")
    return df["frame_id"].to_numpy(np.int64), df[POSE_COLUMNS[1:]].to_numpy(np.float64)


def frames_to_poses(frame_ids, coords) -> list[PoseFrame]:
    return [PoseFrame(int(i), c) for i, c in zip(frame_ids, coords)]


# ─── 이미지 입출력 ────────────────────────────────────────────────────────────

def write_frame(path: Path, image: np.ndarray) -> None:
    # .pgm 확장자 → cv2 가 바이너리 P5 로 기록
    if not cv2.imwrite(str(path), image):
        raise ArtifactIOError(f"프레임 저장 실패: {path}")


def read_frame(path: Path) -> np.ndarray:
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise ArtifactIOError(f"프레임을 읽을 수 없습니다: {path}")
    return img


# ─── 데이터셋 생성 ────────────────────────────────────────────────────────────

def ground_truth_poses(config: SynthConfig, arm: ArmModel, cam: Camera) -> np.ndarray:
    """전 프레임 정답 키포인트 (프레임 수 × 16)."""
    angles = gen_trajectory(config, arm)
    coords = np.empty((angles.shape[0], 2 * N_KEYPOINTS))
    for i, q in enumerate(angles):
        coords[i] = project(forward_kinematics(arm, q), cam).reshape(-1)
    return coords


def synth_dataset(config: SynthConfig, arm: ArmModel, cam: Camera, out_dir: str | Path,
                  force: bool = False, workers: int = 1) -> dict:
    """
    합성 데이터셋 전체를 out_dir 에 기록합니다.

    Args:
        config : SynthConfig
        arm    : 팔 모델
        cam    : 카메라 (image_size 는 render_size 와 같아야 함)
        out_dir: 출력 디렉토리
        force  : 비어 있지 않은 디렉토리 덮어쓰기 허용
        workers: 프레임 렌더링 스레드 수

    Returns:
        manifest.json 과 같은 내용의 dict

    Raises:
        ConfigError    : 카메라/렌더 크기 불일치
        ArtifactIOError: 덮어쓰기 거부 또는 쓰기 실패
    """
    if tuple(cam.image_size) != (config.render_size, config.render_size):
        raise ConfigError(
            f"카메라 이미지 크기 {tuple(cam.image_size)} 와 렌더 크기 {config.render_size} 가 다릅니다"
        )
    out = prepare_out_dir(out_dir, force)
    log_event(logger, "synth.start", out=str(out), frames=config.n_frames, seed=config.seed)

    gt = ground_truth_poses(config, arm, cam)
    n = gt.shape[0]
    frame_ids = np.arange(n)
    write_pose_csv(out / "poses_full.csv", frame_ids, gt)

    ann_ids = frame_ids[:: config.subsample_step]
    noise_rng = Xoshiro256(derive_seed(config.seed, 1))
    noise = noise_rng.normal((ann_ids.size, 2 * N_KEYPOINTS), 0.0, config.noise_sigma) \
        if config.noise_sigma > 0 else np.zeros((ann_ids.size, 2 * N_KEYPOINTS))
    write_pose_csv(out / "poses_annotated.csv", ann_ids, gt[ann_ids] + noise)
    write_pose_csv(out / "poses_annotated_gt.csv", ann_ids, gt[ann_ids])

    frames_dir = out / "frames"
    frames_dir.mkdir(exist_ok=True)
    render_ids = frame_ids if config.render_all else ann_ids
    bg_seed = derive_seed(config.seed, 2)

    def _render_chunk(ids: np.ndarray) -> int:
        for i in ids:
            img = render_frame(gt[i], config.render_size, bg_seed)
            write_frame(frames_dir / FRAME_PATTERN.format(int(i)), img)
        return len(ids)

    chunks = np.array_split(render_ids, max(1, min(workers, len(render_ids))))
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        n_images = sum(pool.map(_render_chunk, chunks))

    manifest = {
        "seed": config.seed,
        "fps": config.fps,
        "fps_note": FPS_NOTE,
        "duration_s": config.duration_s,
        "n_frames": int(n),
        "n_annotated": int(ann_ids.size),
        "n_images": int(n_images),
        "render_all": config.render_all,
        "subsample_step": config.subsample_step,
        "noise_sigma": config.noise_sigma,
        "render_size": config.render_size,
        "background_seed": bg_seed,
        "script": list(config.script),
        "segment_s": config.segment_s,
        "keypoint_order": KEYPOINT_ORDER_NOTE,
        "arm": arm.to_dict(),
        "camera": cam.to_dict(),
    }
    write_json(out / "manifest.json", manifest)
    log_event(logger, "synth.done", frames=n, annotated=int(ann_ids.size), images=n_images)
    return manifest


def load_manifest(data_dir: str | Path) -> dict:
    path = Path(data_dir) / "manifest.json"
    if not path.exists():
        raise ArtifactIOError(f"manifest.json 이 없습니다: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_annotated(data_dir: str | Path, csv_name: str = "poses_annotated.csv"
                   ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    주석 CSV 와 프레임 이미지를 frame_id 기준으로 맞춰 읽습니다.

    Returns:
        (frame_ids (N,), images (N,H,W) uint8, targets (N,16))

    Raises:
        ArtifactIOError: CSV 또는 프레임 파일 누락
    """
    data_dir = Path(data_dir)
    ids, coords = read_pose_csv(data_dir / csv_name)
    order = np.argsort(ids, kind="stable")
    ids, coords = ids[order], coords[order]
    frames_dir = data_dir / "frames"
    missing = [int(i) for i in ids if not (frames_dir / FRAME_PATTERN.format(int(i))).exists()]
    if missing:
        raise ArtifactIOError(f"프레임 누락 {len(missing)}개 (예: {missing[:5]}) in {frames_dir}")
    images = np.stack([read_frame(frames_dir / FRAME_PATTERN.format(int(i))) for i in ids])
    return ids, images, coords


# ─── VIA 가져오기 ─────────────────────────────────────────────────────────────

def _via_entries(doc: dict) -> list[dict]:
    meta = doc.get("_via_img_metadata", doc)
    return [v for v in meta.values() if isinstance(v, dict) and "regions" in v]


def import_via(json_path: str | Path, out_csv: str | Path) -> pd.DataFrame:
    """
    VGG Image Annotator 의 점(point) 주석을 poses_annotated.csv 형식으로 변환합니다.

    - 영역 순서(region index)대로 키포인트 0..7 에 대응
    - frame_id 는 파일명 숫자에서 추출 (없으면 등장 순서)
    - 점이 정확히 8개가 아닌 이미지는 경고 후 제외
    """
    json_path = Path(json_path)
    try:
        doc = json.loads(json_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactIOError(f"VIA JSON 읽기 실패: {json_path}: {e}") from e

    ids, rows = [], []
    for k, entry in enumerate(_via_entries(doc)):
        fname = str(entry.get("filename", ""))
        points = [r["shape_attributes"] for r in entry["regions"]
                  if r.get("shape_attributes", {}).get("name") == "point"]
        if len(points) != N_KEYPOINTS:
            log_event(logger, "via.skip", logging.WARNING, file=fname, points=len(points))
            continue
        digits = re.findall(r"\d+", fname)
        ids.append(int(digits[-1]) if digits else k)
        rows.append([v for p in points for v in (float(p["cx"]), float(p["cy"]))])

    if not rows:
        raise ConfigError(f"유효한 VIA 주석(점 {N_KEYPOINTS}개)이 없습니다: {json_path}")
    order = np.argsort(ids, kind="stable")
    frame_ids = np.asarray(ids)[order]
    coords = np.asarray(rows)[order]
    write_pose_csv(out_csv, frame_ids, coords)
    log_event(logger, "via.import", images=len(rows), out=str(out_csv))
    df = pd.DataFrame(coords, columns=POSE_COLUMNS[1:])
    df.insert(0, "frame_id", frame_ids)
    return df
