"""
산출물 저장/로드

ARMF1 모델 컨테이너
  save_armf(path, header, tensors)  : magic `ARMF1` + 4바이트 LE 헤더 길이 + JSON 헤더 + LE float64 블록
  load_armf(path)                   : (header, tensors)
  tensors_hash(tensors)             : 텐서 바이트의 sha256 앞 16자 (백본-ELM 짝 확인용)

실행 결과
  write_result(path, context, mse, mae, seed, extra, wall_time_s) : 실행 1건의 결과 JSON
  read_json(path)                   : JSON 로드 (실패 시 ArtifactIOError)
  prepare_out_dir(path, force)      : 기존 산출물이 있으면 거부, force 면 비우고 다시 씀

병렬 실행
  parallel_map(fn, items, workers)  : 프로세스 풀 map, 입력 순서대로 결과 반환
"""

import hashlib
import json
import shutil
import struct
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from modules.errors import ArtifactIOError

MAGIC = b"ARMF1"


# ─── ARMF1 컨테이너 ───────────────────────────────────────────────────────────

def save_armf(path: str | Path, header: dict, tensors: dict[str, np.ndarray]) -> Path:
    """
    header 에 텐서 목록(이름·형태)을 덧붙여 저장합니다. 블록 순서는 이름 정렬 순서입니다.
    """
    path = Path(path)
    names = sorted(tensors)
    full_header = dict(header)
    full_header["tensors"] = [{"name": n, "shape": list(np.shape(tensors[n]))} for n in names]
    blob = json.dumps(full_header, sort_keys=True).encode("utf-8")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for n in names:
                fh.write(np.ascontiguousarray(tensors[n], dtype="<f8").tobytes())
    except OSError as e:
        raise ArtifactIOError(f"모델 저장 실패: {path}: {e}") from e
    return path


def load_armf(path: str | Path) -> tuple[dict, dict[str, np.ndarray]]:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise ArtifactIOError(f"모델 파일을 읽을 수 없습니다: {path}: {e}") from e
    if raw[:5] != MAGIC:
        raise ArtifactIOError(f"ARMF1 형식이 아닙니다: {path}")
    (hlen,) = struct.unpack("<I", raw[5:9])
    header = json.loads(raw[9:9 + hlen].decode("utf-8"))
    offset = 9 + hlen
    tensors: dict[str, np.ndarray] = {}
    for spec in header.get("tensors", []):
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if offset + nbytes > len(raw):
            raise ArtifactIOError(f"텐서 블록이 잘렸습니다: {spec['name']} ({path})")
        tensors[spec["name"]] = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes
    return header, tensors


def tensors_hash(tensors: dict[str, np.ndarray]) -> str:
    h = hashlib.sha256()
    for n in sorted(tensors):
        h.update(n.encode("utf-8"))
        h.update(np.ascontiguousarray(tensors[n], dtype="<f8").tobytes())
    return h.hexdigest()[:16]


# ─── 결과 JSON ────────────────────────────────────────────────────────────────

def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(f"JSON 저장 실패: {path}: {e}") from e
    return path


def read_json(path: str | Path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ArtifactIOError(f"JSON 읽기 실패: {path}: {e}") from e


def write_result(path: str | Path, context: dict, mse: float, mae: float, seed: int,
                 extra: dict | None = None, wall_time_s: float | None = None) -> Path:
    """실행 1건의 결과 `{context, mse, mae, seed[, wall_time_s], ...extra}` 를 기록합니다."""
    payload = {"context": context, "mse": float(mse), "mae": float(mae), "seed": int(seed)}
    if wall_time_s is not None:
        payload["wall_time_s"] = round(float(wall_time_s), 3)
    if extra:
        payload.update(extra)
    return write_json(path, payload)


def _clear_dir(path: Path) -> None:
    target, cwd = path.resolve(), Path.cwd().resolve()
    if target == cwd or target in cwd.parents:
        raise ArtifactIOError(f"작업 디렉토리(또는 그 상위)는 비울 수 없습니다: {path}")
    try:
        for child in path.iterdir():
            if child.is_dir() and not child.is_symlink():
                shutil.rmtree(child)
            else:
                child.unlink()
    except OSError as e:
        raise ArtifactIOError(f"기존 산출물 삭제 실패: {path}: {e}") from e


def prepare_out_dir(path: str | Path, force: bool = False) -> Path:
    """
    출력 디렉토리를 준비합니다. 비어 있지 않은 디렉토리는 force 없이 거부하고,
    force 면 이전 내용을 모두 지운 뒤 씁니다 (이전 실행의 파일이 섞이지 않음).

    Raises:
        ArtifactIOError: 덮어쓰기 거부, 작업 디렉토리 비우기 요청, 삭제 또는 생성 실패
    """
    path = Path(path)
    if path.exists() and any(path.iterdir()):
        if not force:
            raise ArtifactIOError(f"출력 디렉토리가 비어 있지 않습니다 (--force 로 덮어쓰기): {path}")
        _clear_dir(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactIOError(f"출력 디렉토리 생성 실패: {path}: {e}") from e
    return path


# ─── 병렬 실행 ────────────────────────────────────────────────────────────────

def parallel_map(fn: Callable, items: Iterable, workers: int = 1) -> list:
    """
    workers > 1 이면 프로세스 풀로, 아니면 순차로 실행합니다.
    결과는 입력 순서를 따르므로 병렬 여부와 무관하게 결정적입니다.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
