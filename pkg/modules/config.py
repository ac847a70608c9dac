"""
실행 설정 (RunConfig)

DEFAULTS                                : 최상위 공통 키 + 서브커맨드별 섹션 기본값
load_config(path)                       : JSON 설정 파일 로드, 모르는 키 거부
resolve(config, section, overrides)     : DEFAULTS ← 파일 공통 ← 파일 섹션 ← CLI 플래그
resolve_seed(value)                     : 플래그/파일 > 환경변수 ARMCAST_SEED (.env 포함) > 0
write_resolved(out_dir, section, cfg)   : 산출물 디렉토리에 resolved_config.json 기록

설정 파일 예:
    {
      "seed": 7,
      "workers": 4,
      "synth": {"duration_s": 1150, "noise_sigma": 1.0},
      "grid_search": {"epochs": 50, "cells": ["lstm", "gru"]}
    }
"""

import copy
import json
import os
from pathlib import Path

from dotenv import load_dotenv

from modules.artifact import write_json
from modules.errors import ArtifactIOError, ConfigError

SEED_ENV = "ARMCAST_SEED"

_FORECAST_HYPER = {
    "epochs": 500,          # 에폭 수
    "lr": 1e-4,             # Adam 학습률
    "batch": 256,           # 미니배치 (큰 실험은 4096)
    "hidden": 64,           # LSTM/GRU 은닉 크기
    "clip": 5.0,            # 전역 기울기 노름 상한
    "val_fraction": 0.2,    # 시간순 분할의 검증 비율
    "stride": 1,            # 창 간격 (프레임)
    "log_every": 50,        # 에폭 로그 간격
    "purge": True,          # 학습/검증 경계에 걸친 창 제거
}

DEFAULTS: dict = {
    "seed": None,               # None → ARMCAST_SEED → 0
    "workers": None,            # None → 논리 코어 수
    "record_timing": True,      # 결과 JSON 에 wall_time_s 기록 (바이트 비교 시 false)
    "log_level": "INFO",

    "synth": {
        "out": "data",
        "fps": 20.0,
        "duration_s": 600.0,
        "script": ["reach_to_rack", "cable_exchange", "idle"],
        "segment_s": 5.0,           # 프리미티브 한 구간 길이 (초)
        "noise_sigma": 1.0,         # 주석 노이즈 σ (px)
        "render_size": 96,
        "subsample_per_s": 1.0,     # 초당 주석 프레임 수
        "jitter": 0.01,             # idle 떨림 진폭 (rad)
        "render_all": True,         # 전 프레임 렌더 (자동 주석용)
        "link_lengths": None,       # None → 기본 7링크 길이 (m)
    },
    "train_pose": {
        "data": "data",
        "out": None,                # None → results/pose 또는 results/pose_plain
        "csv": "poses_annotated.csv",
        "variant": "scconv",        # scconv | plain
        "epochs": 500,
        "lr": 1e-4,
        "batch": 8,
        "folds": 5,
        "log_every": 50,
        "final_fit": True,          # 전체 주석으로 backbone.armf 학습
    },
    "elm_sweep": {
        "data": "data",
        "backbone": "results/pose/backbone.armf",
        "out": "results/sweep",
        "csv": "poses_annotated.csv",
        "kernels": ["linear", "tanh", "rbf", "rbf_l2"],
        "n_min": 100,
        "n_max": 1000,
        "step": 50,
        "folds": 5,
        "lam": 1e-3,                # rbf_l2 릿지 계수
        "tolerance": 0.05,          # lightest_within 허용 비율
    },
    "elm_train": {
        "data": "data",
        "pose_dir": "results/pose",  # fold_{k}.armf, folds.json, backbone.armf
        "out": "results/elm",
        "csv": "poses_annotated.csv",
        "kernels": ["linear", "tanh", "rbf", "rbf_l2"],
        "n_hidden": 1000,
        "lam": 1e-3,
    },
    "annotate": {
        "data": "data",
        "backbone": "results/pose/backbone.armf",
        "elm": "results/elm/elm_rbf_l2.armf",
        "out": "results/annotated",
    },
    "train_forecast": {
        "series": "results/annotated/poses_full.csv",
        "out": "results/forecast",
        "cell": "lstm",
        "n": 10,
        "f": 5,
        **_FORECAST_HYPER,
    },
    "grid_search": {
        "series": "results/annotated/poses_full.csv",
        "out": "results/grid",
        "cells": ["lstm", "gru"],
        "past": [10, 20, 30, 45, 60],
        "future": [1, 5, 15, 30, 60, 90, 120],
        **_FORECAST_HYPER,
    },
    "predict": {
        "model": "results/forecast/model.armf",
        "series": "results/annotated/poses_full.csv",
        "out": "results/predictions",
        "stride": 1,
    },
    "report": {
        "results": "results",
        "out": "results/report",
    },
}

COMMON_KEYS = ("seed", "workers", "record_timing", "log_level")
SECTIONS = tuple(k for k in DEFAULTS if k not in COMMON_KEYS)


def load_config(path: str | Path | None) -> dict:
    """
    Raises:
        ArtifactIOError: 파일을 읽을 수 없음
        ConfigError    : JSON 오류, 모르는 키, 섹션이 객체가 아님
    """
    if path is None:
        return {}
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(f"설정 파일을 읽을 수 없습니다: {path}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"설정 파일 JSON 오류: {path}: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"설정 파일 최상위는 객체여야 합니다: {path}")

    unknown = sorted(k for k in doc if k not in DEFAULTS)
    if unknown:
        raise ConfigError(f"알 수 없는 설정 키: {unknown} (가능: {sorted(DEFAULTS)})")
    for section in SECTIONS:
        if section not in doc:
            continue
        if not isinstance(doc[section], dict):
            raise ConfigError(f"설정 섹션 '{section}' 은 객체여야 합니다")
        bad = sorted(k for k in doc[section] if k not in DEFAULTS[section])
        if bad:
            raise ConfigError(f"'{section}' 섹션의 알 수 없는 키: {bad} (가능: {sorted(DEFAULTS[section])})")
    return doc


def resolve_seed(value) -> int:
    if value is not None:
        return int(value)
    load_dotenv()
    env = os.getenv(SEED_ENV)
    if env is None or env.strip() == "":
        return 0
    try:
        return int(env)
    except ValueError as e:
        raise ConfigError(f"{SEED_ENV} 는 정수여야 합니다: {env!r}") from e


def resolve(config: dict, section: str, overrides: dict | None = None) -> dict:
    """
    한 서브커맨드의 최종 설정. overrides 값이 None 인 항목은 무시합니다.

    Raises:
        ConfigError: 모르는 섹션 또는 모르는 override 키
    """
    if section not in SECTIONS:
        raise ConfigError(f"알 수 없는 설정 섹션: {section}")
    resolved = {k: DEFAULTS[k] for k in COMMON_KEYS}
    resolved.update(copy.deepcopy(DEFAULTS[section]))
    resolved.update({k: config[k] for k in COMMON_KEYS if k in config})
    resolved.update(copy.deepcopy(config.get(section, {})))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in resolved:
            raise ConfigError(f"'{section}' 에 없는 설정 키: {key}")
        resolved[key] = value
    resolved["seed"] = resolve_seed(resolved["seed"])
    if resolved["workers"] is None:
        resolved["workers"] = os.cpu_count() or 1
    if int(resolved["workers"]) < 1:
        raise ConfigError(f"workers 는 1 이상이어야 합니다: {resolved['workers']}")
    return resolved


def write_resolved(out_dir: str | Path, section: str, resolved: dict) -> Path:
    return write_json(Path(out_dir) / "resolved_config.json", {"section": section, **resolved})
