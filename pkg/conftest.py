"""
공용 pytest 픽스처

rng            : 고정 시드 Xoshiro256
tiny_data      : 12초 × 20fps 합성 데이터셋 (32×32 렌더, 주석 12장), 세션 단위 1회 생성
slow           : ARMCAST_SLOW=1 일 때만 실행하는 추세 재현 테스트 표시
"""

import os
import sys
from pathlib import Path

import pytest

_root = Path(__file__).resolve().parent
sys.path.insert(0, str(_root))

from modules.numeric.rng import Xoshiro256
from modules.synth.dataset import synth_dataset
from modules.synth.kinematics import ArmModel, Camera
from modules.synth.trajectory import SynthConfig

TINY_SIZE = 32


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: ARMCAST_SLOW=1 일 때만 실행되는 장시간 추세 테스트")


def pytest_collection_modifyitems(config, items):
    if os.getenv("ARMCAST_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="ARMCAST_SLOW=1 로 실행")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng() -> Xoshiro256:
    return Xoshiro256(1234)


@pytest.fixture(scope="session")
def tiny_data(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("tiny") / "data"
    config = SynthConfig(seed=3, duration_s=12.0, render_size=TINY_SIZE, segment_s=2.0)
    synth_dataset(config, ArmModel(), Camera.for_render(TINY_SIZE), out)
    return out
