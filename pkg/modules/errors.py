"""
예외 계층

ArmcastError     : 모든 예외의 루트 (exit 1)
  ConfigError    : 설정·하이퍼파라미터·전제조건 위반 (exit 2)
    ShapeError   : 행렬/텐서 차원 불일치 (exit 2)
  ArtifactIOError: 파일 입출력 실패, 덮어쓰기 거부, 매니페스트 불일치 (exit 3)
  NumericalError : 비유한(NaN/Inf) 손실·기울기·해 (exit 4)

라이브러리 코드는 예외만 던지고, 종료 코드 변환은 main.py 에서 처리합니다.
"""


class ArmcastError(Exception):
    exit_code = 1


class ConfigError(ArmcastError, ValueError):
    exit_code = 2


class ShapeError(ConfigError):
    exit_code = 2


class ArtifactIOError(ArmcastError, OSError):
    exit_code = 3


class NumericalError(ArmcastError, ArithmeticError):
    exit_code = 4


def require_finite(name: str, value) -> None:
    """값(스칼라 또는 배열)에 NaN/Inf가 있으면 NumericalError."""
    import numpy as np

    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        bad = int(np.size(arr) - np.count_nonzero(np.isfinite(arr)))
        raise NumericalError(f"{name}: 비유한 값 {bad}개 발견 (shape={arr.shape})")
