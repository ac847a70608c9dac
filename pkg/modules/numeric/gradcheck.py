"""
유한차분 기울기 검증

finite_diff_grad(f, theta, eps) : 중앙차분 (f(θ+εeᵢ) − f(θ−εeᵢ)) / 2ε
relative_error(a, b)            : ‖a − b‖ / max(‖a‖, ‖b‖, floor)
check_param_grads(loss, params, grads) : dict 파라미터 전체를 검사해 텐서별 상대오차 반환
"""

from typing import Callable

import numpy as np

from modules.errors import ConfigError, NumericalError


def finite_diff_grad(f: Callable[[np.ndarray], float], theta: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """
    theta 의 각 좌표에 대한 중앙차분 기울기.

    Args:
        f    : theta(원래 형태 그대로)를 받아 스칼라를 돌려주는 함수
        theta: 평가 지점
        eps  : 섭동 크기 (> 0)

    Returns:
        theta 와 같은 형태의 기울기 배열

    Raises:
        ConfigError   : eps ≤ 0
        NumericalError: f 가 비유한 값을 반환
    """
    if eps <= 0:
        raise ConfigError(f"eps 는 양수여야 합니다: {eps}")
    theta = np.array(theta, dtype=np.float64)
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        orig = theta.flat[i]
        theta.flat[i] = orig + eps
        f_plus = float(f(theta))
        theta.flat[i] = orig - eps
        f_minus = float(f(theta))
        theta.flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericalError(f"유한차분 평가 중 비유한 값 (좌표 {i})")
        grad.flat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = max(np.linalg.norm(a), np.linalg.norm(b), floor)
    return float(np.linalg.norm(a - b) / denom)


def check_param_grads(loss: Callable[[dict[str, np.ndarray]], float],
                      params: dict[str, np.ndarray],
                      grads: dict[str, np.ndarray],
                      eps: float = 1e-5) -> dict[str, float]:
    """
    해석적 기울기 grads 를 params 의 모든 텐서에 대해 유한차분과 비교합니다.

    loss 는 params dict 를 받아 스칼라 손실을 계산해야 합니다.
    """
    errors: dict[str, float] = {}
    for name in sorted(params):
        def _f(value, _name=name):
            trial = dict(params)
            trial[_name] = value
            return loss(trial)

        numeric = finite_diff_grad(_f, params[name], eps)
        errors[name] = relative_error(grads[name], numeric)
    return errors
