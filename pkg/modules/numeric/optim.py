"""
최적화 기본 요소

AdamState                       : 1·2차 모멘트, 스텝 수, 하이퍼파라미터
adam_step(params, grads, state) : 편향 보정 Adam 한 스텝 (순수 함수)
Adam                            : 이름 붙은 텐서 dict 전체를 갱신하는 래퍼
clip_global_norm(grads, max)    : 전역 L2 노름 클리핑
"""

from dataclasses import dataclass, field

import numpy as np

from modules.errors import ShapeError


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, shape, lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape), 0, lr, beta1, beta2, eps)


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> tuple[np.ndarray, AdamState]:
    """
    편향 보정 Adam 갱신.

    Returns:
        (새 파라미터, 새 상태). 입력 배열은 수정하지 않습니다.

    Raises:
        ShapeError: params / grads / m / v 형태 불일치
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if not (params.shape == grads.shape == state.m.shape == state.v.shape):
        raise ShapeError(
            f"Adam 형태 불일치: params{params.shape} grads{grads.shape} "
            f"m{state.m.shape} v{state.v.shape}"
        )
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads * grads
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, AdamState(m, v, t, state.lr, state.beta1, state.beta2, state.eps)


@dataclass
class Adam:
    """파라미터 dict 의 텐서별 AdamState 를 보관합니다."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    states: dict[str, AdamState] = field(default_factory=dict)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """params 를 제자리(dict 항목 교체)로 갱신합니다. 키 순서는 정렬 순서로 고정."""
        for name in sorted(params):
            state = self.states.get(name)
            if state is None:
                state = AdamState.fresh(params[name].shape, self.lr, self.beta1, self.beta2, self.eps)
            params[name], self.states[name] = adam_step(params[name], grads[name], state)


def global_norm(grads: dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for _, g in sorted(grads.items()))))


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> tuple[dict[str, np.ndarray], float]:
    """전역 노름이 max_norm 을 넘으면 모든 기울기를 같은 비율로 줄입니다. (기울기, 원래 노름)."""
    norm = global_norm(grads)
    if max_norm <= 0 or norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}, norm
