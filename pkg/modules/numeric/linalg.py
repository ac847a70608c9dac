"""
최소제곱 / 릿지 해

solve_least_squares(A, B, lam) : SVD 기반. lam > 0 이면 릿지 해, lam == 0 이면 최소노름 해

ELM 출력 가중치 β 계산에 사용됩니다.
"""

import numpy as np

from modules.errors import ConfigError, ShapeError, require_finite


def solve_least_squares(A: np.ndarray, B: np.ndarray, lam: float = 0.0) -> np.ndarray:
    """
    min ‖AX − B‖² + lam‖X‖² 의 해 X (D×K).

    A = U diag(s) Vᵀ 로 분해한 뒤
      - lam > 0  : X = V diag(s / (s² + lam)) Uᵀ B    (= (AᵀA + lam·I)⁻¹ AᵀB)
      - lam == 0 : s ≤ tol 인 특이값을 버린 유사역행렬 해, tol = max(N, D)·σmax·1e-12
    A 가 전부 0 이고 lam == 0 이면 영행렬을 반환합니다.

    Args:
        A  : N×D 행렬
        B  : N×K 행렬 (1차원이면 N×1 로 취급)
        lam: 0 이상 정규화 계수

    Returns:
        D×K float64 행렬

    Raises:
        ShapeError    : 행 수 불일치
        ConfigError   : lam < 0
        NumericalError: 입력 또는 해에 비유한 값
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if B.ndim == 1:
        B = B[:, None]
    if A.ndim != 2 or B.ndim != 2:
        raise ShapeError(f"A, B 는 2차원이어야 합니다: A{A.shape}, B{B.shape}")
    if A.shape[0] != B.shape[0]:
        raise ShapeError(f"행 수 불일치: A{A.shape} vs B{B.shape}")
    if lam < 0:
        raise ConfigError(f"lambda 는 0 이상이어야 합니다: {lam}")
    require_finite("A", A)
    require_finite("B", B)

    n, d = A.shape
    if A.size == 0:
        return np.zeros((d, B.shape[1]))

    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if lam > 0:
        inv_s = s / (s * s + lam)
    else:
        tol = max(n, d) * (s[0] if s.size else 0.0) * 1e-12
        inv_s = np.zeros_like(s)
        keep = s > tol
        inv_s[keep] = 1.0 / s[keep]

    X = Vt.T @ (inv_s[:, None] * (U.T @ B))
    require_finite("least-squares solution", X)
    return X
