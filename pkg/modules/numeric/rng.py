"""
결정적 난수 생성기

splitmix64(state)          : (다음 상태, 출력), 시드 확장용
derive_seed(seed, index)   : seed 로 시작한 splitmix64 스트림의 index 번째 출력 (하위 시드)
Xoshiro256
  next_u64()               : 64비트 정수 하나
  uniform(shape, lo, hi)   : [lo, hi) 균등분포 float64 배열
  normal(shape, mean, std) : Box–Muller 정규분포 배열
  permutation(n)           : Fisher–Yates 순열

알고리즘이 고정되어 있으므로 같은 시드는 플랫폼과 무관하게 같은 스트림을 냅니다.
numpy.random 은 버전별 스트림 보장이 없어 사용하지 않습니다.
"""

import math

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> tuple[int, int]:
    """splitmix64 한 스텝. (다음 상태, 출력)을 반환합니다."""
    state = (state + _GOLDEN) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """
    seed 로 초기화한 splitmix64 스트림의 index 번째(0부터) 출력.

    그리드 셀, 교차검증 fold, 스윕 셀처럼 독립 실행 단위마다 하위 시드를 만들 때 사용합니다.
    """
    if index < 0:
        raise ValueError(f"index 는 0 이상이어야 합니다: {index}")
    state = (seed + index * _GOLDEN) & _MASK64
    return splitmix64(state)[1]


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256:
    """xoshiro256** 생성기. 상태 4워드는 splitmix64 로 시드에서 확장합니다."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK64
        state = self.seed
        words = []
        for _ in range(4):
            state, out = splitmix64(state)
            words.append(out)
        self._s = words

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def _unit(self, count: int) -> np.ndarray:
        # 상위 53비트 → [0, 1)
        out = np.empty(count, dtype=np.float64)
        for i in range(count):
            out[i] = (self.next_u64() >> 11) * (1.0 / (1 << 53))
        return out

    def uniform(self, shape=(), low: float = 0.0, high: float = 1.0) -> np.ndarray:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        count = math.prod(shape)
        return (low + (high - low) * self._unit(count)).reshape(shape)

    def normal(self, shape=(), mean: float = 0.0, std: float = 1.0) -> np.ndarray:
        """Box–Muller. 호출마다 ceil(n/2) 쌍을 뽑고 남는 값은 버립니다."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        count = math.prod(shape)
        pairs = (count + 1) // 2
        u = self._unit(2 * pairs).reshape(pairs, 2)
        u1 = 1.0 - u[:, 0]  # (0, 1]
        radius = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * math.pi * u[:, 1]
        z = np.stack([radius * np.cos(theta), radius * np.sin(theta)], axis=1).ravel()
        return (mean + std * z[:count]).reshape(shape)

    def permutation(self, n: int) -> np.ndarray:
        perm = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = int(((self.next_u64() >> 11) * (1.0 / (1 << 53))) * (i + 1))
            perm[i], perm[j] = perm[j], perm[i]
        return perm
