"""
구조화 로그

setup_logging(level)                   : stderr 로 `ts level event key=value ...` 형식 출력
log_event(logger, event, level, **kv)  : 이벤트 한 줄 기록
"""

import logging
import sys

_FORMAT  = "%(asctime)s %(levelname)s %(message)s"
_DATEFMT = "%Y-%m-%dT%H:%M:%S"


def setup_logging(level: str | int = "INFO") -> None:
    """루트 로거를 stderr 핸들러 하나로 재설정합니다."""
    root = logging.getLogger()
    for h in list(root.handlers):
        root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(_FORMAT, datefmt=_DATEFMT))
    root.addHandler(handler)
    root.setLevel(level.upper() if isinstance(level, str) else level)


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    text = str(value)
    return f'"{text}"' if " " in text else text


def log_event(logger: logging.Logger, event: str, level: int = logging.INFO, **fields) -> None:
    if not logger.isEnabledFor(level):
        return
    parts = [event] + [f"{k}={_fmt(v)}" for k, v in fields.items()]
    logger.log(level, " ".join(parts))
