"""
과거/미래 창 격자 탐색 (재개 가능)

GridResult                                          : 셀 종류별 past × future 평균 MSE 표
grid_search(series, cells, past_list, future_list, hyper, seed, out_dir, workers)

실행 단위마다 runs/{cell}_n{n}_f{f}.json 을 남기고, 이미 있는 결과는 건너뜁니다.
실패한 실행은 runs/{name}.failed.json 으로 기록되며 다음 실행에서 다시 시도됩니다.
하위 시드는 derive_seed(seed, i·|future_list| + j) 로 셀 종류와 무관하게 같습니다.
"""

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from modules.artifact import parallel_map, read_json, write_json, write_result
from modules.errors import ConfigError
from modules.forecast.cells import check_cell
from modules.forecast.encdec import save_forecast
from modules.forecast.train import ForecastHyper, train_forecast
from modules.logs import log_event
from modules.numeric.rng import derive_seed

logger = logging.getLogger(__name__)

PAST_WINDOWS   = (10, 20, 30, 45, 60)
FUTURE_WINDOWS = (1, 5, 15, 30, 60, 90, 120)


@dataclass
class GridResult:
    cell: str
    table: pd.DataFrame                       # index past, columns future, 평균 MSE
    failed: list[str] = field(default_factory=list)
    ran: int = 0
    skipped: int = 0

    @property
    def populated(self) -> int:
        return int(self.table.notna().to_numpy().sum())


def run_name(cell: str, n: int, f: int) -> str:
    return f"{cell}_n{n}_f{f}"


def write_grid_table(table: pd.DataFrame, path: Path) -> Path:
    out = table.copy()
    out.columns = [f"f{c}" for c in out.columns]
    out.index.name = "past"
    out.to_csv(path, float_format="%.6f", lineterminator="\n")
    return path


def _run_cell(args) -> dict:
    series, cell, n, f, hyper, runs_dir, record_timing = args
    name = run_name(cell, n, f)
    started = time.perf_counter()
    try:
        run = train_forecast(series, cell, n, f, hyper)
    except Exception as e:  # KeyboardInterrupt 는 잡지 않음
        write_json(runs_dir / f"{name}.failed.json",
                   {"context": {"stage": "forecast", "cell": cell, "n": n, "f": f},
                    "seed": hyper.seed, "error": type(e).__name__, "message": str(e)})
        log_event(logger, "grid.cell.failed", logging.ERROR, run=name, error=type(e).__name__)
        return {"name": name, "failed": True}

    save_forecast(run.model, runs_dir.parent / "models" / f"{name}.armf")
    extra = run.extra()
    extra["hyper"] = asdict(hyper)
    write_result(runs_dir / f"{name}.json", run.record.context, run.record.mse, run.record.mae,
                 hyper.seed, extra, time.perf_counter() - started if record_timing else None)
    (runs_dir / f"{name}.failed.json").unlink(missing_ok=True)
    log_event(logger, "grid.cell.done", run=name, mse=run.record.mse, mae=run.record.mae)
    return {"name": name, "failed": False, "mse": run.record.mse}


def grid_search(series, cells=("lstm", "gru"), past_list=PAST_WINDOWS, future_list=FUTURE_WINDOWS,
                hyper: ForecastHyper | None = None, seed: int = 0, out_dir: str | Path = "grid",
                workers: int = 1, record_timing: bool = True, resume: bool = True) -> dict[str, GridResult]:
    """
    (셀 종류, n, f) 마다 예측 모델 하나를 학습합니다.

    Args:
        series     : (T, 16) 자동 주석 시계열
        cells      : 셀 종류 목록
        past_list  : 과거 창 후보 n
        future_list: 미래 창 후보 f
        hyper      : 공통 하이퍼파라미터 (seed 는 셀마다 하위 시드로 교체)
        seed       : 최상위 시드
        out_dir    : 결과 디렉토리 (runs/, models/, table_{cell}.csv)
        workers    : 병렬 프로세스 수
        resume     : False 면 기존 결과가 있어도 다시 학습

    Returns:
        {셀 종류: GridResult}

    Raises:
        ConfigError: 시계열이 max(n) + max(f) + 1 보다 짧음, 빈 목록
    """
    hyper = hyper or ForecastHyper()
    cells = [check_cell(c) for c in dict.fromkeys(cells)]
    if not past_list or not future_list or not cells:
        raise ConfigError("cells, past_list, future_list 는 비어 있을 수 없습니다")
    series = np.asarray(series, dtype=np.float64)
    need = max(past_list) + max(future_list) + 1
    if series.shape[0] < need:
        raise ConfigError(f"시계열 길이 {series.shape[0]} 가 격자에 필요한 {need} 보다 짧습니다")

    out_dir = Path(out_dir)
    runs_dir = out_dir / "runs"
    runs_dir.mkdir(parents=True, exist_ok=True)

    jobs, skipped = [], {c: 0 for c in cells}
    for cell in cells:
        for i, n in enumerate(past_list):
            for j, f in enumerate(future_list):
                name = run_name(cell, n, f)
                if resume and (runs_dir / f"{name}.json").exists():
                    log_event(logger, "grid.cell.skip", run=name)
                    skipped[cell] += 1
                    continue
                sub = replace(hyper, seed=derive_seed(seed, i * len(future_list) + j))
                jobs.append((series, cell, n, f, sub, runs_dir, record_timing))
    log_event(logger, "grid.start", todo=len(jobs), skipped=sum(skipped.values()), workers=workers)
    outcomes = parallel_map(_run_cell, jobs, workers)

    results: dict[str, GridResult] = {}
    for cell in cells:
        table = pd.DataFrame(np.nan, index=list(past_list), columns=list(future_list))
        failed = []
        for n in past_list:
            for f in future_list:
                name = run_name(cell, n, f)
                path = runs_dir / f"{name}.json"
                if path.exists():
                    table.loc[n, f] = float(read_json(path)["mse"])
                else:
                    failed.append(name)
        ran = sum(1 for o in outcomes if o["name"].startswith(f"{cell}_") and not o["failed"])
        results[cell] = GridResult(cell, table, failed, ran, skipped[cell])
        write_grid_table(table, out_dir / f"table_{cell}.csv")
        log_event(logger, "grid.table", cell=cell, populated=results[cell].populated, failed=len(failed))
    return results
