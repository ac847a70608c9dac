"""
결과 집계 / 표 생성

report(results_dir, out_dir) : 결과 JSON 과 스윕 CSV 를 모아 표 파일을 씁니다.

생성 파일 (out_dir)
  table_pose.csv            : 백본별 fold MSE/MAE "mean±std" (scconv / plain)
  table_refine.csv          : 백본 헤드 vs ELM 커널별 "mean±std"
  forecast_{cell}.csv       : past × future 평균 MSE 격자
  horizon_{cell}.csv        : (n, f, step) 별 검증 MSE
  sweep_curve.csv           : 커널 × 뉴런 수 평균 MSE/MAE
  sweep_lightest.csv        : 커널별 최저 MSE 5% 이내 최소 뉴런 수
  boxplots.json             : 모델별 fold MSE 박스플롯 통계
  tables.xlsx               : 위 표 전체 (시트별)
  report_issues.json        : 읽지 못했거나 형식이 잘못된 입력 목록
"""

import logging
import math
from pathlib import Path

import pandas as pd

from modules.artifact import read_json, write_json
from modules.errors import ArtifactIOError, ConfigError
from modules.evaluation.grid import write_grid_table
from modules.evaluation.metrics import boxplot_stats, format_mean_std, summarize
from modules.logs import log_event
from modules.pose.elm import lightest_within

logger = logging.getLogger(__name__)

EXPECTED_INPUTS = (
    "pose/fold_*.json (train-pose)",
    "elm/*.json (elm-train)",
    "sweep/sweep_folds.csv (elm-sweep)",
    "grid/runs/*.json or forecast/result.json (grid-search, train-forecast)",
)
_NOT_RESULTS = {"resolved_config.json", "folds.json", "manifest.json", "summary.json", "final_fit.json",
                "report_issues.json", "boxplots.json"}
_SWEEP_COLUMNS = ["kernel", "n_hidden", "fold", "mse", "mae"]


# ─── 헬퍼 ─────────────────────────────────────────────────────────────────────

def _valid_record(doc) -> str | None:
    """결과 JSON 형식 검사. 문제가 있으면 사유 문자열."""
    if not isinstance(doc, dict):
        return "JSON 객체가 아님"
    ctx = doc.get("context")
    if not isinstance(ctx, dict) or "stage" not in ctx:
        return "context.stage 누락"
    for key in ("mse", "mae"):
        v = doc.get(key)
        if not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
            return f"{key} 값 오류: {v!r}"
    return None


def collect_results(results_dir: Path) -> tuple[list[dict], list[dict]]:
    """(유효 기록 목록, 문제 목록). 경로 정렬 순서."""
    records, issues = [], []
    for path in sorted(results_dir.rglob("*.json")):
        if path.name in _NOT_RESULTS or path.name.endswith(".failed.json"):
            if path.name.endswith(".failed.json"):
                issues.append({"path": str(path), "reason": "실패한 실행"})
            continue
        try:
            doc = read_json(path)
        except ArtifactIOError as e:
            issues.append({"path": str(path), "reason": str(e)})
            continue
        reason = _valid_record(doc)
        if reason:
            issues.append({"path": str(path), "reason": reason})
            continue
        doc["_path"] = str(path)
        records.append(doc)
    return records, issues


def _mean_std_table(records: list[dict]) -> pd.DataFrame:
    groups: dict[str, list[dict]] = {}
    for r in records:
        groups.setdefault(str(r["context"].get("model", "unknown")), []).append(r)
    rows = []
    for model in sorted(groups):
        mses = [g["mse"] for g in groups[model]]
        maes = [g["mae"] for g in groups[model]]
        m_mse, s_mse = summarize(mses)
        m_mae, s_mae = summarize(maes)
        rows.append({"model": model, "MSE": format_mean_std(mses), "MAE": format_mean_std(maes),
                     "mse_mean": m_mse, "mse_std": s_mse, "mae_mean": m_mae, "mae_std": s_mae,
                     "folds": len(mses)})
    return pd.DataFrame(rows, columns=["model", "MSE", "MAE", "mse_mean", "mse_std",
                                       "mae_mean", "mae_std", "folds"])


def _boxplots(records: list[dict]) -> dict:
    groups: dict[str, list[float]] = {}
    for r in records:
        key = f"{r['context']['stage']}/{r['context'].get('model', 'unknown')}"
        groups.setdefault(key, []).append(r["mse"])
    return {k: boxplot_stats(v).to_dict() for k, v in sorted(groups.items())}


def _forecast_tables(records: list[dict]) -> tuple[dict[str, pd.DataFrame], dict[str, pd.DataFrame]]:
    grids, horizons = {}, {}
    by_cell: dict[str, list[dict]] = {}
    for r in records:
        by_cell.setdefault(str(r["context"].get("cell")), []).append(r)
    for cell in sorted(by_cell):
        df = pd.DataFrame([{"n": int(r["context"]["n"]), "f": int(r["context"]["f"]), "mse": r["mse"]}
                           for r in by_cell[cell]])
        grids[cell] = df.pivot_table(index="n", columns="f", values="mse", aggfunc="mean").sort_index()
        steps = [{"n": int(r["context"]["n"]), "f": int(r["context"]["f"]), "step": s + 1, "mse": float(v)}
                 for r in by_cell[cell] for s, v in enumerate(r.get("horizon_mse") or [])]
        horizons[cell] = (pd.DataFrame(steps, columns=["n", "f", "step", "mse"])
                          .groupby(["n", "f", "step"], as_index=False)["mse"].mean())
    return grids, horizons


def _sweep_tables(results_dir: Path, issues: list[dict]) -> tuple[pd.DataFrame, pd.DataFrame] | None:
    frames = []
    for path in sorted(results_dir.rglob("sweep_folds.csv")):
        try:
            df = pd.read_csv(path)
        except Exception as e:
            issues.append({"path": str(path), "reason": f"CSV 읽기 오류: {e}"})
            continue
        if list(df.columns) != _SWEEP_COLUMNS:
            issues.append({"path": str(path), "reason": f"컬럼 불일치: {list(df.columns)}"})
            continue
        frames.append(df)
    if not frames:
        return None
    folds = pd.concat(frames, ignore_index=True)
    curve = folds.groupby(["kernel", "n_hidden"], sort=True)[["mse", "mae"]].mean().reset_index()
    return curve, lightest_within(curve)


def _write_csv(df: pd.DataFrame, path: Path, index: bool = False) -> Path:
    df.to_csv(path, index=index, float_format="%.6f", lineterminator="\n", encoding="utf-8")
    log_event(logger, "report.table", file=path.name, rows=len(df))
    return path


# ══════════════════════════════════════════════════════════════════════════════
# 보고서
# ══════════════════════════════════════════════════════════════════════════════

def report(results_dir: str | Path, out_dir: str | Path) -> dict[str, Path]:
    """
    Args:
        results_dir: 각 서브커맨드의 출력 디렉토리를 담은 상위 디렉토리 (하위 전체 탐색)
        out_dir    : 표 파일을 쓸 디렉토리

    Returns:
        {표 이름: 파일 경로}

    Raises:
        ConfigError: 결과 디렉토리가 없거나 집계할 입력이 하나도 없는 경우
    """
    results_dir, out_dir = Path(results_dir), Path(out_dir)
    if not results_dir.is_dir():
        raise ConfigError(f"결과 디렉토리가 없습니다: {results_dir}")
    records, issues = collect_results(results_dir)
    sweep = _sweep_tables(results_dir, issues)
    if not records and sweep is None:
        raise ConfigError(
            f"집계할 결과가 없습니다: {results_dir} (기대 입력: {'; '.join(EXPECTED_INPUTS)})"
        )
    for issue in issues:
        log_event(logger, "report.issue", logging.WARNING, path=issue["path"], reason=issue["reason"])

    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    sheets: dict[str, tuple[pd.DataFrame, bool]] = {}

    pose = [r for r in records if r["context"]["stage"] == "pose"]
    refine = [r for r in records if r["context"]["stage"] == "refine"]
    forecast = [r for r in records if r["context"]["stage"] == "forecast"]

    if pose:
        df = _mean_std_table(pose)
        written["table_pose"] = _write_csv(df, out_dir / "table_pose.csv")
        sheets["pose"] = (df, False)
    if refine:
        df = _mean_std_table(refine)
        written["table_refine"] = _write_csv(df, out_dir / "table_refine.csv")
        sheets["refine"] = (df, False)
    if pose or refine:
        written["boxplots"] = write_json(out_dir / "boxplots.json", _boxplots(pose + refine))

    if forecast:
        grids, horizons = _forecast_tables(forecast)
        for cell, table in grids.items():
            written[f"forecast_{cell}"] = write_grid_table(table, out_dir / f"forecast_{cell}.csv")
            log_event(logger, "report.table", file=f"forecast_{cell}.csv", rows=len(table))
            written[f"horizon_{cell}"] = _write_csv(horizons[cell], out_dir / f"horizon_{cell}.csv")
            sheets[f"forecast_{cell}"] = (table, True)
            sheets[f"horizon_{cell}"] = (horizons[cell], False)

    if sweep is not None:
        curve, lightest = sweep
        written["sweep_curve"] = _write_csv(curve, out_dir / "sweep_curve.csv")
        written["sweep_lightest"] = _write_csv(lightest, out_dir / "sweep_lightest.csv")
        sheets["sweep_curve"] = (curve, False)
        sheets["sweep_lightest"] = (lightest, False)

    xlsx = out_dir / "tables.xlsx"
    try:
        with pd.ExcelWriter(xlsx, engine="xlsxwriter") as writer:
            for name, (df, index) in sheets.items():
                df.to_excel(writer, sheet_name=name[:31], index=index)
    except OSError as e:
        raise ArtifactIOError(f"엑셀 저장 실패: {xlsx}: {e}") from e
    written["tables"] = xlsx
    written["issues"] = write_json(out_dir / "report_issues.json", {"issues": issues})
    log_event(logger, "report.done", records=len(records), issues=len(issues), files=len(written))
    return written
