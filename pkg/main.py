# python main.py <subcommand> [--config run.json] [--out DIR] [--seed N] [--workers N] [--force]

"""
로봇팔 포즈 추정 · 보정 · 움직임 예측 파이프라인 진입점

서브커맨드 (순서대로 실행):
  synth          : 합성 팔 데이터셋 (poses_full.csv, poses_annotated.csv, frames/, manifest.json)
  train-pose     : 백본 5-fold 학습 (fold_{k}.json / .armf, folds.json, backbone.armf)
  elm-sweep      : 커널 × 뉴런 수 스윕 (sweep_folds.csv, sweep_curve.csv, sweep_lightest.csv)
  elm-train      : fold 별 헤드 vs ELM 비교 + 전체 데이터 ELM (elm_{kernel}.armf)
  annotate       : 전 프레임 자동 주석 (poses_full.csv)
  train-forecast : 예측 모델 1개 학습 (model.armf, result.json)
  grid-search    : past × future 격자 학습 (재개 가능)
  predict        : 질의 창별 f×16 예측 CSV
  report         : 표 / 박스플롯 통계 / 엑셀

종료 코드: 0 성공, 1 기타 armcast 오류, 2 설정·검증 오류, 3 입출력 오류, 4 수치 오류(비유한 손실)
"""

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd

from modules.artifact import prepare_out_dir, read_json, write_json, write_result
from modules.config import DEFAULTS, load_config, resolve, write_resolved
from modules.errors import ArmcastError, ConfigError
from modules.evaluation.annotate import auto_annotate
from modules.evaluation.grid import grid_search
from modules.evaluation.metrics import train_indices
from modules.evaluation.report import report
from modules.forecast.encdec import load_forecast, save_forecast
from modules.forecast.train import ForecastHyper, hyper_dict as forecast_hyper_dict, predict_windows, train_forecast
from modules.logs import log_event, setup_logging
from modules.numeric.rng import derive_seed
from modules.pose.backbone import backbone_hash, extract_features, load_backbone, save_backbone
from modules.pose.elm import (
    elm_train, evaluate_fold, lightest_within, load_elm, neuron_sweep, save_elm,
)
from modules.pose.train import PoseHyper, fit_backbone, hyper_dict as pose_hyper_dict, train_pose
from modules.synth.dataset import POSE_COLUMNS, load_annotated, load_manifest, read_pose_csv, synth_dataset
from modules.synth.kinematics import ArmModel, Camera
from modules.synth.trajectory import SynthConfig

logger = logging.getLogger("armcast")


# ─── 헬퍼 ─────────────────────────────────────────────────────────────────────

def _settings(args: argparse.Namespace, config: dict, section: str) -> dict:
    """argparse 값 중 해당 섹션(또는 공통) 키만 골라 설정에 덮어씁니다."""
    keys = set(DEFAULTS[section]) | {"seed", "workers", "record_timing", "log_level"}
    overrides = {k: v for k, v in vars(args).items() if k in keys}
    cfg = resolve(config, section, overrides)
    setup_logging(cfg["log_level"])
    log_event(logger, "cli.start", command=args.command, seed=cfg["seed"], workers=cfg["workers"])
    return cfg


def _timing(cfg: dict, seconds: float) -> float | None:
    return seconds if cfg["record_timing"] else None


def _write_table(df: pd.DataFrame, path: Path) -> None:
    df.to_csv(path, index=False, float_format="%.6f", lineterminator="\n", encoding="utf-8")


def _forecast_hyper(cfg: dict) -> ForecastHyper:
    return ForecastHyper(
        epochs=int(cfg["epochs"]), lr=float(cfg["lr"]), batch=int(cfg["batch"]), hidden=int(cfg["hidden"]),
        clip=float(cfg["clip"]), val_fraction=float(cfg["val_fraction"]), stride=int(cfg["stride"]),
        seed=cfg["seed"], log_every=int(cfg["log_every"]), purge=bool(cfg["purge"]),
    )


# ══════════════════════════════════════════════════════════════════════════════
# 서브커맨드
# ══════════════════════════════════════════════════════════════════════════════

def cmd_synth(args, config) -> None:
    cfg = _settings(args, config, "synth")
    sc = SynthConfig(
        seed=cfg["seed"], fps=float(cfg["fps"]), duration_s=float(cfg["duration_s"]), script=list(cfg["script"]),
        noise_sigma=float(cfg["noise_sigma"]), render_size=int(cfg["render_size"]),
        subsample_per_s=float(cfg["subsample_per_s"]), segment_s=float(cfg["segment_s"]),
        jitter=float(cfg["jitter"]), render_all=bool(cfg["render_all"]),
    )
    arm = ArmModel() if cfg["link_lengths"] is None else ArmModel(link_lengths=np.asarray(cfg["link_lengths"], dtype=float))
    synth_dataset(sc, arm, Camera.for_render(sc.render_size), cfg["out"], args.force, cfg["workers"])
    write_resolved(cfg["out"], "synth", cfg)


def cmd_train_pose(args, config) -> None:
    cfg = _settings(args, config, "train_pose")
    out = Path(cfg["out"] or ("results/pose" if cfg["variant"] == "scconv" else f"results/pose_{cfg['variant']}"))
    prepare_out_dir(out, args.force)
    ids, images, targets = load_annotated(cfg["data"], cfg["csv"])
    hyper = PoseHyper(epochs=int(cfg["epochs"]), lr=float(cfg["lr"]), batch=int(cfg["batch"]),
                      folds=int(cfg["folds"]), seed=cfg["seed"], variant=cfg["variant"],
                      log_every=int(cfg["log_every"]))
    result = train_pose(images, targets, hyper, cfg["workers"])

    for k, (model, record) in enumerate(zip(result.models, result.records)):
        save_backbone(model, out / f"fold_{k}.armf")
        extra = {"loss_history": result.histories[k], "keypoint_mae": result.keypoint_mae[k],
                 "n_val": int(result.folds[k].size), "hyper": pose_hyper_dict(hyper)}
        write_result(out / f"fold_{k}.json", record.context, record.mse, record.mae, hyper.seed,
                     extra, _timing(cfg, result.wall_times[k]))
    write_json(out / "folds.json", {"seed": hyper.seed, "frame_ids": ids.tolist(),
                                    "folds": [f.tolist() for f in result.folds]})
    write_json(out / "summary.json", result.summary())

    if cfg["final_fit"]:
        model, history = fit_backbone(images, targets, hyper, derive_seed(hyper.seed, hyper.folds), label="final")
        save_backbone(model, out / "backbone.armf")
        write_json(out / "final_fit.json", {"loss_history": history, "n_train": int(images.shape[0]),
                                            "backbone_hash": backbone_hash(model)})
    write_resolved(out, "train_pose", cfg)


def cmd_elm_sweep(args, config) -> None:
    cfg = _settings(args, config, "elm_sweep")
    out = prepare_out_dir(cfg["out"], args.force)
    backbone = load_backbone(cfg["backbone"])
    _, images, targets = load_annotated(cfg["data"], cfg["csv"])
    features = extract_features(backbone, images)
    sweep = neuron_sweep(features, targets, cfg["kernels"], int(cfg["n_min"]), int(cfg["n_max"]),
                         int(cfg["step"]), int(cfg["folds"]), cfg["seed"], float(cfg["lam"]), cfg["workers"])
    _write_table(sweep.folds, out / "sweep_folds.csv")
    _write_table(sweep.curve, out / "sweep_curve.csv")
    _write_table(lightest_within(sweep.curve, float(cfg["tolerance"])), out / "sweep_lightest.csv")
    write_resolved(out, "elm_sweep", cfg)


def cmd_elm_train(args, config) -> None:
    cfg = _settings(args, config, "elm_train")
    out = prepare_out_dir(cfg["out"], args.force)
    pose_dir = Path(cfg["pose_dir"])
    ids, images, targets = load_annotated(cfg["data"], cfg["csv"])
    folds_doc = read_json(pose_dir / "folds.json")
    if folds_doc["frame_ids"] != ids.tolist():
        raise ConfigError(f"{pose_dir}/folds.json 의 frame_id 목록이 현재 주석 데이터와 다릅니다")

    kernels = list(dict.fromkeys(cfg["kernels"]))
    n_hidden, lam = int(cfg["n_hidden"]), float(cfg["lam"])
    for k, val in enumerate(folds_doc["folds"]):
        started = time.perf_counter()
        backbone = load_backbone(pose_dir / f"fold_{k}.armf")
        records = evaluate_fold(backbone, images, targets, np.asarray(val, dtype=np.int64), k,
                                kernels, n_hidden, lam, cfg["seed"])
        elapsed = time.perf_counter() - started
        for r in records:
            name = "head" if r.context["model"] == "backbone-head" else f"elm_{r.context['kernel']}"
            write_result(out / f"{name}_fold{k}.json", r.context, r.mse, r.mae, cfg["seed"],
                         {"n_hidden": n_hidden, "n_train": int(train_indices(len(ids), val).size)},
                         _timing(cfg, elapsed))

    final = load_backbone(pose_dir / "backbone.armf")
    features = extract_features(final, images)
    bb_hash = backbone_hash(final)
    for i, kernel in enumerate(kernels):
        elm = elm_train(features, targets, kernel, n_hidden, lam if kernel == "rbf_l2" else None,
                        derive_seed(cfg["seed"], i), bb_hash)
        save_elm(elm, out / f"elm_{kernel}.armf")
    write_resolved(out, "elm_train", cfg)


def cmd_annotate(args, config) -> None:
    cfg = _settings(args, config, "annotate")
    out = prepare_out_dir(cfg["out"], args.force)
    backbone = load_backbone(cfg["backbone"])
    elm = load_elm(cfg["elm"])
    manifest = load_manifest(cfg["data"])
    auto_annotate(backbone, elm, Path(cfg["data"]) / "frames", out / "poses_full.csv", manifest)
    write_resolved(out, "annotate", cfg)


def cmd_train_forecast(args, config) -> None:
    cfg = _settings(args, config, "train_forecast")
    out = prepare_out_dir(cfg["out"], args.force)
    _, series = read_pose_csv(cfg["series"])
    hyper = _forecast_hyper(cfg)
    started = time.perf_counter()
    run = train_forecast(series, cfg["cell"], int(cfg["n"]), int(cfg["f"]), hyper)
    save_forecast(run.model, out / "model.armf")
    extra = run.extra()
    extra["hyper"] = forecast_hyper_dict(hyper)
    write_result(out / "result.json", run.record.context, run.record.mse, run.record.mae, hyper.seed,
                 extra, _timing(cfg, time.perf_counter() - started))
    write_resolved(out, "train_forecast", cfg)


def cmd_grid_search(args, config) -> None:
    cfg = _settings(args, config, "grid_search")
    out = Path(cfg["out"])
    _, series = read_pose_csv(cfg["series"])
    grid_search(series, cfg["cells"], [int(n) for n in cfg["past"]], [int(f) for f in cfg["future"]],
                _forecast_hyper(cfg), cfg["seed"], out, cfg["workers"], bool(cfg["record_timing"]),
                resume=not args.force)
    write_resolved(out, "grid_search", cfg)


def cmd_predict(args, config) -> None:
    cfg = _settings(args, config, "predict")
    model = load_forecast(cfg["model"])
    ids, series = read_pose_csv(cfg["series"])
    out = prepare_out_dir(cfg["out"], args.force)
    starts, preds = predict_windows(model, series, int(cfg["stride"]))
    for k, pred in enumerate(preds):
        _write_table(pd.DataFrame(pred, columns=POSE_COLUMNS[1:]), out / f"prediction_{k:06d}.csv")
    _write_table(pd.DataFrame({"query": np.arange(starts.size), "start_frame_id": ids[starts]}), out / "queries.csv")
    log_event(logger, "predict.done", queries=int(starts.size), f=model.f)
    write_resolved(out, "predict", cfg)


def cmd_report(args, config) -> None:
    cfg = _settings(args, config, "report")
    report(cfg["results"], cfg["out"])
    write_resolved(cfg["out"], "report", cfg)


HANDLERS = {
    "synth": cmd_synth,
    "train-pose": cmd_train_pose,
    "elm-sweep": cmd_elm_sweep,
    "elm-train": cmd_elm_train,
    "annotate": cmd_annotate,
    "train-forecast": cmd_train_forecast,
    "grid-search": cmd_grid_search,
    "predict": cmd_predict,
    "report": cmd_report,
}


# ─── 인자 파서 ────────────────────────────────────────────────────────────────

def _add_forecast_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--series", help="자동 주석 시계열 CSV (poses_full.csv 형식)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int, help="미니배치 크기 (기본 256, 큰 실험 4096)")
    p.add_argument("--hidden", type=int, help="순환 셀 은닉 크기")
    p.add_argument("--clip", type=float, help="전역 기울기 노름 상한")
    p.add_argument("--val-fraction", dest="val_fraction", type=float)
    p.add_argument("--stride", type=int)
    p.add_argument("--log-every", dest="log_every", type=int)
    p.add_argument("--no-purge", dest="purge", action="store_const", const=False,
                   help="학습/검증 경계 창을 제거하지 않음")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON 설정 파일")
    common.add_argument("--out", help="출력 디렉토리")
    common.add_argument("--seed", type=int, help="최상위 시드 (없으면 ARMCAST_SEED, 그다음 0)")
    common.add_argument("--workers", type=int, help="병렬 작업 수 (기본: 논리 코어 수)")
    common.add_argument("--force", action="store_true", help="기존 산출물 덮어쓰기 (grid-search 는 전체 재학습)")
    common.add_argument("--log-level", dest="log_level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--no-timing", dest="record_timing", action="store_const", const=False,
                        help="결과 JSON 에 wall_time_s 를 쓰지 않음")

    parser = argparse.ArgumentParser(prog="armcast", description=__doc__.splitlines()[1])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="합성 데이터셋 생성")
    p.add_argument("--duration-s", dest="duration_s", type=float)
    p.add_argument("--fps", type=float)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.add_argument("--render-size", dest="render_size", type=int)
    p.add_argument("--subsample-per-s", dest="subsample_per_s", type=float)
    p.add_argument("--segment-s", dest="segment_s", type=float)
    p.add_argument("--script", nargs="+")
    p.add_argument("--annotated-only", dest="render_all", action="store_const", const=False,
                   help="주석 프레임만 렌더")

    p = sub.add_parser("train-pose", parents=[common], help="백본 k-fold 학습")
    p.add_argument("--data")
    p.add_argument("--variant", choices=["scconv", "plain"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--log-every", dest="log_every", type=int)
    p.add_argument("--no-final-fit", dest="final_fit", action="store_const", const=False)

    p = sub.add_parser("elm-sweep", parents=[common], help="ELM 커널 × 뉴런 수 스윕")
    p.add_argument("--data")
    p.add_argument("--backbone")
    p.add_argument("--kernels", nargs="+")
    p.add_argument("--n-min", dest="n_min", type=int)
    p.add_argument("--n-max", dest="n_max", type=int)
    p.add_argument("--step", type=int)
    p.add_argument("--folds", type=int)
    p.add_argument("--lam", type=float, help="rbf_l2 릿지 계수")
    p.add_argument("--tolerance", type=float)

    p = sub.add_parser("elm-train", parents=[common], help="fold 별 보정 평가 + 전체 데이터 ELM")
    p.add_argument("--data")
    p.add_argument("--pose-dir", dest="pose_dir")
    p.add_argument("--kernels", nargs="+")
    p.add_argument("--n-hidden", dest="n_hidden", type=int)
    p.add_argument("--lam", type=float)

    p = sub.add_parser("annotate", parents=[common], help="전 프레임 자동 주석")
    p.add_argument("--data")
    p.add_argument("--backbone")
    p.add_argument("--elm")

    p = sub.add_parser("train-forecast", parents=[common], help="예측 모델 1개 학습")
    p.add_argument("--cell", choices=["lstm", "gru"])
    p.add_argument("--n", type=int, help="과거 창 길이")
    p.add_argument("--f", type=int, help="미래 창 길이")
    _add_forecast_flags(p)

    p = sub.add_parser("grid-search", parents=[common], help="past × future 격자 학습")
    p.add_argument("--cells", nargs="+", choices=["lstm", "gru"])
    p.add_argument("--past", nargs="+", type=int)
    p.add_argument("--future", nargs="+", type=int)
    _add_forecast_flags(p)

    p = sub.add_parser("predict", parents=[common], help="질의 창별 예측")
    p.add_argument("--model")
    p.add_argument("--series")
    p.add_argument("--stride", type=int)

    p = sub.add_parser("report", parents=[common], help="표 / 박스플롯 통계 생성")
    p.add_argument("--results")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or "INFO")
    try:
        config = load_config(args.config)
        HANDLERS[args.command](args, config)
    except ArmcastError as e:
        log_event(logger, "cli.error", logging.ERROR, command=args.command, kind=type(e).__name__, message=str(e))
        return e.exit_code
    except OSError as e:
        log_event(logger, "cli.error", logging.ERROR, command=args.command, kind="OSError", message=str(e))
        return 3
    log_event(logger, "cli.done", command=args.command)
    return 0


if __name__ == "__main__":
    sys.exit(main())
