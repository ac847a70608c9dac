"""
CLI · 설정 · 로깅 테스트

작은 데이터(12초, 32px)로 synth → train-pose → elm-sweep → elm-train → annotate →
train-forecast → grid-search → predict → report 를 한 번 끝까지 실행하고 산출물과 종료 코드를 확인합니다.

실행:
    pytest test_cli.py
"""

import json
import logging

import numpy as np
import pandas as pd
import pytest

from main import main
from modules.artifact import read_json
from modules.config import DEFAULTS, SEED_ENV, load_config, resolve, resolve_seed
from modules.errors import ArtifactIOError, ArmcastError, ConfigError, NumericalError, ShapeError
from modules.logs import log_event
from modules.synth.dataset import read_pose_csv

COMMON = ["--seed", "3", "--workers", "1", "--log-level", "WARNING"]


# ─── 파이프라인 ───────────────────────────────────────────────────────────────

@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data, res = root / "data", root / "results"
    steps = [
        ["synth", "--out", str(data), "--duration-s", "12", "--render-size", "32", "--segment-s", "2"],
        ["train-pose", "--data", str(data), "--out", str(res / "pose"), "--epochs", "2", "--batch", "4",
         "--folds", "3", "--log-every", "0"],
        ["elm-sweep", "--data", str(data), "--backbone", str(res / "pose" / "backbone.armf"),
         "--out", str(res / "sweep"), "--kernels", "tanh", "rbf", "--n-min", "5", "--n-max", "15",
         "--step", "5", "--folds", "3"],
        ["elm-train", "--data", str(data), "--pose-dir", str(res / "pose"), "--out", str(res / "elm"),
         "--kernels", "rbf_l2", "tanh", "--n-hidden", "10"],
        ["annotate", "--data", str(data), "--backbone", str(res / "pose" / "backbone.armf"),
         "--elm", str(res / "elm" / "elm_rbf_l2.armf"), "--out", str(root / "annotated")],
        ["train-forecast", "--series", str(root / "annotated" / "poses_full.csv"), "--out", str(res / "forecast"),
         "--cell", "gru", "--n", "3", "--f", "2", "--epochs", "1", "--hidden", "4", "--batch", "64",
         "--log-every", "0"],
        ["grid-search", "--series", str(root / "annotated" / "poses_full.csv"), "--out", str(res / "grid"),
         "--cells", "lstm", "--past", "3", "4", "--future", "1", "2", "--epochs", "1", "--hidden", "3",
         "--batch", "64", "--log-every", "0"],
        ["predict", "--model", str(res / "forecast" / "model.armf"),
         "--series", str(root / "annotated" / "poses_full.csv"), "--out", str(root / "pred"), "--stride", "50"],
        ["report", "--results", str(res), "--out", str(root / "report")],
    ]
    codes = {step[0]: main(step + COMMON) for step in steps}
    return root, codes


def test_every_step_succeeds(pipeline):
    _, codes = pipeline
    assert codes == {name: 0 for name in codes}


def test_train_pose_artifacts(pipeline):
    root, _ = pipeline
    pose = root / "results" / "pose"
    for k in range(3):
        doc = read_json(pose / f"fold_{k}.json")
        assert doc["context"] == {"stage": "pose", "model": "backbone-scconv", "fold": k}
        assert len(doc["loss_history"]) == 2
        assert (pose / f"fold_{k}.armf").exists()
    folds = read_json(pose / "folds.json")
    assert sorted(i for f in folds["folds"] for i in f) == list(range(12))
    assert (pose / "backbone.armf").exists()
    assert read_json(pose / "resolved_config.json")["seed"] == 3


def test_elm_artifacts(pipeline):
    root, _ = pipeline
    elm = root / "results" / "elm"
    assert read_json(elm / "head_fold0.json")["context"]["model"] == "backbone-head"
    assert read_json(elm / "elm_tanh_fold2.json")["context"]["kernel"] == "tanh"
    assert (elm / "elm_rbf_l2.armf").exists() and (elm / "elm_tanh.armf").exists()
    curve = pd.read_csv(root / "results" / "sweep" / "sweep_curve.csv")
    assert len(curve) == 6


def test_annotation_and_prediction(pipeline):
    root, _ = pipeline
    ids, coords = read_pose_csv(root / "annotated" / "poses_full.csv")
    assert ids.size == 240 and np.all(np.isfinite(coords))
    queries = pd.read_csv(root / "pred" / "queries.csv")
    assert queries["start_frame_id"].tolist() == [0, 50, 100, 150, 200]
    pred = pd.read_csv(root / "pred" / "prediction_000000.csv")
    assert pred.shape == (2, 16)


def test_forecast_and_grid(pipeline):
    root, _ = pipeline
    doc = read_json(root / "results" / "forecast" / "result.json")
    assert doc["context"] == {"stage": "forecast", "cell": "gru", "n": 3, "f": 2}
    assert len(doc["horizon_mse"]) == 2
    table = pd.read_csv(root / "results" / "grid" / "table_lstm.csv")
    assert table["past"].tolist() == [3, 4]


def test_report_outputs(pipeline):
    root, _ = pipeline
    rep = root / "report"
    for name in ("table_pose.csv", "table_refine.csv", "boxplots.json", "forecast_lstm.csv",
                 "forecast_gru.csv", "sweep_curve.csv", "sweep_lightest.csv", "tables.xlsx"):
        assert (rep / name).exists(), name
    refine = pd.read_csv(rep / "table_refine.csv")
    assert set(refine["model"]) == {"backbone-head", "elm-rbf_l2", "elm-tanh"}
    assert read_json(rep / "report_issues.json")["issues"] == []


def test_synth_refuses_existing_output(pipeline):
    root, _ = pipeline
    code = main(["synth", "--out", str(root / "data"), "--duration-s", "12", "--render-size", "32"] + COMMON)
    assert code == 3


def test_grid_rerun_skips_finished_cells(pipeline):
    root, _ = pipeline
    runs = root / "results" / "grid" / "runs"
    before = {p.name: p.stat().st_mtime_ns for p in runs.glob("*.json")}
    code = main(["grid-search", "--series", str(root / "annotated" / "poses_full.csv"),
                 "--out", str(root / "results" / "grid"), "--cells", "lstm", "--past", "3", "4",
                 "--future", "1", "2", "--epochs", "1", "--hidden", "3"] + COMMON)
    assert code == 0
    assert {p.name: p.stat().st_mtime_ns for p in runs.glob("*.json")} == before


def test_same_seed_gives_identical_bytes(tmp_path):
    def run(root):
        data, res = root / "data", root / "results"
        flags = COMMON + ["--no-timing"]
        assert main(["synth", "--out", str(data), "--duration-s", "6", "--render-size", "32"] + flags) == 0
        assert main(["train-forecast", "--series", str(data / "poses_full.csv"), "--out", str(res / "forecast"),
                     "--n", "3", "--f", "2", "--epochs", "2", "--hidden", "4", "--batch", "32"] + flags) == 0
        assert main(["report", "--results", str(res), "--out", str(root / "report")] + flags) == 0

    a, b = tmp_path / "a", tmp_path / "b"
    run(a)
    run(b)
    for rel in ("data/poses_full.csv", "data/poses_annotated.csv", "results/forecast/result.json",
                "report/forecast_lstm.csv", "report/horizon_lstm.csv"):
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


# ─── 종료 코드 ────────────────────────────────────────────────────────────────

def test_report_without_results(tmp_path):
    assert main(["report", "--results", str(tmp_path), "--out", str(tmp_path / "r")] + COMMON) == 2


def test_missing_input_file(tmp_path):
    code = main(["train-forecast", "--series", str(tmp_path / "none.csv"), "--out", str(tmp_path / "o")] + COMMON)
    assert code == 3


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"synth": {"duration": 5}}))
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path / "d")] + COMMON) == 2


def test_invalid_value_is_config_error(tmp_path):
    code = main(["synth", "--out", str(tmp_path / "d"), "--render-size", "16"] + COMMON)
    assert code == 2


def test_exit_codes_by_error_kind():
    assert ArmcastError.exit_code == 1
    assert ConfigError.exit_code == ShapeError.exit_code == 2
    assert ArtifactIOError.exit_code == 3
    assert NumericalError.exit_code == 4
    assert issubclass(ShapeError, ValueError) and issubclass(ArtifactIOError, OSError)


# ─── 설정 ─────────────────────────────────────────────────────────────────────

def test_resolve_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"seed": 7, "workers": 2, "grid_search": {"epochs": 9}}))
    config = load_config(cfg)
    resolved = resolve(config, "grid_search", {"epochs": 3, "hidden": None})
    assert resolved["seed"] == 7 and resolved["workers"] == 2
    assert resolved["epochs"] == 3
    assert resolved["hidden"] == DEFAULTS["grid_search"]["hidden"]
    with pytest.raises(ConfigError):
        resolve(config, "grid_search", {"bogus": 1})


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv(SEED_ENV, "11")
    assert resolve_seed(None) == 11
    assert resolve_seed(4) == 4
    monkeypatch.setenv(SEED_ENV, "abc")
    with pytest.raises(ConfigError):
        resolve_seed(None)


def test_workers_default_to_cpu_count():
    assert resolve({}, "report")["workers"] >= 1


def test_bad_config_files(tmp_path):
    with pytest.raises(ArtifactIOError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        load_config(bad)


# ─── 로깅 ─────────────────────────────────────────────────────────────────────

def test_log_event_format(caplog):
    log = logging.getLogger("armcast.test")
    with caplog.at_level(logging.INFO, logger="armcast.test"):
        log_event(log, "grid.cell.done", run="lstm_n10_f5", mse=0.123456789, note="two words")
    assert caplog.records[-1].getMessage() == 'grid.cell.done run=lstm_n10_f5 mse=0.123457 note="two words"'
