"""
evaluation 패키지 테스트: 지표, k-fold, 박스플롯 통계, 격자 탐색(재개/실패 기록), 자동 주석, 보고서

실행:
    pytest test_evaluation.py
"""

import json

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from modules.artifact import read_json, write_result
from modules.errors import ArtifactIOError, ConfigError, NumericalError, ShapeError
from modules.evaluation import grid as grid_mod
from modules.evaluation.annotate import auto_annotate, list_frames
from modules.evaluation.grid import grid_search, run_name
from modules.evaluation.metrics import (
    MetricRecord, boxplot_stats, format_mean_std, kfold_split, mae, mse, summarize, train_indices,
)
from modules.evaluation.report import report
from modules.forecast.train import ForecastHyper
from modules.pose.backbone import backbone_hash, extract_features, init_backbone
from modules.pose.elm import elm_train
from modules.synth.dataset import load_annotated, load_manifest, read_pose_csv


# ─── 지표 ─────────────────────────────────────────────────────────────────────

def test_mse_and_mae():
    assert mse([1, 2, 3], [2, 4, 6]) == pytest.approx(14 / 3)
    assert mae([1, 2, 3], [2, 4, 6]) == pytest.approx(2.0)
    assert mse(np.ones((2, 16)), np.ones((2, 16))) == 0.0


def test_metric_input_errors():
    with pytest.raises(ShapeError):
        mse([1, 2], [1, 2, 3])
    with pytest.raises(ConfigError):
        mae([], [])
    with pytest.raises(ConfigError):
        MetricRecord({"stage": "pose"}, float("nan"), 0.0)


def test_summary_format():
    assert summarize([1.0, 3.0]) == (2.0, 1.0)
    assert format_mean_std([1.0, 3.0]) == "2.00±1.00"


_coord = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, allow_infinity=False)


@st.composite
def _paired_rows(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    d = draw(st.integers(min_value=1, max_value=4))
    y = np.array(draw(st.lists(_coord, min_size=n * d, max_size=n * d))).reshape(n, d)
    p = np.array(draw(st.lists(_coord, min_size=n * d, max_size=n * d))).reshape(n, d)
    return y, p


@settings(max_examples=100, deadline=None)
@given(_paired_rows(), st.data())
def test_metrics_ignore_row_order(pair, data):
    y, p = pair
    order = data.draw(st.permutations(range(len(y))))
    assert mse(y[order], p[order]) == pytest.approx(mse(y, p), rel=1e-12, abs=1e-12)
    assert mae(y[order], p[order]) == pytest.approx(mae(y, p), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(_paired_rows(), st.data())
def test_metrics_ignore_common_shift(pair, data):
    y, p = pair
    shift = np.array(data.draw(st.lists(_coord, min_size=y.shape[1], max_size=y.shape[1])))
    assert mse(y + shift, p + shift) == pytest.approx(mse(y, p), rel=1e-6, abs=1e-6)
    assert mae(y + shift, p + shift) == pytest.approx(mae(y, p), rel=1e-6, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(_paired_rows())
def test_mae_bounded_by_rmse(pair):
    y, p = pair
    assert mae(y, p) <= np.sqrt(mse(y, p)) * (1 + 1e-12) + 1e-12


@settings(max_examples=150, deadline=None)
@given(st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=60))
def test_boxplot_ordering(values):
    b = boxplot_stats(values)
    assert b.whisker_lo <= b.q1 <= b.median <= b.q3 <= b.whisker_hi
    assert all(v < b.whisker_lo or v > b.whisker_hi for v in b.outliers)


def test_boxplot_three_values():
    b = boxplot_stats([1, 2, 3])
    assert (b.q1, b.median, b.q3) == (1.5, 2.0, 2.5)
    assert (b.whisker_lo, b.whisker_hi) == (1.0, 3.0)
    assert b.outliers == []


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=2, max_value=200), st.data())
def test_kfold_partitions(n, data):
    k = data.draw(st.integers(min_value=2, max_value=min(n, 10)))
    folds = kfold_split(n, k, seed=data.draw(st.integers(0, 1000)))
    sizes = [f.size for f in folds]
    assert max(sizes) - min(sizes) <= 1
    assert sorted(np.concatenate(folds).tolist()) == list(range(n))
    tr = train_indices(n, folds[0])
    assert np.intersect1d(tr, folds[0]).size == 0 and tr.size + folds[0].size == n


def test_kfold_partitions_exhaustive():
    for n in range(2, 201):
        for k in {2, min(5, n), min(10, n)}:
            folds = kfold_split(n, k, seed=n)
            assert sorted(np.concatenate(folds).tolist()) == list(range(n))


def test_kfold_sizes_and_errors():
    assert [f.size for f in kfold_split(101, 5)] == [21, 20, 20, 20, 20]
    with pytest.raises(ConfigError):
        kfold_split(3, 5)
    with pytest.raises(ConfigError):
        kfold_split(10, 1)


def test_boxplot_with_outlier():
    b = boxplot_stats([1, 2, 3, 4, 100])
    assert (b.q1, b.median, b.q3) == (2.0, 3.0, 4.0)
    assert (b.whisker_lo, b.whisker_hi) == (1.0, 4.0)
    assert b.outliers == [100.0]


def test_boxplot_single_value():
    b = boxplot_stats([7.0])
    assert b.median == b.q1 == b.q3 == b.whisker_lo == b.whisker_hi == 7.0
    assert b.outliers == []
    with pytest.raises(ConfigError):
        boxplot_stats([])


# ─── 격자 탐색 ────────────────────────────────────────────────────────────────

@pytest.fixture
def series():
    t = np.arange(40, dtype=np.float64)[:, None]
    return 20.0 + 5.0 * np.sin(0.3 * t + np.arange(16)[None, :])


@pytest.fixture
def hyper():
    return ForecastHyper(epochs=1, batch=16, hidden=3, log_every=0)


def test_grid_runs_and_resumes(tmp_path, series, hyper):
    out = tmp_path / "grid"
    first = grid_search(series, ["gru"], (3, 4), (1, 2), hyper, seed=1, out_dir=out, record_timing=False)
    res = first["gru"]
    assert res.ran == 4 and res.skipped == 0 and res.populated == 4
    table = pd.read_csv(out / "table_gru.csv")
    assert list(table.columns) == ["past", "f1", "f2"]
    assert (out / "models" / f"{run_name('gru', 3, 1)}.armf").exists()

    before = (out / "runs" / "gru_n4_f2.json").read_bytes()
    (out / "runs" / "gru_n3_f1.json").unlink()
    again = grid_search(series, ["gru"], (3, 4), (1, 2), hyper, seed=1, out_dir=out, record_timing=False)
    assert again["gru"].ran == 1 and again["gru"].skipped == 3
    assert (out / "runs" / "gru_n4_f2.json").read_bytes() == before


def test_grid_subseeds_shared_across_cells(tmp_path, series, hyper):
    out = tmp_path / "grid"
    grid_search(series, ["lstm", "gru"], (3,), (1, 2), hyper, seed=4, out_dir=out)
    for f in (1, 2):
        assert read_json(out / "runs" / f"lstm_n3_f{f}.json")["seed"] == \
            read_json(out / "runs" / f"gru_n3_f{f}.json")["seed"]
    assert read_json(out / "runs" / "lstm_n3_f1.json")["wall_time_s"] is not None


def test_grid_records_failed_cells(tmp_path, series, hyper, monkeypatch):
    real = grid_mod.train_forecast

    def flaky(series, cell, n, f, hyper):
        if (n, f) == (4, 2):
            raise NumericalError("발산")
        if (n, f) == (3, 2):
            raise np.linalg.LinAlgError("특이 행렬")
        return real(series, cell, n, f, hyper)

    monkeypatch.setattr(grid_mod, "train_forecast", flaky)
    out = tmp_path / "grid"
    res = grid_search(series, ["lstm"], (3, 4), (1, 2), hyper, out_dir=out)["lstm"]
    assert sorted(res.failed) == ["lstm_n3_f2", "lstm_n4_f2"]
    assert res.populated == 2
    assert read_json(out / "runs" / "lstm_n4_f2.failed.json")["error"] == "NumericalError"
    assert read_json(out / "runs" / "lstm_n3_f2.failed.json")["error"] == "LinAlgError"
    assert np.isnan(res.table.loc[4, 2]) and np.isnan(res.table.loc[3, 2])

    monkeypatch.setattr(grid_mod, "train_forecast", real)
    res = grid_search(series, ["lstm"], (3, 4), (1, 2), hyper, out_dir=out)["lstm"]
    assert res.failed == [] and res.ran == 2
    assert not list((out / "runs").glob("*.failed.json"))


def test_grid_interrupt_is_not_recorded(tmp_path, series, hyper, monkeypatch):
    def interrupted(*_):
        raise KeyboardInterrupt

    monkeypatch.setattr(grid_mod, "train_forecast", interrupted)
    with pytest.raises(KeyboardInterrupt):
        grid_search(series, ["gru"], (3,), (1,), hyper, out_dir=tmp_path / "grid")
    assert not list((tmp_path / "grid").rglob("*.failed.json"))


def test_grid_rejects_short_series(tmp_path, hyper):
    with pytest.raises(ConfigError):
        grid_search(np.zeros((10, 16)), ["lstm"], (5,), (5,), hyper, out_dir=tmp_path)
    with pytest.raises(ConfigError):
        grid_search(np.zeros((40, 16)), ["rnn"], (3,), (1,), hyper, out_dir=tmp_path)


# ─── 자동 주석 ────────────────────────────────────────────────────────────────

def _fitted_pair(data_dir):
    _, images, targets = load_annotated(data_dir)
    backbone = init_backbone("plain", 32, seed=0, head_bias=targets.mean(axis=0))
    elm = elm_train(extract_features(backbone, images), targets, "rbf_l2", 8,
                    backbone_hash=backbone_hash(backbone))
    return backbone, elm


def test_auto_annotate_covers_every_frame(tiny_data, tmp_path):
    backbone, elm = _fitted_pair(tiny_data)
    out_csv = tmp_path / "auto.csv"
    poses = auto_annotate(backbone, elm, tiny_data / "frames", out_csv, load_manifest(tiny_data), batch=100)
    assert len(poses) == 240
    ids, coords = read_pose_csv(out_csv)
    assert np.array_equal(ids, np.arange(240))
    assert coords.shape == (240, 16)
    assert [p.frame_id for p in poses[:3]] == [0, 1, 2]


def test_auto_annotate_frame_count_mismatch(tiny_data, tmp_path):
    backbone, elm = _fitted_pair(tiny_data)
    with pytest.raises(ArtifactIOError):
        auto_annotate(backbone, elm, tiny_data / "frames", tmp_path / "a.csv", {"n_images": 999})
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(ArtifactIOError):
        auto_annotate(backbone, elm, empty, tmp_path / "a.csv")


def test_list_frames_sorted(tiny_data):
    ids, paths = list_frames(tiny_data / "frames")
    assert ids[:3].tolist() == [0, 1, 2]
    assert len(paths) == 240


# ─── 보고서 ───────────────────────────────────────────────────────────────────

def test_report_on_empty_directory(tmp_path):
    with pytest.raises(ConfigError):
        report(tmp_path, tmp_path / "out")
    with pytest.raises(ConfigError):
        report(tmp_path / "missing", tmp_path / "out")


def test_report_tables(tmp_path):
    res = tmp_path / "results"
    for k, (m, a) in enumerate([(4.0, 1.5), (6.0, 2.5)]):
        write_result(res / "pose" / f"fold_{k}.json", {"stage": "pose", "model": "backbone-scconv", "fold": k},
                     m, a, seed=0)
        write_result(res / "elm" / f"elm_tanh_fold{k}.json",
                     {"stage": "refine", "model": "elm-tanh", "kernel": "tanh", "fold": k}, m / 2, a / 2, seed=0)
    write_result(res / "grid" / "runs" / "lstm_n10_f5.json", {"stage": "forecast", "cell": "lstm", "n": 10, "f": 5},
                 3.0, 1.0, seed=0, extra={"horizon_mse": [2.0, 4.0]})
    (res / "grid" / "runs" / "lstm_n10_f15.failed.json").write_text(json.dumps({"error": "NumericalError"}))
    (res / "pose" / "broken.json").write_text("{not json")

    written = report(res, tmp_path / "report")
    pose = pd.read_csv(written["table_pose"])
    assert pose.loc[0, "model"] == "backbone-scconv"
    assert pose.loc[0, "MSE"] == "5.00±1.00"
    assert pose.loc[0, "MAE"] == "2.00±0.50"
    refine = pd.read_csv(written["table_refine"])
    assert refine.loc[0, "MSE"] == "2.50±0.50"

    grid = pd.read_csv(written["forecast_lstm"])
    assert list(grid.columns) == ["past", "f5"]
    horizon = pd.read_csv(written["horizon_lstm"])
    assert horizon["step"].tolist() == [1, 2]
    assert written["tables"].exists()

    issues = read_json(written["issues"])["issues"]
    reasons = {p.split("/")[-1] for p in (i["path"] for i in issues)}
    assert reasons == {"lstm_n10_f15.failed.json", "broken.json"}
    box = read_json(written["boxplots"])
    assert box["pose/backbone-scconv"]["median"] == pytest.approx(5.0)


def test_report_sweep_only(tmp_path):
    res = tmp_path / "results" / "sweep"
    res.mkdir(parents=True)
    pd.DataFrame({"kernel": ["rbf"] * 4, "n_hidden": [100, 100, 150, 150], "fold": [0, 1, 0, 1],
                  "mse": [2.0, 2.2, 1.0, 1.1], "mae": [1.0] * 4}).to_csv(res / "sweep_folds.csv", index=False)
    written = report(tmp_path / "results", tmp_path / "report")
    lightest = pd.read_csv(written["sweep_lightest"])
    assert lightest.loc[0, "n_hidden"] == 150
    assert "table_pose" not in written
