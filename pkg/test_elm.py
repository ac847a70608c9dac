"""
ELM 보정 테스트: 커널별 학습, λ 규칙, 뉴런 수 스윕, fold 평가, 포즈 보정, 저장

실행:
    pytest test_elm.py
"""

import numpy as np
import pandas as pd
import pytest

from modules.errors import ConfigError, ShapeError
from modules.evaluation.metrics import kfold_split, mse
from modules.numeric.rng import Xoshiro256
from modules.pose.backbone import backbone_hash, extract_features, init_backbone
from modules.pose.elm import (
    DEFAULT_RIDGE, KERNELS, elm_predict, elm_train, evaluate_fold, kernel_activation,
    lightest_within, load_elm, neuron_sweep, refine_poses, resolve_lambda, save_elm,
)
from modules.synth.dataset import load_annotated


@pytest.fixture
def affine_data():
    r = Xoshiro256(21)
    X = r.normal((40, 3))
    A = r.normal((3, 16))
    c = r.normal(16)
    return X, X @ A + c


# ─── 학습 / 예측 ──────────────────────────────────────────────────────────────

def test_linear_kernel_recovers_affine_map(affine_data):
    X, T = affine_data
    model = elm_train(X, T, "linear", n_hidden=10, seed=3)
    assert mse(T, elm_predict(model, X)) < 1e-12


def test_tanh_interpolates_when_hidden_equals_samples():
    r = Xoshiro256(8)
    X = r.normal((50, 8))
    T = r.normal((50, 16))
    model = elm_train(X, T, "tanh", n_hidden=50, seed=1)
    assert mse(T, elm_predict(model, X)) < 1e-4


@pytest.mark.parametrize("kernel", KERNELS)
def test_every_kernel_trains(affine_data, kernel):
    X, T = affine_data
    model = elm_train(X, T, kernel, n_hidden=60, seed=0)
    assert model.beta.shape == (60, 16)
    assert model.feature_dim == 3
    assert np.all(np.isfinite(elm_predict(model, X)))


def test_rbf_centers_topped_up_beyond_samples(affine_data):
    X, T = affine_data
    model = elm_train(X, T, "rbf", n_hidden=55, seed=2)
    assert model.centers.shape == (55, 3)
    assert np.all((model.widths >= 0.1) & (model.widths <= 10.0))
    H = kernel_activation(model, X)
    assert H.shape == (40, 55)
    assert np.all((H > 0) & (H <= 1))


def test_same_seed_same_model(affine_data):
    X, T = affine_data
    a = elm_train(X, T, "tanh", 30, seed=4)
    b = elm_train(X, T, "tanh", 30, seed=4)
    assert np.array_equal(a.beta, b.beta)


def test_ridge_shrinks_output_weights(affine_data):
    X, T = affine_data
    small = elm_train(X, T, "rbf_l2", 30, lam=1e-4, seed=6)
    large = elm_train(X, T, "rbf_l2", 30, lam=1.0, seed=6)
    assert np.linalg.norm(large.beta) < np.linalg.norm(small.beta)


def test_ridge_solution_approaches_unregularized(affine_data):
    X, T = affine_data
    plain = elm_train(X, T, "rbf", 8, seed=6)
    dist = [np.linalg.norm(elm_train(X, T, "rbf_l2", 8, lam=lam, seed=6).beta - plain.beta)
            for lam in (1e-2, 1e-6, 1e-10)]
    assert dist[0] > dist[1] > dist[2]


def test_lambda_rules():
    assert resolve_lambda("rbf_l2", None) == DEFAULT_RIDGE
    assert resolve_lambda("tanh", None) == 0.0
    assert resolve_lambda("linear", 0) == 0.0
    with pytest.raises(ConfigError):
        resolve_lambda("rbf_l2", 0.0)
    with pytest.raises(ConfigError):
        resolve_lambda("rbf", 0.1)
    with pytest.raises(ConfigError):
        resolve_lambda("sigmoid", None)


def test_training_input_errors(affine_data):
    X, T = affine_data
    with pytest.raises(ConfigError):
        elm_train(X[:1], T[:1], "linear", 5)
    with pytest.raises(ConfigError):
        elm_train(X, T, "linear", 0)
    with pytest.raises(ConfigError):
        elm_train(np.zeros((4, 0)), np.zeros((4, 16)), "linear", 5)
    with pytest.raises(ShapeError):
        elm_train(X, T[:-1], "linear", 5)
    model = elm_train(X, T, "linear", 5)
    with pytest.raises(ShapeError):
        elm_predict(model, np.zeros((2, 4)))


def test_save_and_load(tmp_path, affine_data):
    X, T = affine_data
    model = elm_train(X, T, "rbf_l2", 20, lam=0.01, seed=9, backbone_hash="abc")
    save_elm(model, tmp_path / "elm.armf")
    loaded = load_elm(tmp_path / "elm.armf")
    assert (loaded.kernel, loaded.n_hidden, loaded.lam, loaded.backbone_hash) == ("rbf_l2", 20, 0.01, "abc")
    np.testing.assert_array_equal(elm_predict(loaded, X), elm_predict(model, X))


# ─── 스윕 ─────────────────────────────────────────────────────────────────────

def test_sweep_row_count():
    r = Xoshiro256(13)
    X = r.normal((25, 3))
    T = r.normal((25, 16))
    result = neuron_sweep(X, T)
    assert len(result.curve) == 76
    assert len(result.folds) == 76 * 5
    assert list(result.curve.columns) == ["kernel", "n_hidden", "mse", "mae"]
    assert result.curve["n_hidden"].min() == 100 and result.curve["n_hidden"].max() == 1000


def test_sweep_duplicates_and_determinism():
    r = Xoshiro256(14)
    X = r.normal((20, 3))
    T = r.normal((20, 16))
    a = neuron_sweep(X, T, kernels=["tanh", "tanh", "rbf"], n_min=10, n_max=30, step=10, folds=4, seed=2)
    b = neuron_sweep(X, T, kernels=["tanh", "rbf"], n_min=10, n_max=30, step=10, folds=4, seed=2)
    assert len(a.curve) == 6
    pd.testing.assert_frame_equal(a.curve, b.curve)


def test_sweep_argument_errors():
    X, T = np.zeros((10, 2)), np.zeros((10, 16))
    with pytest.raises(ConfigError):
        neuron_sweep(X, T, n_min=100, n_max=50)
    with pytest.raises(ConfigError):
        neuron_sweep(X, T, step=0)
    with pytest.raises(ConfigError):
        neuron_sweep(X[:3], T[:3], folds=5)


def test_lightest_within_tolerance():
    curve = pd.DataFrame({
        "kernel": ["tanh"] * 4,
        "n_hidden": [100, 150, 200, 250],
        "mse": [2.0, 1.04, 1.0, 1.2],
        "mae": [1.0] * 4,
    })
    row = lightest_within(curve, 0.05).iloc[0]
    assert row["n_hidden"] == 150
    assert row["best_n_hidden"] == 200
    assert row["best_mse"] == pytest.approx(1.0)
    assert lightest_within(curve, 0.0).iloc[0]["n_hidden"] == 200


# ─── 백본과 연결 ──────────────────────────────────────────────────────────────

def test_evaluate_fold_records(tiny_data):
    _, images, targets = load_annotated(tiny_data)
    backbone = init_backbone("plain", 32, seed=0, head_bias=targets.mean(axis=0))
    val_idx = kfold_split(len(images), 3, seed=0)[0]
    records = evaluate_fold(backbone, images, targets, val_idx, fold=0, kernels=KERNELS, n_hidden=20)
    assert [r.context["model"] for r in records] == ["backbone-head"] + [f"elm-{k}" for k in KERNELS]
    assert all(r.context["stage"] == "refine" and r.context["fold"] == 0 for r in records)
    assert all(np.isfinite(r.mse) for r in records)


def test_refine_poses_checks_backbone(tiny_data):
    ids, images, targets = load_annotated(tiny_data)
    backbone = init_backbone("scconv", 32, seed=0)
    feats = extract_features(backbone, images)
    elm = elm_train(feats, targets, "linear", 10, backbone_hash=backbone_hash(backbone))
    poses = refine_poses(backbone, elm, images, ids)
    assert [p.frame_id for p in poses] == ids.tolist()
    assert poses[0].keypoints().shape == (8, 2)

    other = init_backbone("scconv", 32, seed=1)
    with pytest.raises(ConfigError):
        refine_poses(other, elm, images)
    narrow = elm_train(feats[:, :5], targets, "linear", 10)
    with pytest.raises(ShapeError):
        refine_poses(backbone, narrow, images)
