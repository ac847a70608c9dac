"""
pose 패키지 테스트: 합성곱/SCConv/백본 해석적 기울기, 저장 포맷, 학습 손실 감소

실행:
    pytest test_pose.py
"""

import numpy as np
import pytest

from modules.errors import ArtifactIOError, ConfigError, ShapeError
from modules.evaluation.metrics import mse
from modules.numeric.gradcheck import check_param_grads
from modules.numeric.rng import Xoshiro256
from modules.pose.backbone import (
    backbone_backward, backbone_forward, backbone_hash, extract_features, init_backbone,
    load_backbone, predict_keypoints, save_backbone,
)
from modules.pose.layers import avgpool_backward, avgpool_forward, conv2d_backward, conv2d_forward
from modules.pose.scconv import SCConvParams, init_scconv, scconv_backward, scconv_forward
from modules.pose.train import PoseHyper, fit_backbone, keypoint_errors, train_pose
from modules.synth.dataset import load_annotated

TOL = 1e-4


@pytest.fixture(params=[0, 1, 2])
def rng(request) -> Xoshiro256:
    """기울기 검사는 시드 3개로 반복."""
    return Xoshiro256(100 + request.param)


# ─── 합성곱 ───────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("stride, pad", [(1, None), (2, 1), (1, 0)])
def test_conv2d_gradients(rng, stride, pad):
    x = rng.normal((2, 3, 6, 6))
    params = {"w": rng.normal((4, 3, 3, 3)), "b": rng.normal(4)}
    out, _ = conv2d_forward(x, params["w"], params["b"], stride, pad)
    R = rng.normal(out.shape)

    def loss(p):
        return float(np.sum(conv2d_forward(x, p["w"], p["b"], stride, pad)[0] * R))

    _, cache = conv2d_forward(x, params["w"], params["b"], stride, pad)
    _, dw, db = conv2d_backward(R, cache)
    errs = check_param_grads(loss, params, {"w": dw, "b": db})
    assert max(errs.values()) < TOL


def test_conv2d_input_gradient(rng):
    w, b = rng.normal((2, 2, 3, 3)), np.zeros(2)
    x = rng.normal((1, 2, 5, 5))
    R = rng.normal((1, 2, 5, 5))
    _, cache = conv2d_forward(x, w, b)
    dx, _, _ = conv2d_backward(R, cache)
    errs = check_param_grads(lambda p: float(np.sum(conv2d_forward(p["x"], w, b)[0] * R)), {"x": x}, {"x": dx})
    assert errs["x"] < TOL


def test_conv2d_shape_mismatch():
    with pytest.raises(ShapeError):
        conv2d_forward(np.zeros((1, 3, 4, 4)), np.zeros((2, 2, 3, 3)), np.zeros(2))


def test_avgpool_backward_spreads_evenly():
    x = np.arange(16.0).reshape(1, 1, 4, 4)
    assert avgpool_forward(x, 2)[0, 0, 0, 0] == pytest.approx(2.5)
    np.testing.assert_allclose(avgpool_backward(np.ones((1, 1, 2, 2)), 2), 0.25)


# ─── SCConv ───────────────────────────────────────────────────────────────────

def _zero_scconv(channels: int, r: int) -> SCConvParams:
    h = channels // 2
    zeros = {k: np.zeros((h, h, 3, 3)) for k in ("w1", "w2", "w3", "w4")}
    return SCConvParams(**zeros, **{k: np.zeros(h) for k in ("b1", "b2", "b3", "b4")}, r=r)


def test_scconv_zero_weights_give_zero_output(rng):
    out, _ = scconv_forward(rng.normal((2, 8, 8, 8)), _zero_scconv(8, 4))
    assert out.shape == (2, 8, 8, 8)
    assert np.all(out == 0.0)


def test_scconv_preserves_shape(rng):
    p = init_scconv(rng, 16, r=4)
    out, _ = scconv_forward(rng.normal((1, 16, 12, 12)), p)
    assert out.shape == (1, 16, 12, 12)


def test_scconv_shape_errors(rng):
    p = init_scconv(rng, 8, r=4)
    with pytest.raises(ShapeError):
        scconv_forward(rng.normal((1, 8, 6, 6)), p)
    with pytest.raises(ShapeError):
        scconv_forward(rng.normal((1, 6, 8, 8)), p)
    with pytest.raises(ShapeError):
        init_scconv(rng, 7)


def test_scconv_gradients(rng):
    p = init_scconv(rng, 4, r=2)
    for k in ("b1", "b2", "b3", "b4"):
        setattr(p, k, rng.normal(2) * 0.1)
    x = rng.normal((2, 4, 4, 4))
    R = rng.normal((2, 4, 4, 4))
    params = p.to_dict("blk")

    def loss(d):
        return float(np.sum(scconv_forward(x, SCConvParams.from_dict(d, "blk", 2))[0] * R))

    out, cache = scconv_forward(x, p)
    dx, g = scconv_backward(R, cache, p)
    errs = check_param_grads(loss, params, {f"blk.{k}": v for k, v in g.items()})
    assert max(errs.values()) < TOL

    dx_num = check_param_grads(lambda d: float(np.sum(scconv_forward(d["x"], p)[0] * R)), {"x": x}, {"x": dx})
    assert dx_num["x"] < TOL


# ─── 백본 ─────────────────────────────────────────────────────────────────────

def _random_head(model, rng):
    model.params["head.w"] = rng.normal(model.params["head.w"].shape) * 0.5
    return model


@pytest.mark.parametrize("variant", ["scconv", "plain"])
def test_backbone_gradients(rng, variant):
    model = _random_head(init_backbone(variant, 16, seed=1, pool_rate=2), rng)
    images = rng.uniform((2, 16, 16))
    target = rng.normal((2, 16))

    def loss(params):
        model.params = params
        kp = backbone_forward(model, images)[1]
        return float(np.mean((kp - target) ** 2))

    params = dict(model.params)
    _, kp, cache = backbone_forward(model, images)
    resid = kp - target
    grads = backbone_backward(model, cache, 2.0 * resid / resid.size)
    errs = check_param_grads(loss, params, grads)
    assert set(errs) == set(params)
    assert max(errs.values()) < TOL, errs


def test_backbone_output_shapes(rng):
    model = init_backbone("scconv", 32, seed=0)
    feats, kp, _ = backbone_forward(model, rng.uniform((3, 32, 32)))
    assert feats.shape == (3, model.feature_dim) == (3, 32)
    assert kp.shape == (3, 16)
    assert extract_features(model, np.zeros((5, 32, 32), np.uint8), batch=2).shape == (5, 32)


@pytest.mark.parametrize("variant", ["scconv", "plain"])
def test_blank_image_gives_zero_features(variant):
    model = init_backbone(variant, 32, seed=3)
    feats = extract_features(model, np.zeros((2, 32, 32), np.uint8))
    assert np.array_equal(feats, np.zeros((2, 32)))


def test_head_bias_is_initial_prediction():
    bias = np.arange(16.0)
    model = init_backbone("plain", 32, seed=0, head_bias=bias)
    np.testing.assert_allclose(predict_keypoints(model, np.zeros((2, 32, 32))), np.tile(bias, (2, 1)))


def test_backbone_config_errors():
    with pytest.raises(ConfigError):
        init_backbone("resnet", 96)
    with pytest.raises(ConfigError):
        init_backbone("scconv", 20)
    with pytest.raises(ShapeError):
        backbone_forward(init_backbone("plain", 32), np.zeros((1, 16, 16)))


def test_backbone_round_trip(tmp_path, rng):
    model = _random_head(init_backbone("scconv", 32, seed=7), rng)
    save_backbone(model, tmp_path / "m.armf")
    loaded = load_backbone(tmp_path / "m.armf")
    assert loaded.variant == "scconv" and loaded.input_size == 32 and loaded.seed == 7
    assert backbone_hash(loaded) == backbone_hash(model)
    x = rng.uniform((2, 32, 32))
    np.testing.assert_array_equal(predict_keypoints(loaded, x), predict_keypoints(model, x))


def test_load_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.armf"
    bad.write_bytes(b"not a model")
    with pytest.raises(ArtifactIOError):
        load_backbone(bad)


# ─── 학습 ─────────────────────────────────────────────────────────────────────

def test_fit_reduces_loss(tiny_data):
    _, images, targets = load_annotated(tiny_data)
    hyper = PoseHyper(epochs=20, lr=1e-3, batch=4, log_every=0)
    model, history = fit_backbone(images, targets, hyper, seed=0)
    assert len(history) == 20
    assert np.all(np.isfinite(history))
    baseline = mse(targets, np.tile(targets.mean(axis=0), (len(targets), 1)))
    assert mse(targets, predict_keypoints(model, images)) < baseline


def test_train_pose_folds(tiny_data):
    _, images, targets = load_annotated(tiny_data)
    hyper = PoseHyper(epochs=2, batch=4, folds=3, variant="plain", log_every=0)
    result = train_pose(images, targets, hyper)
    assert len(result.models) == len(result.records) == 3
    assert sorted(np.concatenate(result.folds).tolist()) == list(range(12))
    assert [r.context["fold"] for r in result.records] == [0, 1, 2]
    assert result.summary()["model"] == "backbone-plain"
    assert all(len(k) == 8 for k in result.keypoint_mae)

    again = train_pose(images, targets, hyper)
    assert [r.mse for r in again.records] == [r.mse for r in result.records]


def test_train_pose_needs_enough_samples():
    with pytest.raises(ConfigError):
        train_pose(np.zeros((2, 32, 32), np.uint8), np.zeros((2, 16)), PoseHyper(folds=5))


def test_keypoint_errors_are_euclidean():
    y = np.zeros((1, 16))
    p = np.zeros((1, 16))
    p[0, 0:2] = (3.0, 4.0)
    errs = keypoint_errors(y, p)
    assert errs[0] == pytest.approx(5.0)
    assert errs[1:] == [0.0] * 7
    assert mse(y, p) == pytest.approx(25.0 / 16.0)
