"""Smoke tests for the egadepth python module."""

import numpy as np
import pytest

import egadepth


def test_seeded_init_is_deterministic():
    a = egadepth.seeded_init(4, 5, seed=7, scale=0.5)
    b = egadepth.seeded_init(4, 5, seed=7, scale=0.5)
    assert a.shape == (4, 5)
    assert np.array_equal(a, b)
    assert np.abs(a).max() <= 0.5
    assert not np.array_equal(a, egadepth.seeded_init(4, 5, seed=8, scale=0.5))


def test_matmul_and_softmax():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[5.0], [6.0]])
    assert np.allclose(egadepth.matmul(a, b), [[17.0], [39.0]])

    p = egadepth.softmax_rows(np.array([[1000.0, 0.0, 0.0]]))
    assert p[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-12)


def test_presets_expose_the_documented_shapes():
    lr = egadepth.preset("LR")
    assert lr.num_cameras == 6
    assert lr.heads == 8
    assert lr.reference_len(0) == 440
    assert all(s.projection_dim is None for s in lr.scales)

    mr = egadepth.preset("MR")
    assert mr.reference_len(0) == 1760
    assert mr.scales[0].projection_dim == 880

    hr = egadepth.preset("HR")
    assert hr.reference_len(0) == 7040
    assert hr.scales[0].projection_dim == 1024

    with pytest.raises(ValueError):
        egadepth.preset("XXL")


def test_ega_block_runs_and_weights_normalize():
    c, n_s, length = 16, 10, 30
    params = egadepth.init_ega_params(c, 12, length, seed=3)
    query = egadepth.seeded_init(n_s, c, seed=4)
    reference = egadepth.seeded_init(length, c, seed=5)
    refined, weights = egadepth.ega_block(
        query, reference, params, heads=8, keep_weights=True
    )
    assert refined.shape == (n_s, c)
    assert len(weights) == 8
    for head in weights:
        assert head.shape == (n_s, 12)
        assert np.allclose(head.sum(axis=1), 1.0, atol=1e-12)


def test_zero_attention_weights_leave_the_query_untouched():
    c, n_s, length = 8, 5, 10
    params = egadepth.init_ega_params(c, None, length, seed=9)
    params.w_q = np.zeros((c, c))
    params.w_k = np.zeros((c, c))
    params.w_v = np.zeros((c, c))
    query = egadepth.seeded_init(n_s, c, seed=10)
    reference = egadepth.seeded_init(length, c, seed=11)
    refined, _ = egadepth.ega_block(query, reference, params, heads=2)
    assert np.array_equal(refined, query)


def test_forward_rig_locality():
    config = egadepth.preset("LR")
    config.channels = 8
    features = egadepth.random_features(config, seed=13)
    params = egadepth.init_rig_params(config, seed=14)
    base = egadepth.forward_rig(features, params, config)
    assert len(base) == 30

    perturbed = egadepth.FeatureSet()
    for view in range(6):
        for scale in range(5):
            data = features.at(view, scale, 0)
            if view == 3:
                data = data + 0.5
            perturbed.insert(view, scale, 0, data)
    moved = egadepth.forward_rig(perturbed, params, config)
    # View 0 does not neighbor view 3 on the six-camera ring.
    assert np.array_equal(moved.at(0, 0, 0), base.at(0, 0, 0))
    assert not np.array_equal(moved.at(2, 0, 0), base.at(2, 0, 0))


def test_gradcheck_meets_tolerance():
    case = egadepth.GradCheckCase()
    case.projected = True
    case.temporal_frames = 1
    case.seed = 21
    report = egadepth.gradcheck_ega_block(case)
    assert report["max_rel_err"] < 1e-5
    assert {e["param"] for e in report["entries"]} >= {"w_q", "p_k", "p_v"}


def test_losses():
    rng = np.random.default_rng(5)
    image = rng.random((6, 8, 3))
    mean, per_pixel = egadepth.photometric_loss(image, [image])
    assert abs(mean) < 1e-12
    assert per_pixel.shape == (6, 8)

    depth = np.full((6, 8), 4.0)
    assert egadepth.smoothness_loss(depth, image) == 0.0
    assert egadepth.total_loss(0.2, 1.0) == 0.201


def test_metrics():
    rng = np.random.default_rng(7)
    gt = 0.5 + 79.0 * rng.random((5, 7))
    report = egadepth.evaluate(gt, gt, max_depth=80.0)
    assert (report.abs_rel, report.rmse, report.delta1) == (0.0, 0.0, 1.0)

    scaled = egadepth.median_scale(2.0 * gt, gt)
    assert np.array_equal(scaled, gt)


def test_cost_model_claims():
    lr = egadepth.preset("LR")
    ega_cost = egadepth.cost_ega(lr)
    joint = egadepth.cost_joint_selfattn(lr)
    assert joint["attnmap"] / ega_cost["attnmap"] == pytest.approx(3.0, abs=1e-12)
    assert ega_cost["total"] == egadepth.measured_rig_flops(lr)

    sweep = egadepth.scaling_curve(lr, "ns", [220, 440, 880, 1760])
    assert sweep["degrees"]["attnmap"] == 2  # unprojected path is quadratic

    mr = egadepth.preset("MR")
    sweep = egadepth.scaling_curve(mr, "ns", [220, 440, 880, 1760])
    assert sweep["degrees"]["attnmap"] == 1  # fixed k_s restores linearity
