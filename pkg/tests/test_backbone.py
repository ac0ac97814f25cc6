import numpy as np
import pytest
import torch

from conftest import check_gradients
from kinesics.backbone import (
    STGCNBackbone,
    backbone_forward,
    extract_features,
    normalize_sequence,
    predict_activity,
    to_model_tensor,
)
from kinesics.dataset import resample_time


def _toy_input(seed=0, t=4):
    rng = np.random.default_rng(seed)
    return rng.standard_normal((t, 2, 5, 3)).astype(np.float32)


def test_forward_shapes(toy_backbone):
    logits, feat = backbone_forward(_toy_input(), toy_backbone)
    assert logits.shape == (3,)
    assert feat.map.shape == toy_backbone.feature_shape()
    assert feat.pooled.shape == (toy_backbone.feature_channels,)


def test_zero_input_finite(toy_backbone):
    logits, feat = backbone_forward(np.zeros((4, 2, 5, 3), np.float32), toy_backbone)
    assert np.isfinite(logits).all()
    assert np.isfinite(feat.map).all()


def test_person_swap_invariance(toy_backbone):
    seq = _toy_input(1)
    logits, _ = backbone_forward(seq, toy_backbone)
    swapped, _ = backbone_forward(seq[:, ::-1].copy(), toy_backbone)
    np.testing.assert_allclose(logits, swapped, atol=1e-5)


def test_forward_deterministic(toy_backbone):
    seq = _toy_input(2)
    a, fa = backbone_forward(seq, toy_backbone)
    b, fb = backbone_forward(seq, toy_backbone)
    assert a.tobytes() == b.tobytes()
    assert fa.map.tobytes() == fb.map.tobytes()


def test_shape_mismatch_names_axis(toy_backbone):
    with pytest.raises(ValueError, match="T="):
        backbone_forward(_toy_input(t=7), toy_backbone)
    bad_joints = np.zeros((4, 2, 6, 3), np.float32)
    with pytest.raises(ValueError, match="V"):
        backbone_forward(bad_joints, toy_backbone)


def test_predict_activity():
    assert predict_activity([0.1, 2.0, -1.0]) == 1
    assert predict_activity([0.5, 0.5, 0.5]) == 0  # tie -> lowest index
    with pytest.raises(ValueError):
        predict_activity([np.nan, 0.0])


def test_softmax_normalization(toy_backbone):
    logits, _ = backbone_forward(_toy_input(3), toy_backbone)
    probs = torch.softmax(torch.from_numpy(logits), dim=0).numpy()
    assert abs(probs.sum() - 1.0) < 1e-6


def test_normalize_sequence_centers_pelvis():
    seq = _toy_input(4) + 5.0
    out = normalize_sequence(seq)
    pelvis_mean = out[:, :, 0, :].mean(axis=(0, 1))
    np.testing.assert_allclose(pelvis_mean, 0.0, atol=1e-5)


def test_normalize_sequence_ignores_padded_person():
    seq = _toy_input(5)
    seq[:, 1] = 0.0  # absent second person stays zero
    out = normalize_sequence(seq)
    assert (out[:, 1] == 0.0).all()
    np.testing.assert_allclose(out[:, 0, 0, :].mean(axis=0), 0.0, atol=1e-5)


def test_to_model_tensor_layout():
    seq = _toy_input(6)
    x = to_model_tensor(seq)
    assert x.shape == (3, 4, 5, 2)
    norm = normalize_sequence(seq)
    np.testing.assert_allclose(x[:, 2, 3, 1].numpy(), norm[2, 1, 3, :], atol=1e-6)


def test_extract_features_matches_forward(toy_backbone, small_spec):
    from kinesics import synthetic
    from kinesics.dataset import DatasetBundle, SampleRecord

    records = [
        SampleRecord(
            frame_dir=f"CC{a:02d}0{2+i}_0.0_1.0", label=a, total_frames=4,
            keypoint=resample_time(
                synthetic.template(a, 8)[:, :, :5, :], 4
            ),
        )
        for i, a in enumerate([2, 4])
    ]
    bundle = DatasetBundle(
        train_names=[r.frame_dir for r in records], val_names=[], records=records
    )
    feats = extract_features(bundle, toy_backbone)
    assert set(feats) == {r.frame_dir for r in records}
    for rec in records:
        _, direct = backbone_forward(rec.keypoint, toy_backbone)
        np.testing.assert_array_equal(feats[rec.frame_dir].map, direct.map)
    again = extract_features(bundle, toy_backbone)
    for name in feats:
        assert feats[name].map.tobytes() == again[name].map.tobytes()


def test_features_batch_independent(toy_backbone):
    seqs = [_toy_input(seed) for seed in (7, 8, 9)]
    singles = [
        toy_backbone.eval()(to_model_tensor(s).unsqueeze(0))[1].detach()
        for s in seqs
    ]
    batched = toy_backbone.eval()(
        torch.stack([to_model_tensor(s) for s in seqs])
    )[1].detach()
    for i, single in enumerate(singles):
        np.testing.assert_allclose(
            batched[i].numpy(), single[0].numpy(), atol=1e-5
        )


def test_backbone_gradient_check(toy_backbone_config, toy_graph):
    torch.manual_seed(0)
    model = STGCNBackbone(toy_backbone_config, toy_graph).double()
    x = torch.randn(2, 3, 4, 5, 2, dtype=torch.float64)
    y = torch.tensor([0, 2])
    criterion = torch.nn.CrossEntropyLoss()
    model.train()

    def loss_fn():
        logits, _ = model(x)
        return criterion(logits, y)

    check_gradients(model, loss_fn, rtol=1e-3)


def test_feature_shape_independent_of_weights(toy_backbone_config, toy_graph):
    torch.manual_seed(1)
    a = STGCNBackbone(toy_backbone_config, toy_graph)
    torch.manual_seed(2)
    b = STGCNBackbone(toy_backbone_config, toy_graph)
    assert a.feature_shape() == b.feature_shape()
    _, feat = backbone_forward(_toy_input(10), a)
    assert feat.map.shape == a.feature_shape()
