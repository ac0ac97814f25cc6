import numpy as np
import pytest
import torch

from conftest import check_gradients
from kinesics.head import HeadConfig, KinesicsHead, head_forward, predict_kinesic
from kinesics.taxonomy import KinesicCategory

TOY_SHAPE = (8, 4, 5)


@pytest.fixture
def toy_head():
    torch.manual_seed(0)
    return KinesicsHead(
        HeadConfig(feature_shape=TOY_SHAPE, conv_channels=[8, 8], dropout=0.0)
    )


def _toy_features(seed=0):
    return np.random.default_rng(seed).standard_normal(TOY_SHAPE).astype(np.float32)


def test_forward_shape_and_finite(toy_head):
    logits = head_forward(_toy_features(), toy_head)
    assert logits.shape == (5,)
    assert np.isfinite(logits).all()


def test_zero_features_finite(toy_head):
    logits = head_forward(np.zeros(TOY_SHAPE, np.float32), toy_head)
    assert np.isfinite(logits).all()


def test_forward_deterministic(toy_head):
    f = _toy_features(1)
    assert head_forward(f, toy_head).tobytes() == head_forward(f, toy_head).tobytes()


def test_shape_mismatch_rejected(toy_head):
    with pytest.raises(ValueError, match="shape"):
        head_forward(np.zeros((8, 4, 6), np.float32), toy_head)


def test_softmax_sums_to_one(toy_head):
    logits = head_forward(_toy_features(2), toy_head)
    probs = torch.softmax(torch.from_numpy(logits), dim=0).numpy()
    assert abs(probs.sum() - 1.0) < 1e-6


def test_uniform_logits_tie_break_to_first_category():
    torch.manual_seed(0)
    model = KinesicsHead(HeadConfig(feature_shape=TOY_SHAPE, conv_channels=[4]))
    with torch.no_grad():
        model.fc.weight.zero_()
        model.fc.bias.zero_()
    assert predict_kinesic(_toy_features(3), model) is KinesicCategory.EMBLEM


def test_prediction_within_categories(toy_head):
    for seed in range(5):
        cat = predict_kinesic(_toy_features(seed), toy_head)
        assert cat in toy_head.config.categories


def test_reduced_category_mapping():
    cats = [KinesicCategory.EMBLEM, KinesicCategory.ADAPTOR]
    torch.manual_seed(0)
    model = KinesicsHead(
        HeadConfig(feature_shape=TOY_SHAPE, categories=cats, conv_channels=[4])
    )
    assert model.fc.out_features == 2
    assert predict_kinesic(_toy_features(4), model) in cats


def test_config_rejects_degenerate():
    with pytest.raises(ValueError):
        HeadConfig(feature_shape=TOY_SHAPE, categories=[KinesicCategory.EMBLEM])
    with pytest.raises(ValueError):
        HeadConfig(
            feature_shape=TOY_SHAPE,
            categories=[KinesicCategory.EMBLEM, KinesicCategory.EMBLEM],
        )


def test_head_gradient_check():
    torch.manual_seed(0)
    model = KinesicsHead(
        HeadConfig(feature_shape=TOY_SHAPE, conv_channels=[6], dropout=0.0)
    ).double()
    x = torch.randn(3, *TOY_SHAPE, dtype=torch.float64)
    y = torch.tensor([0, 2, 4])
    criterion = torch.nn.CrossEntropyLoss()
    model.train()
    check_gradients(model, lambda: criterion(model(x), y), rtol=1e-3)


def test_overfit_toy_set_predicts_own_category():
    # oracle: the training run itself reaching 100% train accuracy
    torch.manual_seed(0)
    cats = [KinesicCategory.EMBLEM, KinesicCategory.REGULATOR,
            KinesicCategory.AFFECT_DISPLAY]
    model = KinesicsHead(
        HeadConfig(feature_shape=TOY_SHAPE, categories=cats,
                   conv_channels=[8], dropout=0.0)
    )
    feats = [_toy_features(s) for s in (10, 11, 12)]
    x = torch.from_numpy(np.stack(feats))
    y = torch.tensor([0, 1, 2])
    opt = torch.optim.Adam(model.parameters(), lr=1e-2)
    criterion = torch.nn.CrossEntropyLoss()
    model.train()
    for _ in range(200):
        opt.zero_grad()
        loss = criterion(model(x), y)
        loss.backward()
        opt.step()
        if loss.item() < 1e-3:
            break
    model.eval()
    train_acc = (model(x).argmax(dim=1) == y).float().mean().item()
    assert train_acc == 1.0
    for feat, target in zip(feats, cats):
        assert predict_kinesic(feat, model) is target
