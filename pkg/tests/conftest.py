import numpy as np
import pytest
import torch

from kinesics import synthetic
from kinesics.backbone import BackboneConfig, STGCNBackbone
from kinesics.graph import build_graph

TOY_EDGES = [(0, 1), (1, 2), (2, 3), (3, 4)]


@pytest.fixture(scope="session")
def toy_graph():
    return build_graph(edges=TOY_EDGES, strategy="spatial", num_joints=5)


@pytest.fixture(scope="session")
def toy_backbone_config():
    # V=5 chain, T=4, C'=8: small enough for finite-difference checks
    return BackboneConfig(
        num_classes=3, channels=[8, 8], temporal_kernel=3, dropout=0.0,
        num_frames=4, num_joints=5, num_persons=2,
    )


@pytest.fixture
def toy_backbone(toy_backbone_config, toy_graph):
    torch.manual_seed(0)
    return STGCNBackbone(toy_backbone_config, toy_graph)


@pytest.fixture(scope="session")
def small_spec():
    return synthetic.SyntheticSpec(
        activities=[2, 4, 8, 11], samples_per_activity=5, num_frames=16
    )


@pytest.fixture(scope="session")
def small_bundle(small_spec):
    return synthetic.generate(small_spec)


@pytest.fixture(scope="session")
def small_backbone_config():
    return BackboneConfig(
        num_classes=4, channels=[16, 16, 32], num_frames=16, dropout=0.1
    )


def norm_rel_error(a, b, floor=1e-6):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), floor)


def finite_difference_grads(model, loss_fn, eps=1e-5, samples_per_param=8, seed=0):
    """Central-difference gradients at sampled coordinates of every parameter.

    Returns {name: (indices, fd_values)}.  The model must be in double
    precision and loss_fn a closure over the model's current parameters.
    """
    rng = np.random.default_rng(seed)
    out = {}
    for name, p in model.named_parameters():
        flat = p.data.view(-1)
        k = min(samples_per_param, flat.numel())
        idx = rng.choice(flat.numel(), size=k, replace=False)
        fds = []
        for i in idx:
            orig = flat[i].item()
            flat[i] = orig + eps
            lp = loss_fn().item()
            flat[i] = orig - eps
            lm = loss_fn().item()
            flat[i] = orig
            fds.append((lp - lm) / (2 * eps))
        out[name] = (idx, np.array(fds))
    return out


def check_gradients(model, loss_fn, rtol=1e-3, **kwargs):
    """Assert analytic vs central-difference gradients agree per parameter."""
    model.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {n: p.grad.detach().clone() for n, p in model.named_parameters()}
    fd = finite_difference_grads(model, loss_fn, **kwargs)
    worst = {}
    for name, (idx, fds) in fd.items():
        ans = analytic[name].view(-1).numpy()[idx]
        # parameters with exactly-zero true gradient (e.g. a conv bias
        # cancelled by the following batchnorm) only see FD noise
        if np.abs(ans).max() < 1e-8 and np.abs(fds).max() < 1e-6:
            continue
        worst[name] = norm_rel_error(fds, ans)
    bad = {n: e for n, e in worst.items() if e > rtol}
    assert not bad, f"gradient mismatch: {bad}"
    return worst
