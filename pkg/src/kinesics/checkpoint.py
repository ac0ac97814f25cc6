"""Versioned weight checkpoints shared by backbone and head.

A checkpoint stores named parameter arrays with shape metadata plus the model
config that produced them, and refuses to load against a different config.
"""

import dataclasses
import hashlib

import torch

from .backbone import BackboneConfig
from .head import HeadConfig
from .taxonomy import KinesicCategory

CHECKPOINT_FORMAT_VERSION = "kckpt/1"


class CheckpointError(ValueError):
    pass


def config_to_dict(config) -> dict:
    d = dataclasses.asdict(config)
    if isinstance(config, HeadConfig):
        d["feature_shape"] = list(d["feature_shape"])
        d["categories"] = [int(c) for c in d["categories"]]
    return d


def config_from_dict(kind: str, d: dict):
    if kind == "backbone":
        return BackboneConfig(**d)
    if kind == "head":
        d = dict(d)
        d["categories"] = [KinesicCategory(c) for c in d["categories"]]
        cfg = HeadConfig(**d)
        return cfg
    raise CheckpointError(f"unknown checkpoint kind {kind!r}")


def state_checksum(state_dict) -> str:
    """SHA-256 over parameter names and raw bytes, order-independent."""
    h = hashlib.sha256()
    for name in sorted(state_dict):
        tensor = state_dict[name]
        h.update(name.encode())
        h.update(tensor.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def save_checkpoint(path, kind: str, config, state_dict, extra=None):
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "kind": kind,
        "config": config_to_dict(config),
        "state_dict": {k: v.detach().cpu() for k, v in state_dict.items()},
        "shapes": {k: list(v.shape) for k, v in state_dict.items()},
        "checksum": state_checksum(state_dict),
    }
    if extra:
        payload["extra"] = extra
    torch.save(payload, path)


def load_checkpoint(path, kind: str, expected_config=None):
    """Load (config, state_dict, payload); raises on version/kind/config mismatch."""
    try:
        payload = torch.load(path, weights_only=False)
    except Exception as e:
        raise CheckpointError(f"{path}: unreadable checkpoint: {e}") from e
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version!r}, expected "
            f"{CHECKPOINT_FORMAT_VERSION!r}"
        )
    if payload.get("kind") != kind:
        raise CheckpointError(f"{path}: kind {payload.get('kind')!r}, expected {kind!r}")
    config = config_from_dict(kind, payload["config"])
    if expected_config is not None:
        if config_to_dict(expected_config) != payload["config"]:
            raise CheckpointError(f"{path}: checkpoint config does not match")
    state_dict = payload["state_dict"]
    for name, shape in payload["shapes"].items():
        if list(state_dict[name].shape) != shape:
            raise CheckpointError(f"{path}: shape metadata mismatch for {name}")
    return config, state_dict, payload
