"""Versioned checkpoint container: named tensors + architecture descriptor.

Loading refuses to proceed when the stored descriptor disagrees with the
architecture the caller expects, so stale checkpoints fail loudly instead of
silently shape-mismatching.
"""

from pathlib import Path

import torch

from .errors import CheckpointError

FORMAT_VERSION = 1


def save_weights(path, component: str, descriptor: dict, state_dict: dict) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "component": component,
        "descriptor": descriptor,
        "state": {k: v.cpu() for k, v in state_dict.items()},
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_weights(path, component: str, expected_descriptor: dict) -> dict:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:  # corrupt file, wrong format
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format in {path}")
    if payload.get("component") != component:
        raise CheckpointError(
            f"{path} holds '{payload.get('component')}' weights, expected '{component}'")
    if payload.get("descriptor") != expected_descriptor:
        raise CheckpointError(
            f"architecture descriptor mismatch in {path}: "
            f"stored {payload.get('descriptor')}, expected {expected_descriptor}")
    return payload["state"]
