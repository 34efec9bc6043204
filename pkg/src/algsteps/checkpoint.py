"""Versioned JSON checkpoints: {parameter name -> shape + row-major floats}."""

import json
from pathlib import Path

import numpy as np

from .tensor import Tensor

FORMAT_NAME = "algsteps-checkpoint"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    """Unreadable, mis-versioned, or internally inconsistent checkpoint."""


def save_checkpoint(path, params, meta=None):
    """Write parameters (dict name -> Tensor or array) plus metadata as JSON."""
    blob = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "meta": meta or {},
        "params": {},
    }
    for name, p in params.items():
        arr = np.asarray(p.data if isinstance(p, Tensor) else p, dtype=np.float64)
        blob["params"][name] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    Path(path).write_text(json.dumps(blob), encoding="utf-8")


def load_checkpoint(path):
    """Read a checkpoint; returns (dict name -> float64 array, meta dict)."""
    try:
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format") != FORMAT_NAME:
        raise CheckpointError(f"{path} is not an {FORMAT_NAME} file")
    if blob.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {blob.get('version')!r} in {path}"
        )
    params = {}
    for name, rec in blob.get("params", {}).items():
        shape = tuple(int(d) for d in rec["shape"])
        data = np.asarray(rec["data"], dtype=np.float64)
        expected = int(np.prod(shape)) if shape else 1
        if data.size != expected:
            raise CheckpointError(
                f"parameter {name!r}: {data.size} values for shape {shape}"
            )
        params[name] = data.reshape(shape)
    return params, blob.get("meta", {})
