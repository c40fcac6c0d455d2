"""Versioned binary checkpoint container.

Layout: magic ``BLCK``, u32 format version, u64 JSON header length, the
UTF-8 JSON header, then the tensor payload: every listed tensor as
little-endian float64, concatenated in header order. The header echoes
the model and feature configs and carries the training-state block
(optimizer moments, step counters, RNG states) so training can resume.
Round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .kinematics import FeatureConfig
from .network import ModelConfig, ModelParams

_MAGIC = b"BLCK"
_VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


def _tensor_entries(named: dict[str, np.ndarray], kind: str):
    return [{"name": n, "kind": kind, "shape": list(a.shape)} for n, a in named.items()]


def save_checkpoint(path, params: ModelParams, feature_config: FeatureConfig | None = None,
                    train_state: dict | None = None) -> None:
    """Write params (+ optional optimizer/RNG state) to one file atomically enough.

    train_state, when given: {"epoch": int, "adam_t": int, "best": {...},
    "rng": {...}, "moments_m": {name: array}, "moments_v": {name: array}}.
    Arrays inside train_state are serialized in the payload like tensors.
    """
    listing = _tensor_entries(params.tensors, "trainable")
    listing += _tensor_entries(params.running, "running")
    arrays = list(params.tensors.values()) + list(params.running.values())

    ts_header = None
    if train_state is not None:
        ts_header = {k: v for k, v in train_state.items()
                     if k not in ("moments_m", "moments_v")}
        for kind in ("moments_m", "moments_v"):
            for name, arr in train_state.get(kind, {}).items():
                listing.append({"name": name, "kind": kind, "shape": list(arr.shape)})
                arrays.append(arr)

    header = {
        "format_version": _VERSION,
        "model_config": params.config.to_dict(),
        "feature_config": feature_config.to_dict() if feature_config else None,
        "step": params.step,
        "tensors": listing,
        "train_state": ts_header,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(_MAGIC, _VERSION, len(blob)))
        fh.write(blob)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read a checkpoint: (params, feature_config | None, train_state | None)."""
    with open(path, "rb") as fh:
        magic, version, hlen = _PREFIX.unpack(fh.read(_PREFIX.size))
        if magic != _MAGIC:
            raise ValueError("not a checkpoint file")
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        payload = fh.read()

    params = ModelParams(ModelConfig.from_dict(header["model_config"]))
    params.step = int(header["step"])
    moments = {"moments_m": {}, "moments_v": {}}
    offset = 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(payload, dtype="<f8", count=count,
                            offset=offset).reshape(shape).copy()
        offset += count * 8
        kind = entry["kind"]
        if kind == "trainable":
            params.tensors[entry["name"]] = arr
        elif kind == "running":
            params.running[entry["name"]] = arr
        else:
            moments[kind][entry["name"]] = arr

    fc = header.get("feature_config")
    feature_config = FeatureConfig.from_dict(fc) if fc else None
    train_state = header.get("train_state")
    if train_state is not None:
        train_state = dict(train_state)
        train_state["moments_m"] = moments["moments_m"]
        train_state["moments_v"] = moments["moments_v"]
    return params, feature_config, train_state
