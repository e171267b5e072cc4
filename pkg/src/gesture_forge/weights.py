"""JSON weight documents for the GAN and predictor models.

A document names its model kind, records the dimensions, and stores every
array as ``{"shape": [...], "data": [...]}`` in row-major order. Floats are
written with ``repr`` precision so a save/load round trip is exact.
"""
from __future__ import annotations

import json

import numpy as np

from .gan import GanModel
from .predictor import PredictorModel

_GAN_ARRAYS = ("w_ih", "w_hh", "b_h", "w_o", "b_o", "d_w", "mean")
_GRU_ARRAYS = ("w_z", "w_r", "w_h", "w_o", "b_o", "mean", "scale", "lo", "hi", "w0")


def _pack(arr) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "data": arr.ravel().tolist()}


def _unpack(doc) -> np.ndarray:
    return np.array(doc["data"], dtype=float).reshape(doc["shape"])


def gan_to_dict(model: GanModel) -> dict:
    return {
        "kind": "gan",
        "mode": model.mode,
        "dims": {"frames": model.frames, "dim": model.dim, "hidden": model.hidden},
        "amplitude": model.amplitude,
        "d_b": model.d_b,
        "weights": {k: _pack(getattr(model, k)) for k in _GAN_ARRAYS},
    }


def gan_from_dict(doc: dict) -> GanModel:
    if doc.get("kind") != "gan":
        raise ValueError("not a GAN weight document")
    w = {k: _unpack(doc["weights"][k]) for k in _GAN_ARRAYS}
    return GanModel(d_b=float(doc["d_b"]), amplitude=float(doc["amplitude"]), mode=doc["mode"], **w)


def predictor_to_dict(model: PredictorModel) -> dict:
    from .hand import CHANNEL_NAMES

    return {
        "kind": "predictor",
        "dims": {"channels": model.channels, "hidden": model.hidden},
        "channels": list(CHANNEL_NAMES[:model.channels]),
        "weights": {k: _pack(getattr(model, k)) for k in _GRU_ARRAYS},
    }


def predictor_from_dict(doc: dict) -> PredictorModel:
    if doc.get("kind") != "predictor":
        raise ValueError("not a predictor weight document")
    return PredictorModel(**{k: _unpack(doc["weights"][k]) for k in _GRU_ARRAYS})


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True) + "\n"


def save(path, model) -> None:
    doc = gan_to_dict(model) if isinstance(model, GanModel) else predictor_to_dict(model)
    with open(path, "w") as fh:
        fh.write(dumps(doc))


def load(path):
    """Load either model kind from a weight document."""
    with open(path) as fh:
        doc = json.load(fh)
    kind = doc.get("kind") if isinstance(doc, dict) else None
    if kind == "gan":
        return gan_from_dict(doc)
    if kind == "predictor":
        return predictor_from_dict(doc)
    raise ValueError(f"unknown weight document kind {kind!r}")
