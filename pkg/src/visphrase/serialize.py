"""Versioned JSON container for trained models.

Layout::

    {"format": "visphrase-model", "version": 1, "variant": "...",
     "params": {...}, "matrices": {name: {"shape": [...], "data": [...]}},
     "metadata": {...}}

Matrix data are stored row-major as flat lists of floats.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import FormatError

FORMAT_NAME = "visphrase-model"
FORMAT_VERSION = 1


def encode_matrix(a) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": [float(x) for x in a.ravel(order="C")]}


def decode_matrix(obj: dict) -> np.ndarray:
    try:
        shape = tuple(int(s) for s in obj["shape"])
        data = np.array(obj["data"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad matrix entry: {exc}") from None
    if data.size != int(np.prod(shape)):
        raise FormatError(f"matrix declares shape {shape} but holds {data.size} values")
    return data.reshape(shape)


def write_container(path, variant: str, params: dict, matrices: dict, metadata: dict) -> None:
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "variant": variant,
        "params": params,
        "matrices": {name: encode_matrix(m) for name, m in matrices.items()},
        "metadata": metadata,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")


def read_container(path) -> tuple[str, dict, dict, dict]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not JSON ({exc})") from None
    if doc.get("format") != FORMAT_NAME:
        raise FormatError(f"{path}: not a {FORMAT_NAME} file")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported version {doc.get('version')!r}")
    matrices = {name: decode_matrix(m) for name, m in doc.get("matrices", {}).items()}
    return doc["variant"], doc.get("params", {}), matrices, doc.get("metadata", {})
