"""Model checkpoint container.

Layout (all integers little-endian)::

    bytes 0-7    magic  b"MHNURF\\x00\\x01"
    bytes 8-15   uint64 header length H
    next H bytes UTF-8 JSON header:
                 {"config": {...TrainingConfig fields...},
                  "embeddings": "<path or empty>",
                  "dtype": "<f8",
                  "tensors": [{"name", "shape", "offset", "count"}, ...]}
    remainder    tensor data, float64 little-endian, C order, concatenated
                 in header order; "offset"/"count" are in elements

The header is serialized with sorted keys and no timestamps so identical
models always produce identical bytes.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .model import ModelParams
from .training import TrainingConfig

MAGIC = b"MHNURF\x00\x01"
DTYPE = np.dtype("<f8")


class CheckpointError(ValueError):
    pass


def atomic_write(path: str | Path, data: bytes | str) -> None:
    """Write to a temporary sibling file, then rename over ``path``."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(model: ModelParams, cfg: TrainingConfig, embeddings: str = "") -> bytes:
    if model.facets != cfg.facets or model.hidden_dim != cfg.hidden_dim \
            or model.embedding_dim != cfg.embedding_dim:
        raise CheckpointError("model shape does not match its config")
    entries, blobs, offset = [], [], 0
    for name, arr in model.tensors.items():
        data = np.ascontiguousarray(arr, dtype=DTYPE)
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset, "count": data.size})
        blobs.append(data.tobytes())
        offset += data.size
    header = json.dumps(
        {"config": cfg.to_dict(), "embeddings": str(embeddings), "dtype": DTYPE.str, "tensors": entries},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(header)) + header + b"".join(blobs)


def loads(blob: bytes) -> tuple[ModelParams, TrainingConfig, str]:
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if len(blob) < 16:
        raise CheckpointError("truncated checkpoint header")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    try:
        header = json.loads(blob[16:16 + hlen].decode("utf-8"))
        cfg = TrainingConfig.from_dict(header["config"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    if header.get("dtype") != DTYPE.str:
        raise CheckpointError(f"unsupported dtype {header.get('dtype')!r}")
    expected = sum(e["count"] for e in header["tensors"]) * DTYPE.itemsize
    if len(blob) - 16 - hlen != expected:
        raise CheckpointError(f"checkpoint payload is {len(blob) - 16 - hlen} bytes, expected {expected}")
    data = np.frombuffer(blob, dtype=DTYPE, offset=16 + hlen)
    tensors = {}
    for entry in header["tensors"]:
        start, count = entry["offset"], entry["count"]
        if start + count > data.size:
            raise CheckpointError(f"truncated checkpoint: tensor {entry['name']}")
        tensors[entry["name"]] = data[start:start + count].astype(np.float64).reshape(entry["shape"])
    model = ModelParams(cfg.facets, cfg.embedding_dim, cfg.hidden_dim, tensors)
    try:
        model.validate()
    except ValueError as exc:
        raise CheckpointError(str(exc)) from None
    return model, cfg, header.get("embeddings", "")


def save_checkpoint(path: str | Path, model: ModelParams, cfg: TrainingConfig,
                    embeddings: str = "") -> None:
    atomic_write(path, dumps(model, cfg, embeddings))


def load_checkpoint(path: str | Path) -> tuple[ModelParams, TrainingConfig, str]:
    """Returns ``(model, config, embeddings_path)``."""
    return loads(Path(path).read_bytes())
