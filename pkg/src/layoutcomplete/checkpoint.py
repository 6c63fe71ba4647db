"""Checkpoint container.

Layout on disk: 4-byte magic, little-endian u32 format version,
little-endian u64 header length, a UTF-8 JSON header, then the tensors
as little-endian float32 row-major blobs in header order. The header
carries the name-to-shape table plus the model config and any extra
JSON-serializable state (optimizer moments ride along as tensors).
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"LYTC"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | Path, tensors: dict[str, np.ndarray],
                    config: dict, extra: dict | None = None) -> None:
    names = list(tensors)
    header = {
        "config": config,
        "extra": extra or {},
        "tensors": [[name, list(tensors[name].shape)] for name in names],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for name in names:
            arr = np.ascontiguousarray(tensors[name], dtype="<f4")
            fh.write(arr.tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict, dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    (hlen,) = struct.unpack_from("<Q", raw, 8)
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    tensors: dict[str, np.ndarray] = {}
    offset = 16 + hlen
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated blob for {name}")
        arr = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape)
        tensors[name] = arr.astype(np.float32)
        offset = end
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return tensors, header["config"], header["extra"]


def validate_shapes(tensors: dict[str, np.ndarray],
                    expected: dict[str, tuple[int, ...]]) -> None:
    """Every expected name must be present with the expected shape, and
    nothing unexpected may appear."""
    problems = []
    for name, shape in expected.items():
        if name not in tensors:
            problems.append(f"missing tensor {name}")
        elif tuple(tensors[name].shape) != tuple(shape):
            problems.append(
                f"{name}: shape {tuple(tensors[name].shape)} != expected {tuple(shape)}"
            )
    for name in tensors:
        if name not in expected:
            problems.append(f"unexpected tensor {name}")
    if problems:
        raise CheckpointError("; ".join(problems))


def file_sha256(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
