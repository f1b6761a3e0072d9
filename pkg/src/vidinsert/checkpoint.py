"""Versioned binary checkpoint container.

Layout: 8-byte magic, little-endian u32 version, u64 header length, a JSON
header (config, step, RNG state, array index), then the raw array bytes in
index order. Writing the same state twice produces identical bytes.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .validation import CheckpointError

MAGIC = b"VINSCKPT"
VERSION = 1


def save_container(path, header: dict, arrays: dict[str, np.ndarray]) -> None:
    index = []
    blobs = []
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        index.append({"name": name, "dtype": str(arr.dtype), "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    head = dict(header)
    head["arrays"] = index
    payload = json.dumps(head, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(payload)))
        fh.write(payload)
        for blob in blobs:
            fh.write(blob)


def load_container(path) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        try:
            header = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: corrupt header: {exc}") from None
        arrays = {}
        for entry in header.pop("arrays", []):
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            dtype = np.dtype(entry["dtype"])
            raw = fh.read(count * dtype.itemsize)
            if len(raw) != count * dtype.itemsize:
                raise CheckpointError(f"{path}: truncated array {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(raw, dtype=dtype).reshape(entry["shape"]).copy()
    return header, arrays
