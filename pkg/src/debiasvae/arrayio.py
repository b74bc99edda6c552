"""Deterministic single-file container for named arrays plus a JSON header.

Layout: 8-byte magic, u64-LE header length, canonical-JSON header, then the
raw array payloads concatenated in name order. Writing the same content twice
produces identical bytes (no timestamps, sorted keys), which backs the
checkpoint round-trip guarantees.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import DatasetFormatError

MAGIC = b"DBVARRS1"


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    names = sorted(arrays)
    payloads = []
    for name in names:
        arr = np.ascontiguousarray(arrays[name])
        blob = arr.tobytes()
        entries.append(
            {
                "name": name,
                "dtype": arr.dtype.str,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(blob),
            }
        )
        payloads.append(blob)
        offset += len(blob)
    header = json.dumps(
        {"meta": meta, "arrays": entries}, sort_keys=True, separators=(",", ":")
    ).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for blob in payloads:
            fh.write(blob)
    return path


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise DatasetFormatError(f"{path}: not a {MAGIC!r} container")
    (hlen,) = struct.unpack("<Q", raw[len(MAGIC) : len(MAGIC) + 8])
    start = len(MAGIC) + 8
    if len(raw) < start + hlen:
        raise DatasetFormatError(f"{path}: truncated header")
    header = json.loads(raw[start : start + hlen].decode())
    payload = raw[start + hlen :]
    arrays = {}
    for entry in header["arrays"]:
        lo, hi = entry["offset"], entry["offset"] + entry["nbytes"]
        if hi > len(payload):
            raise DatasetFormatError(f"{path}: truncated payload at {entry['name']}")
        arrays[entry["name"]] = (
            np.frombuffer(payload[lo:hi], dtype=np.dtype(entry["dtype"]))
            .reshape(entry["shape"])
            .copy()
        )
    return arrays, header["meta"]
