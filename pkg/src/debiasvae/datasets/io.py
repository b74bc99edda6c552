"""Bit-exact on-disk formats for datasets and feedback sets.

Dataset directory layout:
    meta.json    spec, rule, seed, split_tag, N
    images.bin   8-byte magic ``DBVAE001``, u32-LE N,H,W,C, then raw bytes
    factors.csv  header = factor names, one row of integer codes per sample

A feedback directory is a dataset directory plus pairs.csv / labels.csv.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DatasetConsistencyError, DatasetFormatError
from ..factors import BiasRule, FactorSpec
from .generate import Dataset, FeedbackSet

MAGIC = b"DBVAE001"


def write_dataset(ds: Dataset, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = ds.n
    h, w, c = ds.spec.image_dims
    meta = {
        "spec": ds.spec.to_json(),
        "rule": ds.rule.to_json() if ds.rule is not None else None,
        "seed": ds.seed,
        "split_tag": ds.split_tag,
        "n": n,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    with open(out / "images.bin", "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<4I", n, h, w, c))
        fh.write(ds.images.tobytes())
    with open(out / "factors.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ds.spec.names)
        writer.writerows(ds.factors.tolist())
    return out


def read_dataset(in_dir) -> Dataset:
    src = Path(in_dir)
    meta_path = src / "meta.json"
    if not meta_path.exists():
        raise DatasetFormatError(f"missing meta.json in {src}")
    meta = json.loads(meta_path.read_text())
    spec = FactorSpec.from_json(meta["spec"])
    rule = BiasRule.from_json(meta["rule"]) if meta.get("rule") else None

    raw = (src / "images.bin").read_bytes() if (src / "images.bin").exists() else None
    if raw is None:
        raise DatasetFormatError(f"missing images.bin in {src}")
    if len(raw) < len(MAGIC) + 16:
        raise DatasetFormatError("images.bin truncated before header")
    if raw[: len(MAGIC)] != MAGIC:
        raise DatasetFormatError(
            f"bad magic {raw[:len(MAGIC)]!r}, expected {MAGIC!r}"
        )
    n, h, w, c = struct.unpack("<4I", raw[len(MAGIC) : len(MAGIC) + 16])
    payload = raw[len(MAGIC) + 16 :]
    expected = n * h * w * c
    if len(payload) != expected:
        raise DatasetFormatError(
            f"payload is {len(payload)} bytes, header implies {expected}"
        )
    if (h, w, c) != spec.image_dims:
        raise DatasetConsistencyError(
            f"images.bin dims {(h, w, c)} != meta spec {spec.image_dims}"
        )
    if n != meta["n"]:
        raise DatasetConsistencyError(f"images.bin N={n} != meta n={meta['n']}")
    images = np.frombuffer(payload, dtype=np.uint8).reshape(n, h, w, c).copy()

    with open(src / "factors.csv", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[int(v) for v in row] for row in reader]
    if tuple(header) != spec.names:
        raise DatasetConsistencyError(
            f"factors.csv header {header} != spec factors {list(spec.names)}"
        )
    if len(rows) != n:
        raise DatasetConsistencyError(
            f"factors.csv has {len(rows)} rows, images.bin header says {n}"
        )
    factors = np.asarray(rows, dtype=np.int64).reshape(n, len(spec.factors))
    ds = Dataset(
        spec=spec,
        images=images,
        factors=factors,
        split_tag=meta["split_tag"],
        rule=rule,
        seed=meta.get("seed"),
    )
    ds.validate(check_marginals=False)
    return ds


def write_feedback(ds: Dataset, fs: FeedbackSet, out_dir) -> Path:
    out = write_dataset(ds, out_dir)
    with open(out / "pairs.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["idx_a", "idx_b", "shared_factor"])
        writer.writerows(fs.pairs)
    with open(out / "labels.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["idx", "factor", "value"])
        writer.writerows(fs.labels)
    meta = json.loads((out / "meta.json").read_text())
    meta["feedback_budget"] = fs.budget
    meta["source_dataset_id"] = fs.source_dataset_id
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def read_feedback(in_dir) -> tuple[Dataset, FeedbackSet]:
    src = Path(in_dir)
    ds = read_dataset(src)
    meta = json.loads((src / "meta.json").read_text())
    with open(src / "pairs.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        pairs = tuple((int(a), int(b), f) for a, b, f in reader)
    with open(src / "labels.csv", newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        labels = tuple((int(i), f, int(v)) for i, f, v in reader)
    fs = FeedbackSet(
        pairs=pairs,
        labels=labels,
        source_dataset_id=meta["source_dataset_id"],
        budget=int(meta["feedback_budget"]),
    )
    fs.validate(ds)
    return ds, fs
