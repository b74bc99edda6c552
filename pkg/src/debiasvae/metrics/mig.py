"""Mutual-information-gap scores: the block-constrained variant and the
classic two-best-dims form used for axis-aligned baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codes import CodeTable
from .info import discretize_uniform, entropy, mutual_info_matrix


@dataclass
class MigResult:
    value: float  # clipped to [0, 1]
    raw: float  # pre-clip average, may be negative
    per_factor: dict[str, float]


def _mi_table(table: CodeTable, bins: int) -> tuple[np.ndarray, list[str]]:
    targets = list(table.target_names)
    cols = np.stack([table.factor_column(name) for name in targets], axis=1)
    code_bins = discretize_uniform(table.codes, bins)
    return mutual_info_matrix(code_bins, cols), targets


def adapted_mig(table: CodeTable, bins: int = 20) -> MigResult:
    """Gap between the designated block and the rest, per target factor.

    Per factor: (max MI of a dim inside its block - max MI of a dim outside)
    normalized by the factor entropy; averaged and clipped to [0, 1]. The raw
    (pre-clip) average is kept for logging since gaps may be negative.
    """
    mi, targets = _mi_table(table, bins)
    per_factor = {}
    for j, name in enumerate(targets):
        block = list(table.partition.block_dims(name))
        rest = list(table.partition.complement_dims(name))
        h = entropy(table.factor_column(name))
        if h <= 0:
            per_factor[name] = 0.0
            continue
        gap = mi[block, j].max() - (mi[rest, j].max() if rest else 0.0)
        per_factor[name] = float(gap / h)
    raw = float(np.mean(list(per_factor.values())))
    return MigResult(value=float(np.clip(raw, 0.0, 1.0)), raw=raw, per_factor=per_factor)


def mig_original(table: CodeTable, bins: int = 20) -> float:
    """Classic MIG: normalized gap between the two most informative dims."""
    mi, targets = _mi_table(table, bins)
    gaps = []
    for j, name in enumerate(targets):
        h = entropy(table.factor_column(name))
        if h <= 0:
            gaps.append(0.0)
            continue
        top = np.sort(mi[:, j])[::-1]
        second = top[1] if len(top) > 1 else 0.0
        gaps.append(float((top[0] - second) / h))
    return float(np.mean(gaps))
