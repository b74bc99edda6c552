"""Code tables: posterior means paired with ground-truth factor codes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..datasets.generate import Dataset
from ..errors import MetricDegenerateError
from ..model import LatentPartition, VaeModel, images_to_tensor


@dataclass
class CodeTable:
    codes: np.ndarray  # (N, m) float
    factors: np.ndarray  # (N, F) int
    factor_names: tuple[str, ...]
    cardinalities: tuple[int, ...]
    target_mask: tuple[bool, ...]
    partition: LatentPartition
    split_tag: str = "eval"

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.float64)
        self.factors = np.asarray(self.factors, dtype=np.int64)
        if self.codes.shape[0] != self.factors.shape[0]:
            raise MetricDegenerateError(
                f"codes rows {self.codes.shape[0]} != factor rows {self.factors.shape[0]}"
            )
        if not np.isfinite(self.codes).all():
            raise MetricDegenerateError("codes contain non-finite values")

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    @property
    def num_dims(self) -> int:
        return self.codes.shape[1]

    @property
    def target_names(self) -> tuple[str, ...]:
        return tuple(
            name for name, t in zip(self.factor_names, self.target_mask) if t
        )

    def factor_index(self, name: str) -> int:
        return self.factor_names.index(name)

    def factor_column(self, name: str) -> np.ndarray:
        return self.factors[:, self.factor_index(name)]

    def cardinality(self, name: str) -> int:
        return self.cardinalities[self.factor_index(name)]

    def block_codes(self, name: str) -> np.ndarray:
        return self.codes[:, list(self.partition.block_dims(name))]

    def complement_codes(self, name: str) -> np.ndarray:
        return self.codes[:, list(self.partition.complement_dims(name))]


def build_code_table(model: VaeModel, dataset: Dataset, batch_size: int = 512) -> CodeTable:
    """Posterior means of a dataset under a trained encoder."""
    means = []
    with torch.no_grad():
        for lo in range(0, dataset.n, batch_size):
            x = images_to_tensor(dataset.images[lo : lo + batch_size])
            mu, _ = model.encode(x)
            means.append(mu.numpy())
    codes = np.concatenate(means, axis=0) if means else np.zeros((0, model.config.latent_dims))
    return CodeTable(
        codes=codes,
        factors=dataset.factors,
        factor_names=dataset.spec.names,
        cardinalities=dataset.spec.cardinalities,
        target_mask=tuple(f.is_target for f in dataset.spec.factors),
        partition=model.partition,
        split_tag=dataset.split_tag,
    )
