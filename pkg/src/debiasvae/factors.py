"""Discrete factors of variation, factor specs, and train/test bias rules.

A ``FactorSpec`` names the generative factors of one procedural image family
(cardinalities, target vs nuisance) together with the image geometry and the
color palette resolved for one run. A ``BiasRule`` couples two target factors
through a bijection; the train split uses it at offset 0, shifted/reversed
variants produce test splits whose factor combinations are disjoint from the
train split.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import FactorValueError, RuleError


@dataclass(frozen=True)
class Factor:
    name: str
    cardinality: int
    is_target: bool

    def __post_init__(self):
        if self.cardinality < 2:
            raise FactorValueError(
                f"factor {self.name!r} needs cardinality >= 2, got {self.cardinality}"
            )


@dataclass(frozen=True)
class FactorSpec:
    """Ordered factors plus geometry/palette of one image family instance."""

    family: str
    factors: tuple[Factor, ...]
    image_dims: tuple[int, int, int]  # (H, W, C)
    palette: tuple[tuple[int, int, int], ...]
    palette_seed: int = 0

    def __post_init__(self):
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise FactorValueError(f"duplicate factor names in {names}")
        if sum(f.is_target for f in self.factors) < 2:
            raise FactorValueError("a spec needs at least 2 target factors")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    @property
    def target_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors if f.is_target)

    @property
    def nuisance_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors if not f.is_target)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(f.cardinality for f in self.factors)

    def index(self, name: str) -> int:
        for i, f in enumerate(self.factors):
            if f.name == name:
                return i
        raise FactorValueError(f"unknown factor {name!r}; have {self.names}")

    def cardinality(self, name: str) -> int:
        return self.factors[self.index(name)].cardinality

    def check_values(self, values) -> np.ndarray:
        """Validate a row (or matrix) of factor codes against cardinalities."""
        arr = np.asarray(values, dtype=np.int64)
        row = arr.reshape(-1, arr.shape[-1]) if arr.ndim > 1 else arr.reshape(1, -1)
        if row.shape[1] != len(self.factors):
            raise FactorValueError(
                f"expected {len(self.factors)} factor values, got {row.shape[1]}"
            )
        cards = np.asarray(self.cardinalities)
        if (row < 0).any() or (row >= cards).any():
            bad = np.argwhere((row < 0) | (row >= cards))[0]
            raise FactorValueError(
                f"factor {self.names[bad[1]]!r} value out of range in row {bad[0]}"
            )
        return arr

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "factors": [
                {"name": f.name, "cardinality": f.cardinality, "is_target": f.is_target}
                for f in self.factors
            ],
            "image_dims": list(self.image_dims),
            "palette": [list(c) for c in self.palette],
            "palette_seed": self.palette_seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FactorSpec":
        return cls(
            family=obj["family"],
            factors=tuple(
                Factor(f["name"], int(f["cardinality"]), bool(f["is_target"]))
                for f in obj["factors"]
            ),
            image_dims=tuple(int(d) for d in obj["image_dims"]),
            palette=tuple(tuple(int(v) for v in c) for c in obj["palette"]),
            palette_seed=int(obj.get("palette_seed", 0)),
        )


@dataclass(frozen=True)
class BiasRule:
    """Injective coupling ``factor_b = mapping[factor_a] + offset (mod K)``.

    ``offset=0`` is the train-split rule; any nonzero offset (or a reversed
    mapping, for even cardinalities) yields a test split sharing no (a, b)
    combination with the train split.
    """

    factor_a: str
    factor_b: str
    mapping: tuple[int, ...]
    offset: int = 0

    def __post_init__(self):
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise RuleError(f"mapping {self.mapping} is not a bijection")

    @property
    def cardinality(self) -> int:
        return len(self.mapping)

    def apply(self, a_values) -> np.ndarray:
        a = np.asarray(a_values, dtype=np.int64)
        if (a < 0).any() or (a >= self.cardinality).any():
            raise FactorValueError("value out of range for bias rule")
        table = (np.asarray(self.mapping, dtype=np.int64) + self.offset) % self.cardinality
        return table[a]

    def with_offset(self, k: int) -> "BiasRule":
        return BiasRule(
            self.factor_a,
            self.factor_b,
            self.mapping,
            (self.offset + k) % self.cardinality,
        )

    def reversed(self) -> "BiasRule":
        """Reverse-correlated variant: value a takes the color of value K-1-a.

        Disjoint from the base rule only for even cardinality; use
        ``with_offset`` for odd cardinalities.
        """
        return BiasRule(self.factor_a, self.factor_b, self.mapping[::-1], self.offset)

    def combinations(self) -> set[tuple[int, int]]:
        a = np.arange(self.cardinality)
        return set(zip(a.tolist(), self.apply(a).tolist()))

    def validate_against(self, spec: FactorSpec) -> None:
        ka = spec.cardinality(self.factor_a)
        kb = spec.cardinality(self.factor_b)
        if ka != kb:
            raise RuleError(
                f"rule needs equal cardinalities, got {self.factor_a}({ka}) vs "
                f"{self.factor_b}({kb})"
            )
        if len(self.mapping) != ka:
            raise RuleError(
                f"mapping length {len(self.mapping)} != cardinality {ka}"
            )

    @classmethod
    def diagonal(cls, spec: FactorSpec, factor_a: str, factor_b: str) -> "BiasRule":
        k = spec.cardinality(factor_a)
        rule = cls(factor_a, factor_b, tuple(range(k)))
        rule.validate_against(spec)
        return rule

    @classmethod
    def random(cls, spec: FactorSpec, factor_a: str, factor_b: str, seed: int) -> "BiasRule":
        k = spec.cardinality(factor_a)
        rng = np.random.default_rng(seed)
        rule = cls(factor_a, factor_b, tuple(int(v) for v in rng.permutation(k)))
        rule.validate_against(spec)
        return rule

    def to_json(self) -> dict:
        return {
            "factor_a": self.factor_a,
            "factor_b": self.factor_b,
            "mapping": list(self.mapping),
            "offset": self.offset,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BiasRule":
        return cls(
            factor_a=obj["factor_a"],
            factor_b=obj["factor_b"],
            mapping=tuple(int(v) for v in obj["mapping"]),
            offset=int(obj["offset"]),
        )
