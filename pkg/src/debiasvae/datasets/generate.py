"""Biased/shifted split generation and the emulated human-feedback set."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import DatasetConsistencyError, FactorValueError, FeedbackBudgetError, RuleError
from ..factors import BiasRule, FactorSpec
from .families import render_batch

SPLIT_TAGS = ("train", "test", "eval", "feedback")


@dataclass
class Dataset:
    """Rendered samples plus their generating factor codes."""

    spec: FactorSpec
    images: np.ndarray  # N x H x W x C, uint8
    factors: np.ndarray  # N x num_factors, int64
    split_tag: str
    rule: BiasRule | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.split_tag not in SPLIT_TAGS:
            raise DatasetConsistencyError(
                f"split_tag {self.split_tag!r} not in {SPLIT_TAGS}"
            )
        self.images = np.ascontiguousarray(self.images, dtype=np.uint8)
        self.factors = np.ascontiguousarray(self.factors, dtype=np.int64)

    @property
    def n(self) -> int:
        return self.images.shape[0]

    def factor_column(self, name: str) -> np.ndarray:
        return self.factors[:, self.spec.index(name)]

    def content_id(self) -> str:
        h = hashlib.sha256()
        h.update(self.images.tobytes())
        h.update(self.factors.tobytes())
        return h.hexdigest()[:16]

    def validate(self, check_marginals: bool | None = None) -> None:
        """Check structural invariants; marginal uniformity only for rule-style
        splits (feedback sets are anchored on purpose)."""
        n = self.n
        if self.factors.shape != (n, len(self.spec.factors)):
            raise DatasetConsistencyError(
                f"factors shape {self.factors.shape} != ({n}, {len(self.spec.factors)})"
            )
        if self.images.shape[1:] != self.spec.image_dims:
            raise DatasetConsistencyError(
                f"image dims {self.images.shape[1:]} != spec {self.spec.image_dims}"
            )
        self.spec.check_values(self.factors)
        if self.rule is not None:
            a = self.factor_column(self.rule.factor_a)
            b = self.factor_column(self.rule.factor_b)
            if not np.array_equal(self.rule.apply(a), b):
                raise DatasetConsistencyError(
                    f"rule violated: {self.rule.factor_b} != rule({self.rule.factor_a})"
                )
        if check_marginals is None:
            check_marginals = self.split_tag != "feedback"
        if check_marginals and n > 0:
            bound = 2.0 / np.sqrt(n)
            for name in self.spec.target_names:
                k = self.spec.cardinality(name)
                counts = np.bincount(self.factor_column(name), minlength=k)
                dev = np.abs(counts / n - 1.0 / k).max()
                if dev > bound:
                    raise DatasetConsistencyError(
                        f"marginal of {name!r} deviates {dev:.4f} > {bound:.4f}"
                    )


def uniformity_pvalue(codes: np.ndarray, cardinality: int) -> float:
    """Chi-squared p-value of the hypothesis that codes are uniform."""
    counts = np.bincount(np.asarray(codes, dtype=np.int64), minlength=cardinality)
    stat, p = stats.chisquare(counts)
    return float(p)


def _balanced_codes(n: int, cardinality: int, rng: np.random.Generator) -> np.ndarray:
    """Shuffled codes with per-value counts differing by at most one."""
    reps = int(np.ceil(n / cardinality))
    codes = np.tile(np.arange(cardinality, dtype=np.int64), reps)[:n]
    rng.shuffle(codes)
    return codes


def generate_split(
    spec: FactorSpec,
    rule: BiasRule | None,
    n: int,
    seed: int,
    split_tag: str = "train",
) -> Dataset:
    """Generate n samples with target marginals uniform and nuisance i.i.d.

    With a rule, factor_b is forced to rule(factor_a); with ``rule=None`` all
    target factors are sampled independently (unbiased split).
    """
    if n < 1:
        raise FactorValueError(f"n must be >= 1, got {n}")
    if rule is not None:
        rule.validate_against(spec)
        if rule.factor_a not in spec.target_names or rule.factor_b not in spec.target_names:
            raise RuleError("bias rules couple target factors only")
    rng = np.random.default_rng(seed)
    factors = np.zeros((n, len(spec.factors)), dtype=np.int64)
    forced = rule.factor_b if rule is not None else None
    for i, f in enumerate(spec.factors):
        if f.name == forced:
            continue
        if f.is_target:
            factors[:, i] = _balanced_codes(n, f.cardinality, rng)
        else:
            factors[:, i] = rng.integers(0, f.cardinality, size=n)
    if rule is not None:
        a = factors[:, spec.index(rule.factor_a)]
        factors[:, spec.index(rule.factor_b)] = rule.apply(a)
    render_seeds = rng.integers(0, 2**31, size=n)
    ds = Dataset(
        spec=spec,
        images=render_batch(spec, factors, render_seeds),
        factors=factors,
        split_tag=split_tag,
        rule=rule,
        seed=seed,
    )
    ds.validate()
    return ds


def full_spectrum(
    spec: FactorSpec, repeats: int, seed: int, split_tag: str = "eval"
) -> Dataset:
    """Every combination of target factor values, `repeats` times each,
    nuisance factors i.i.d. uniform. Used for whole-spectrum evaluation."""
    if repeats < 1:
        raise FactorValueError(f"repeats must be >= 1, got {repeats}")
    rng = np.random.default_rng(seed)
    target_idx = [spec.index(name) for name in spec.target_names]
    grids = np.meshgrid(
        *[np.arange(spec.cardinality(name)) for name in spec.target_names],
        indexing="ij",
    )
    combos = np.stack([g.reshape(-1) for g in grids], axis=1)
    combos = np.repeat(combos, repeats, axis=0)
    n = combos.shape[0]
    factors = np.zeros((n, len(spec.factors)), dtype=np.int64)
    for j, i in enumerate(target_idx):
        factors[:, i] = combos[:, j]
    for i, f in enumerate(spec.factors):
        if not f.is_target:
            factors[:, i] = rng.integers(0, f.cardinality, size=n)
    perm = rng.permutation(n)
    factors = factors[perm]
    render_seeds = rng.integers(0, 2**31, size=n)
    ds = Dataset(
        spec=spec,
        images=render_batch(spec, factors, render_seeds),
        factors=factors,
        split_tag=split_tag,
        seed=seed,
    )
    ds.validate()
    return ds


@dataclass
class FeedbackSet:
    """Match pairs and sparse labels referencing a feedback sample dataset."""

    pairs: tuple[tuple[int, int, str], ...]
    labels: tuple[tuple[int, str, int], ...]
    source_dataset_id: str
    budget: int

    @property
    def referenced_indices(self) -> np.ndarray:
        idx = {i for a, b, _ in self.pairs for i in (a, b)}
        idx.update(i for i, _, _ in self.labels)
        return np.array(sorted(idx), dtype=np.int64)

    def pairs_for(self, factor: str) -> list[tuple[int, int]]:
        return [(a, b) for a, b, f in self.pairs if f == factor]

    def labels_for(self, factor: str) -> list[tuple[int, int]]:
        return [(i, v) for i, f, v in self.labels if f == factor]

    def validate(self, dataset: Dataset) -> None:
        if len(self.referenced_indices) > self.budget:
            raise FeedbackBudgetError(
                f"{len(self.referenced_indices)} referenced samples exceed budget {self.budget}"
            )
        if self.source_dataset_id != dataset.content_id():
            raise DatasetConsistencyError("feedback does not reference this dataset")
        for a, b, name in self.pairs:
            col = dataset.spec.index(name)
            if dataset.factors[a, col] != dataset.factors[b, col]:
                raise DatasetConsistencyError(
                    f"pair ({a},{b}) does not share factor {name!r}"
                )
        for i, name, value in self.labels:
            if dataset.factors[i, dataset.spec.index(name)] != value:
                raise DatasetConsistencyError(
                    f"label ({i},{name},{value}) contradicts ground truth"
                )


def build_feedback(
    spec: FactorSpec,
    budget: int,
    targets: tuple[str, ...] | None = None,
    seed: int = 0,
    anchors_per_factor: int = 0,
    label_all_targets: bool = True,
) -> tuple[Dataset, FeedbackSet]:
    """Emulate a human user: render match pairs sharing one target factor.

    Per target factor, budget/(2*len(targets)) pairs share that factor while
    all other factors vary uniformly at random. By default the shared value
    is drawn fresh per pair (``anchors_per_factor=0``); ``anchors_per_factor
    >= 1`` restricts shared values to that many fixed anchors per factor (1
    gives the one-row/one-column pattern, which conv encoders at this scale
    cannot generalize from). Every referenced sample is labeled with its
    shared-factor value, plus all other target factors when
    ``label_all_targets`` (anchored shared-factor labels alone are single-
    class and carry nothing for the positive probes).
    """
    targets = tuple(targets) if targets is not None else spec.target_names
    for t in targets:
        if t not in spec.target_names:
            raise FactorValueError(f"{t!r} is not a target factor of {spec.family}")
    if budget < 2 * len(targets):
        raise FeedbackBudgetError(
            f"budget {budget} < {2 * len(targets)} (2 per target factor)"
        )
    if anchors_per_factor < 0:
        raise FactorValueError("anchors_per_factor must be >= 0")
    rng = np.random.default_rng(seed)
    pairs_per_factor = budget // (2 * len(targets))

    rows: list[np.ndarray] = []
    pair_seeds: list[int] = []
    pairs: list[tuple[int, int, str]] = []
    labels: list[tuple[int, str, int]] = []

    def random_row() -> np.ndarray:
        return np.array(
            [rng.integers(0, f.cardinality) for f in spec.factors], dtype=np.int64
        )

    for name in targets:
        col = spec.index(name)
        card = spec.cardinality(name)
        if anchors_per_factor > 0:
            k = min(anchors_per_factor, card)
            anchors = rng.choice(card, size=k, replace=False)
        else:
            anchors = None
        for p in range(pairs_per_factor):
            shared = int(anchors[p % len(anchors)]) if anchors is not None else int(
                rng.integers(0, card)
            )
            row_a, row_b = random_row(), random_row()
            row_a[col] = shared
            row_b[col] = shared
            ia, ib = len(rows), len(rows) + 1
            rows.extend([row_a, row_b])
            # both members render with one seed: the pair differs only in the
            # declared factors, never in instance state
            pair_seeds.extend([int(rng.integers(0, 2**31))] * 2)
            pairs.append((ia, ib, name))
            for idx, row in ((ia, row_a), (ib, row_b)):
                if label_all_targets:
                    for t in targets:
                        labels.append((idx, t, int(row[spec.index(t)])))
                else:
                    labels.append((idx, name, shared))

    factors = np.stack(rows) if rows else np.zeros((0, len(spec.factors)), np.int64)
    render_seeds = np.asarray(pair_seeds, dtype=np.int64)
    ds = Dataset(
        spec=spec,
        images=render_batch(spec, factors, render_seeds),
        factors=factors,
        split_tag="feedback",
        seed=seed,
    )
    fs = FeedbackSet(
        pairs=tuple(pairs),
        labels=tuple(labels),
        source_dataset_id=ds.content_id(),
        budget=budget,
    )
    fs.validate(ds)
    return ds, fs
