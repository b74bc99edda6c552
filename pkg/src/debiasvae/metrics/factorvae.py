"""Majority-vote disentanglement score: fixing one factor collapses the
variance of the dim that encodes it."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MetricDegenerateError
from .codes import CodeTable


@dataclass
class FactorVaeScore:
    accuracy: float  # held-out vote accuracy, the reported score
    train_accuracy: float
    active_dims: tuple[int, ...]


def factorvae_score(
    table: CodeTable,
    votes: int = 1000,
    samples_per_vote: int = 64,
    rng: np.random.Generator | int | None = None,
    prune_rel_std: float = 0.05,
    holdout_frac: float = 0.2,
) -> FactorVaeScore:
    """Majority-vote accuracy of (argmin-variance dim -> fixed factor).

    The table must cover the whole spectrum of target-factor combinations.
    Codes are normalized by their global per-dim std after pruning dims whose
    std is below ``prune_rel_std`` times the mean std. Each vote fixes one
    target factor at a random value, takes ``samples_per_vote`` matching rows
    and records the dim with the smallest normalized variance. The majority
    table is fit on the first 1 - holdout_frac of votes and scored on the
    rest.
    """
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    std = table.codes.std(axis=0)
    active = np.flatnonzero(std >= prune_rel_std * std.mean())
    if len(active) < 2:
        raise MetricDegenerateError(
            f"only {len(active)} active dims after pruning; need >= 2"
        )
    normalized = table.codes[:, active] / std[active]

    targets = list(table.target_names)
    rows_by_value = {
        name: [np.flatnonzero(table.factor_column(name) == v)
               for v in range(table.cardinality(name))]
        for name in targets
    }
    dim_votes = np.zeros(votes, dtype=np.int64)
    factor_votes = np.zeros(votes, dtype=np.int64)
    for i in range(votes):
        j = int(rng.integers(0, len(targets)))
        name = targets[j]
        value = int(rng.integers(0, table.cardinality(name)))
        rows = rows_by_value[name][value]
        if len(rows) == 0:
            raise MetricDegenerateError(
                f"no rows with {name}={value}; table does not cover the spectrum"
            )
        chosen = rng.choice(rows, size=samples_per_vote, replace=len(rows) < samples_per_vote)
        local_var = normalized[chosen].var(axis=0)
        dim_votes[i] = int(np.argmin(local_var))
        factor_votes[i] = j

    n_train = int(round(votes * (1.0 - holdout_frac)))
    counts = np.zeros((len(active), len(targets)), dtype=np.int64)
    np.add.at(counts, (dim_votes[:n_train], factor_votes[:n_train]), 1)
    majority = np.where(counts.sum(axis=1) > 0, counts.argmax(axis=1), -1)
    train_acc = float(
        (majority[dim_votes[:n_train]] == factor_votes[:n_train]).mean()
    )
    test_dims = dim_votes[n_train:]
    test_factors = factor_votes[n_train:]
    accuracy = float((majority[test_dims] == test_factors).mean()) if len(test_dims) else 0.0
    return FactorVaeScore(
        accuracy=accuracy,
        train_accuracy=train_acc,
        active_dims=tuple(int(d) for d in active),
    )
