"""Full metric evaluation of a trained model, serialized as one report."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..datasets.generate import Dataset
from ..errors import MetricDegenerateError
from ..model import VaeModel
from .codes import build_code_table
from .dci import dci
from .downstream import downstream_accuracy
from .factorvae import factorvae_score
from .mig import adapted_mig, mig_original
from .theory import (
    consistency_estimator,
    model_encode_fn,
    nontriviality_estimator,
    restrictiveness_estimator,
)

DCI_NOTE = (
    "dci importance from L1 linear probes (deterministic), "
    "not tree ensembles"
)


@dataclass(frozen=True)
class MetricOptions:
    votes: int = 1000
    samples_per_vote: int = 64
    bins: int = 20
    theory_trials: int = 2048
    dci_c: float = 1.0


@dataclass
class MetricsReport:
    factorvae_score: float
    adapted_mig: float
    adapted_mig_raw: float
    mig_original: float
    dci_disentanglement: float
    dci_completeness: float
    downstream_accuracy: dict[str, float]
    consistency: dict[str, float]
    restrictiveness: dict[str, float]
    nontriviality: dict[str, float]
    notes: str = DCI_NOTE

    def __post_init__(self):
        bounded = {
            "factorvae_score": self.factorvae_score,
            "adapted_mig": self.adapted_mig,
            "mig_original": self.mig_original,
            "dci_disentanglement": self.dci_disentanglement,
            "dci_completeness": self.dci_completeness,
            **{f"downstream_accuracy[{k}]": v for k, v in self.downstream_accuracy.items()},
            **{f"nontriviality[{k}]": v for k, v in self.nontriviality.items()},
        }
        for name, value in bounded.items():
            if not np.isfinite(value) or not (0.0 <= value <= 1.0):
                raise MetricDegenerateError(f"{name}={value} outside [0, 1]")
        for name, value in {**self.consistency, **self.restrictiveness}.items():
            if not np.isfinite(value) or value < 0:
                raise MetricDegenerateError(f"estimator {name}={value} invalid")
        if not np.isfinite(self.adapted_mig_raw):
            raise MetricDegenerateError("adapted_mig_raw is non-finite")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


def compute_metrics(
    model: VaeModel,
    spectrum: Dataset,
    train: Dataset,
    test: Dataset,
    options: MetricOptions | None = None,
    seed: int = 0,
) -> MetricsReport:
    """Evaluate one trained model.

    `spectrum` must cover all target-factor combinations (scores are computed
    on the unbiased spectrum); `train`/`test` are the biased and shifted
    splits used for downstream accuracy under covariate shift.
    """
    opts = options or MetricOptions()
    table = build_code_table(model, spectrum)
    train_table = build_code_table(model, train)
    test_table = build_code_table(model, test)

    fv = factorvae_score(
        table, votes=opts.votes, samples_per_vote=opts.samples_per_vote,
        rng=np.random.default_rng(seed),
    )
    amig = adapted_mig(table, bins=opts.bins)
    omig = mig_original(table, bins=opts.bins)
    d_score, c_score = dci(table, c=opts.dci_c, seed=seed)
    downstream = downstream_accuracy(train_table, test_table)

    encode = model_encode_fn(model)
    spec = spectrum.spec
    consistency, restrictiveness, nontriviality = {}, {}, {}
    for name in spec.target_names:
        consistency[name] = consistency_estimator(
            encode, spec, model.partition, name, trials=opts.theory_trials, seed=seed
        )
        restrictiveness[name] = restrictiveness_estimator(
            encode, spec, model.partition, name, trials=opts.theory_trials, seed=seed
        )
        nontriviality[name] = nontriviality_estimator(table, name, bins=opts.bins)

    return MetricsReport(
        factorvae_score=fv.accuracy,
        adapted_mig=amig.value,
        adapted_mig_raw=amig.raw,
        mig_original=omig,
        dci_disentanglement=d_score,
        dci_completeness=c_score,
        downstream_accuracy=downstream,
        consistency=consistency,
        restrictiveness=restrictiveness,
        nontriviality=nontriviality,
    )
