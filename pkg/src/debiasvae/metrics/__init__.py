from .codes import CodeTable, build_code_table
from .dci import dci, dci_scores, importance_matrix
from .downstream import downstream_accuracy
from .factorvae import FactorVaeScore, factorvae_score
from .info import discretize_uniform, entropy, histogram_mi, mutual_info_matrix
from .mig import MigResult, adapted_mig, mig_original
from .report import MetricOptions, MetricsReport, compute_metrics
from .theory import (
    CounterexampleReport,
    consistency_estimator,
    counterexample_suite,
    model_encode_fn,
    nontriviality_estimator,
    restrictiveness_estimator,
)

__all__ = [
    "CodeTable",
    "CounterexampleReport",
    "FactorVaeScore",
    "MetricOptions",
    "MetricsReport",
    "MigResult",
    "adapted_mig",
    "build_code_table",
    "compute_metrics",
    "consistency_estimator",
    "counterexample_suite",
    "dci",
    "dci_scores",
    "discretize_uniform",
    "downstream_accuracy",
    "entropy",
    "factorvae_score",
    "histogram_mi",
    "importance_matrix",
    "mig_original",
    "model_encode_fn",
    "mutual_info_matrix",
    "nontriviality_estimator",
    "restrictiveness_estimator",
]
