"""Desk-scale debiasing benchmark on the glyphs family.

Builds the standard inputs (10k diagonally-biased train split, reverse-
correlated test split, full-spectrum evaluation split, 600-sample feedback),
trains the proposed model, its no-labels ablation, and a plain beta-VAE
baseline over several seeds, and evaluates every cell. All artifacts are
cached on disk, and ``run_matrix`` skips completed cells, so repeated
invocations are cheap.
"""
from __future__ import annotations

from pathlib import Path

from .datasets import (
    build_feedback,
    family_spec,
    full_spectrum,
    generate_split,
    read_dataset,
    read_feedback,
    write_dataset,
    write_feedback,
)
from .factors import BiasRule
from .losses import LossWeights
from .trainer import MatrixInputs, TrainingConfig, run_matrix

DEFAULT_SEEDS = (0, 1, 2)
BASELINE_BETA = 4.0
PROPOSED_LAMBDA = 100.0


def benchmark_inputs(
    root,
    family: str = "glyphs10",
    train_n: int = 10_000,
    test_n: int = 2_000,
    spectrum_repeats: int = 50,
    feedback_budget: int = 600,
    palette_seed: int = 0,
    data_seed: int = 0,
) -> MatrixInputs:
    """Build (or reload from `root`/data) the benchmark datasets."""
    data = Path(root) / "data"
    spec = family_spec(family, palette_seed=palette_seed)
    rule = BiasRule.diagonal(spec, *spec.target_names[:2])

    if (data / "train" / "meta.json").exists():
        train = read_dataset(data / "train")
        test = read_dataset(data / "test")
        spectrum = read_dataset(data / "eval")
        feedback = read_feedback(data / "feedback")
    else:
        train = generate_split(spec, rule, train_n, seed=data_seed, split_tag="train")
        test = generate_split(
            spec, rule.reversed(), test_n, seed=data_seed + 1, split_tag="test"
        )
        spectrum = full_spectrum(spec, spectrum_repeats, seed=data_seed + 2)
        feedback = build_feedback(spec, feedback_budget, seed=data_seed + 3)
        write_dataset(train, data / "train")
        write_dataset(test, data / "test")
        write_dataset(spectrum, data / "eval")
        write_feedback(feedback[0], feedback[1], data / "feedback")
    return MatrixInputs(train=train, feedback=feedback, spectrum=spectrum, test=test)


def benchmark_configs(
    epochs: int = 20,
    lam: float = PROPOSED_LAMBDA,
    lam_neg: float = 1.0,
    baseline_beta: float = BASELINE_BETA,
) -> list[TrainingConfig]:
    proposed = TrainingConfig(
        mode="proposed",
        weights=LossWeights.proposed(lam=lam, lam_neg=lam_neg),
        epochs=epochs,
        label="proposed",
    )
    no_labels = TrainingConfig(
        mode="no_labels",
        weights=LossWeights(lam_mp=lam, lam_pos=0.0, lam_neg=0.0, beta=1.0),
        epochs=epochs,
        label="no_labels",
    )
    baseline = TrainingConfig(
        mode="baseline",
        weights=LossWeights.beta_vae(baseline_beta),
        epochs=epochs,
        label=f"baseline_beta{baseline_beta:g}",
    )
    return [proposed, no_labels, baseline]


def run_benchmark(
    root,
    seeds=DEFAULT_SEEDS,
    epochs: int = 20,
    configs: list[TrainingConfig] | None = None,
    metric_options=None,
) -> Path:
    """Train and evaluate the full matrix; returns the results directory."""
    root = Path(root)
    inputs = benchmark_inputs(root)
    configs = configs if configs is not None else benchmark_configs(epochs=epochs)
    return run_matrix(configs, list(seeds), inputs, root / "results", metric_options)
