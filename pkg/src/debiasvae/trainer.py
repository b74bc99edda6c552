"""Deterministic, resumable training loop.

All randomness (epoch shuffles, feedback cycling, reparameterization noise)
is derived statelessly from (seed, step), so a checkpoint only needs to store
counters to resume bit-exactly. Probe updates and VAE updates alternate; no
optimizer step touches both parameter sets.
"""
from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .datasets.generate import Dataset, FeedbackSet
from .errors import ConfigError, NonFiniteLossError, TrainingDivergedError
from .losses import FeedbackBatch, LossWeights, probe_update_loss, total_loss
from .model import (
    ProbeBank,
    VaeModel,
    build_model,
    images_to_tensor,
    load_checkpoint,
    model_config_for,
    reparameterize,
    save_checkpoint,
)

MODES = ("proposed", "no_labels", "baseline")


@dataclass(frozen=True)
class TrainingConfig:
    preset: str = "glyphs10"
    mode: str = "proposed"  # exactly one of MODES is active
    weights: LossWeights = field(default_factory=LossWeights.proposed)
    batch_size: int = 128
    feedback_batch_size: int = 16
    epochs: int = 20
    learning_rate: float = 1e-3
    probe_learning_rate: float = 1e-3
    seed: int = 0
    label: str | None = None
    max_steps: int | None = None
    keep_epoch_checkpoints: bool = False
    # Reconstruct the step's feedback batches alongside the train batch
    # (oversamples the augmentation images, which cover the unseen factor
    # combinations the encoder must generalize to).
    reconstruct_feedback_batches: bool = True
    # Feedback pairs share their instance state, so the nuisance block is
    # pulled together with the shared block (pairs vary only in declared
    # factors; nothing else may move).
    mp_covers_nuisance: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        for name in ("batch_size", "feedback_batch_size", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        for name in ("learning_rate", "probe_learning_rate"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.mode == "proposed" and not self.weights.is_recommended_proposed():
            warnings.warn(
                f"weights (lam_mp={self.weights.lam_mp}, lam_pos={self.weights.lam_pos}, "
                f"lam_neg={self.weights.lam_neg}) are outside the recommended set "
                "(lam_mp == lam_pos, lam_neg in {1, 10})",
                stacklevel=2,
            )

    @property
    def run_label(self) -> str:
        return self.label if self.label else self.mode

    def to_json(self) -> dict:
        return {
            "preset": self.preset,
            "mode": self.mode,
            "weights": self.weights.to_json(),
            "batch_size": self.batch_size,
            "feedback_batch_size": self.feedback_batch_size,
            "epochs": self.epochs,
            "learning_rate": self.learning_rate,
            "probe_learning_rate": self.probe_learning_rate,
            "seed": self.seed,
            "label": self.label,
            "max_steps": self.max_steps,
            "keep_epoch_checkpoints": self.keep_epoch_checkpoints,
            "reconstruct_feedback_batches": self.reconstruct_feedback_batches,
            "mp_covers_nuisance": self.mp_covers_nuisance,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TrainingConfig":
        obj = dict(obj)
        weights = LossWeights.from_json(obj.pop("weights"))
        return cls(weights=weights, **obj)


def _hash_ints(*parts) -> int:
    digest = hashlib.blake2s(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _perm(key: tuple, n: int) -> np.ndarray:
    return np.random.default_rng(_hash_ints(*key)).permutation(n)


def stream_take(key: tuple, n_items: int, start: int, count: int) -> np.ndarray:
    """Items at positions [start, start+count) of an endless stream made of
    concatenated seeded permutations of range(n_items)."""
    out: list[int] = []
    cycle, pos = divmod(start, n_items)
    while len(out) < count:
        perm = _perm(key + (cycle,), n_items)
        out.extend(perm[pos : pos + count - len(out)].tolist())
        pos, cycle = 0, cycle + 1
    return np.asarray(out, dtype=np.int64)


def _step_generator(seed: int, step: int) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(_hash_ints("noise", seed, step) % (2**63))
    return gen


@dataclass
class TrainResult:
    model: VaeModel
    probes: ProbeBank
    log_rows: list[dict]
    checkpoint_path: Path | None
    out_dir: Path | None


def _write_log(path: Path, rows: list[dict]) -> None:
    if not rows:
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)


def train(
    config: TrainingConfig,
    dataset: Dataset,
    feedback: tuple[Dataset, FeedbackSet] | None = None,
    out_dir=None,
    resume_from=None,
) -> TrainResult:
    """Train one model; identical (config, data) produce identical results."""
    if config.mode != "baseline" and feedback is None:
        raise ConfigError(f"mode {config.mode!r} requires a feedback set")
    if config.mode == "baseline":
        feedback = None  # baseline never touches feedback

    spec = dataset.spec
    targets = spec.target_names
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    model_config = model_config_for(config.preset)
    if model_config.image_dims != spec.image_dims:
        raise ConfigError(
            f"preset {config.preset!r} expects images {model_config.image_dims}, "
            f"dataset has {spec.image_dims}"
        )
    model, probes = build_model(model_config, spec, config.seed)

    opt_vae = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    opt_probes = torch.optim.Adam(probes.parameters(), lr=config.probe_learning_rate)

    # The reconstruction stream covers the biased train set augmented with the
    # feedback images at their natural proportion.
    train_images = dataset.images
    if feedback is not None:
        fb_ds, fb_set = feedback
        union_images = np.concatenate([train_images, fb_ds.images], axis=0)
        fb_pairs = {name: fb_set.pairs_for(name) for name in targets}
        fb_labels = {name: fb_set.labels_for(name) for name in targets}
    else:
        union_images = train_images
        fb_pairs, fb_labels = {}, {}

    n_union = union_images.shape[0]
    steps_per_epoch = int(np.ceil(n_union / config.batch_size))
    total_steps = steps_per_epoch * config.epochs
    if config.max_steps is not None:
        total_steps = min(total_steps, config.max_steps)

    start_step = 0
    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        # Run length may be extended on resume; everything that shapes the
        # optimization trajectory must match.
        volatile = {"max_steps", "epochs", "keep_epoch_checkpoints", "label"}
        stored = {k: v for k, v in (ckpt.train_config or {}).items() if k not in volatile}
        current = {k: v for k, v in config.to_json().items() if k not in volatile}
        if stored != current:
            raise ConfigError("resume config differs from checkpoint config")
        model = ckpt.build_model()
        probes = ckpt.build_probes()
        opt_vae = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
        opt_probes = torch.optim.Adam(probes.parameters(), lr=config.probe_learning_rate)
        ckpt.restore_optimizer(opt_vae, "vae")
        ckpt.restore_optimizer(opt_probes, "probes")
        start_step = int(ckpt.counters["step"])

    fbs = config.feedback_batch_size
    log_rows: list[dict] = []
    ckpt_path = out / "checkpoint.ckpt" if out is not None else None
    last_good: Path | None = ckpt_path if (resume_from is not None and out) else None

    def write_ckpt(step_done: int, epoch_done: int):
        nonlocal last_good
        if out is None:
            return
        counters = {"seed": config.seed, "step": step_done, "epochs_done": epoch_done}
        save_checkpoint(
            ckpt_path, model, probes,
            optimizers={"vae": opt_vae, "probes": opt_probes},
            counters=counters, train_config=config.to_json(),
        )
        if config.keep_epoch_checkpoints:
            save_checkpoint(
                out / f"checkpoint_epoch_{epoch_done:03d}.ckpt", model, probes,
                optimizers={"vae": opt_vae, "probes": opt_probes},
                counters=counters, train_config=config.to_json(),
            )
        last_good = ckpt_path

    def feedback_batches(step: int, gen: torch.Generator):
        batches: dict[str, FeedbackBatch] = {}
        if feedback is None:
            return batches
        for name in targets:
            pairs = fb_pairs[name]
            if not pairs:
                continue
            take = stream_take(("pairs", config.seed, name), len(pairs), step * fbs, fbs)
            idx_a = np.array([pairs[i][0] for i in take])
            idx_b = np.array([pairs[i][1] for i in take])
            batch = FeedbackBatch(
                factor=name,
                pair_a=images_to_tensor(fb_ds.images[idx_a]),
                pair_b=images_to_tensor(fb_ds.images[idx_b]),
            )
            if config.mode == "proposed":
                labels = fb_labels[name]
                if labels:
                    lt = stream_take(
                        ("labels", config.seed, name), len(labels), step * fbs, fbs
                    )
                    l_idx = np.array([labels[i][0] for i in lt])
                    l_val = np.array([labels[i][1] for i in lt])
                    batch.labeled_x = images_to_tensor(fb_ds.images[l_idx])
                    batch.labeled_y = torch.from_numpy(l_val.astype(np.int64))
            batches[name] = batch
        return batches

    step = start_step
    try:
        while step < total_steps:
            epoch, pos = divmod(step, steps_per_epoch)
            order = _perm(("order", config.seed, epoch), n_union)
            idx = order[pos * config.batch_size : (pos + 1) * config.batch_size]
            images = images_to_tensor(union_images[idx])
            gen = _step_generator(config.seed, step)
            batches = feedback_batches(step, gen)
            if config.reconstruct_feedback_batches and batches:
                extra = []
                for batch in batches.values():
                    extra += [batch.pair_a, batch.pair_b]
                    if batch.labeled_x is not None:
                        extra.append(batch.labeled_x)
                images = torch.cat([images] + extra, dim=0)

            # Step A: probes on detached codes (proposed mode only).
            if config.mode == "proposed":
                probe_loss = None
                for name, batch in batches.items():
                    if batch.labeled_x is None:
                        continue
                    with torch.no_grad():
                        means, logvars = model.encode(batch.labeled_x)
                        z = reparameterize(means, logvars, gen)
                    term = probe_update_loss(probes, z, name, batch.labeled_y)
                    probe_loss = term if probe_loss is None else probe_loss + term
                if probe_loss is not None:
                    opt_probes.zero_grad()
                    probe_loss.backward()
                    opt_probes.step()

            # Step B: VAE update with probes frozen.
            opt_vae.zero_grad()
            loss, breakdown = total_loss(
                model, probes, images, batches, config.weights, gen,
                mp_include_nuisance=config.mp_covers_nuisance,
            )
            loss.backward()
            opt_vae.step()

            row = {"step": step, "epoch": epoch}
            row.update(breakdown.as_row())
            log_rows.append(row)
            step += 1
            if step % steps_per_epoch == 0:
                write_ckpt(step, step // steps_per_epoch)
    except NonFiniteLossError as err:
        if out is not None:
            _write_log(out / "training_log.csv", log_rows)
        raise TrainingDivergedError(
            f"training diverged at step {step}: {err}", checkpoint_path=last_good
        ) from err

    if step % steps_per_epoch != 0:
        write_ckpt(step, step // steps_per_epoch)
    if out is not None:
        _write_log(out / "training_log.csv", log_rows)
    return TrainResult(
        model=model, probes=probes, log_rows=log_rows,
        checkpoint_path=ckpt_path, out_dir=out,
    )


@dataclass
class MatrixInputs:
    """Shared data for a (config x seed) matrix."""

    train: Dataset
    feedback: tuple[Dataset, FeedbackSet] | None
    spectrum: Dataset  # unbiased full-spectrum evaluation split
    test: Dataset  # shifted split for downstream accuracy


def run_matrix(
    configs: list[TrainingConfig],
    seeds: list[int],
    inputs: MatrixInputs,
    out_root,
    metric_options=None,
) -> Path:
    """Train/evaluate every (config, seed) cell; skip completed cells.

    Each cell directory holds checkpoint.ckpt, training_log.csv and
    metrics.json; failures are recorded in FAILED.json and the matrix
    continues. aggregate.csv (one row per cell) and summary.csv (per-config
    means) are rebuilt at the end.
    """
    from .metrics.report import MetricOptions, compute_metrics

    labels = [c.run_label for c in configs]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"matrix configs need distinct labels, got {labels}")
    root = Path(out_root)
    root.mkdir(parents=True, exist_ok=True)
    opts = metric_options or MetricOptions()

    for config in configs:
        for seed in seeds:
            cell = root / config.run_label / f"seed{seed}"
            if (cell / "metrics.json").exists():
                continue
            cell.mkdir(parents=True, exist_ok=True)
            cfg = replace(config, seed=seed)
            try:
                result = train(cfg, inputs.train, inputs.feedback, out_dir=cell)
                report = compute_metrics(
                    result.model,
                    spectrum=inputs.spectrum,
                    train=inputs.train,
                    test=inputs.test,
                    options=opts,
                    seed=seed,
                )
                (cell / "metrics.json").write_text(report.to_json() + "\n")
                failed = cell / "FAILED.json"
                if failed.exists():
                    failed.unlink()
            except Exception as err:  # record and continue with the matrix
                (cell / "FAILED.json").write_text(
                    json.dumps({"error": f"{type(err).__name__}: {err}"}) + "\n"
                )

    _write_aggregate(root)
    return root


def _flatten_metrics(obj: dict) -> dict:
    row = {}
    for key, value in obj.items():
        if isinstance(value, dict):
            for sub, v in value.items():
                row[f"{key}_{sub}"] = v
        elif isinstance(value, (int, float)):
            row[key] = value
    return row


def _write_aggregate(root: Path) -> None:
    rows = []
    for metrics_path in sorted(root.glob("*/seed*/metrics.json")):
        cell = metrics_path.parent
        row = {"label": cell.parent.name, "seed": int(cell.name.removeprefix("seed")),
               "status": "ok"}
        row.update(_flatten_metrics(json.loads(metrics_path.read_text())))
        rows.append(row)
    for failed_path in sorted(root.glob("*/seed*/FAILED.json")):
        cell = failed_path.parent
        rows.append({
            "label": cell.parent.name,
            "seed": int(cell.name.removeprefix("seed")),
            "status": "failed",
        })
    if not rows:
        return
    keys: list[str] = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    with open(root / "aggregate.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        writer.writerows(rows)

    by_label: dict[str, list[dict]] = {}
    for row in rows:
        if row["status"] == "ok":
            by_label.setdefault(row["label"], []).append(row)
    summary = []
    for label, group in sorted(by_label.items()):
        entry = {"label": label, "n": len(group)}
        for key in keys:
            if key in ("label", "seed", "status"):
                continue
            values = [r[key] for r in group if isinstance(r.get(key), (int, float))]
            if values:
                entry[f"mean_{key}"] = float(np.mean(values))
        summary.append(entry)
    if summary:
        skeys: list[str] = []
        for row in summary:
            for k in row:
                if k not in skeys:
                    skeys.append(k)
        with open(root / "summary.csv", "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=skeys)
            writer.writeheader()
            writer.writerows(summary)
