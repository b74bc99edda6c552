"""Command-line entry point.

Subcommands: gen-data, make-feedback, train, metrics, eval-grids, report.
Every subcommand is deterministic given its flags and --seed; failures exit
non-zero with a single machine-parseable line ``error: <kind>: <message>`` on
stderr. Relative --out paths are resolved under $DEBIASVAE_OUT_ROOT when set.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

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
from .errors import DebiasVaeError
from .factors import BiasRule
from .trainer import TrainingConfig, train

OUT_ROOT_ENV = "DEBIASVAE_OUT_ROOT"


def _resolve_out(path: str | Path) -> Path:
    path = Path(path)
    root = os.environ.get(OUT_ROOT_ENV)
    if root and not path.is_absolute():
        return Path(root) / path
    return path


def _resolve_checkpoint(path: str | Path) -> Path:
    path = Path(path)
    if path.is_dir():
        return path / "checkpoint.ckpt"
    return path


def _build_rule(spec, args) -> BiasRule | None:
    if args.rule == "none":
        return None
    a, b = spec.target_names[:2]
    if args.rule == "diag":
        rule = BiasRule.diagonal(spec, a, b)
    elif args.rule == "random":
        rule = BiasRule.random(spec, a, b, seed=args.seed)
    else:
        raise DebiasVaeError(f"unknown rule {args.rule!r}")
    if args.reverse:
        rule = rule.reversed()
    if args.offset:
        rule = rule.with_offset(args.offset)
    return rule


def cmd_gen_data(args) -> int:
    spec = family_spec(args.family, palette_seed=args.palette_seed)
    if args.spectrum:
        ds = generate_split(spec, None, args.n, args.seed, split_tag="eval") \
            if args.spectrum_repeats is None else \
            full_spectrum(spec, args.spectrum_repeats, args.seed)
    else:
        rule = _build_rule(spec, args)
        ds = generate_split(spec, rule, args.n, args.seed, split_tag=args.split)
    out = write_dataset(ds, _resolve_out(args.out))
    print(f"wrote {ds.n} samples to {out}")
    return 0


def cmd_make_feedback(args) -> int:
    spec = family_spec(args.family, palette_seed=args.palette_seed)
    targets = tuple(args.targets.split(",")) if args.targets else None
    ds, fs = build_feedback(
        spec, budget=args.budget, targets=targets, seed=args.seed,
        anchors_per_factor=args.anchors,
    )
    out = write_feedback(ds, fs, _resolve_out(args.out))
    print(f"wrote {ds.n} feedback samples ({len(fs.pairs)} pairs) to {out}")
    return 0


def cmd_train(args) -> int:
    config = TrainingConfig.from_json(json.loads(Path(args.config).read_text()))
    dataset = read_dataset(args.data)
    feedback = read_feedback(args.feedback) if args.feedback else None
    out = _resolve_out(args.out)
    result = train(config, dataset, feedback, out_dir=out, resume_from=args.resume)
    final = result.log_rows[-1] if result.log_rows else {}
    print(
        f"trained {config.run_label} seed={config.seed} "
        f"steps={len(result.log_rows)} final_total={final.get('total', float('nan')):.3f} "
        f"-> {result.checkpoint_path}"
    )
    return 0


def _load_model(checkpoint_path: Path):
    from .model import load_checkpoint

    ckpt = load_checkpoint(_resolve_checkpoint(checkpoint_path))
    return ckpt.build_model(), ckpt


def _find_metric_datasets(args):
    data = Path(args.data)
    if (data / "meta.json").exists():
        spectrum = read_dataset(data)
        if not (args.train_data and args.test_data):
            raise DebiasVaeError(
                "--data points at a single dataset; pass --train-data and --test-data too"
            )
        return spectrum, read_dataset(args.train_data), read_dataset(args.test_data)
    expected = {name: data / name for name in ("eval", "train", "test")}
    missing = [str(p) for p in expected.values() if not (p / "meta.json").exists()]
    if missing:
        raise DebiasVaeError(f"missing dataset dirs under --data: {missing}")
    return (
        read_dataset(expected["eval"]),
        read_dataset(expected["train"]),
        read_dataset(expected["test"]),
    )


def cmd_metrics(args) -> int:
    from .metrics.report import MetricOptions, compute_metrics

    model, _ = _load_model(Path(args.checkpoint))
    spectrum, train_ds, test_ds = _find_metric_datasets(args)
    opts = MetricOptions(
        votes=args.votes, samples_per_vote=args.samples_per_vote,
        bins=args.bins, theory_trials=args.trials,
    )
    report = compute_metrics(
        model, spectrum=spectrum, train=train_ds, test=test_ds,
        options=opts, seed=args.seed,
    )
    out = _resolve_out(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json() + "\n")
    if args.csv:
        _append_csv_row(Path(args.csv), args.checkpoint, report)
    print(f"wrote {out}")
    return 0


def _append_csv_row(csv_path: Path, checkpoint: str, report) -> None:
    from .trainer import _flatten_metrics

    row = {"checkpoint": str(checkpoint)}
    row.update(_flatten_metrics(json.loads(report.to_json())))
    csv_path = _resolve_out(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    exists = csv_path.exists()
    with open(csv_path, "a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(row.keys()))
        if not exists:
            writer.writeheader()
        writer.writerow(row)


def cmd_eval_grids(args) -> int:
    from .evalgen import hybrid_grid, reconstruction_grid, traversal_grid

    model, _ = _load_model(Path(args.checkpoint))
    spectrum = read_dataset(args.data)
    recon_src = read_dataset(args.test_data) if args.test_data else spectrum
    out = _resolve_out(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    pick = rng.choice(recon_src.n, size=min(args.count, recon_src.n), replace=False)
    paths = [
        reconstruction_grid(model, recon_src.images[pick], out / "reconstructions.png"),
        hybrid_grid(model, spectrum, out / "hybrids.png")[0],
    ]
    dims = []
    for name in model.partition.block_names:
        dims.extend(model.partition.block_dims(name))
    seed_img = spectrum.images[int(rng.integers(0, spectrum.n))]
    paths.append(traversal_grid(model, seed_img, dims, out / "traversals.png"))
    for p in paths:
        print(f"wrote {p}")
    return 0


_SCALAR_METRICS = (
    "factorvae_score", "adapted_mig", "mig_original",
    "dci_disentanglement", "dci_completeness",
)


def cmd_report(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .trainer import _write_aggregate

    results = Path(args.results)
    cells = sorted(results.glob("*/seed*/metrics.json"))
    if not cells:
        raise DebiasVaeError(f"no metrics.json under {results}")
    _write_aggregate(results)
    out = _resolve_out(args.out) if args.out else results
    out.mkdir(parents=True, exist_ok=True)
    if out != results:
        for name in ("aggregate.csv", "summary.csv"):
            src = results / name
            if src.exists():
                (out / name).write_text(src.read_text())

    by_label: dict[str, list[dict]] = {}
    for path in cells:
        label = path.parent.parent.name
        by_label.setdefault(label, []).append(json.loads(path.read_text()))
    labels = sorted(by_label)

    for metric in _SCALAR_METRICS:
        data = [[cell[metric] for cell in by_label[lab]] for lab in labels]
        fig, ax = plt.subplots(figsize=(1.5 + 1.2 * len(labels), 3.2))
        ax.violinplot(data, showmeans=True)
        ax.set_xticks(range(1, len(labels) + 1), labels, rotation=20)
        ax.set_ylim(-0.05, 1.05)
        ax.set_title(metric)
        fig.tight_layout()
        fig.savefig(out / f"{metric}.png", dpi=120)
        plt.close(fig)

    factors = sorted({k for cells_ in by_label.values() for c in cells_
                      for k in c["downstream_accuracy"]})
    fig, axes = plt.subplots(1, len(factors), figsize=(3.2 * len(factors), 3.2),
                             squeeze=False)
    for ax, factor in zip(axes[0], factors):
        data = [[c["downstream_accuracy"][factor] for c in by_label[lab]]
                for lab in labels]
        ax.violinplot(data, showmeans=True)
        ax.set_xticks(range(1, len(labels) + 1), labels, rotation=20)
        ax.set_ylim(-0.05, 1.05)
        ax.set_title(f"downstream accuracy: {factor}")
    fig.tight_layout()
    fig.savefig(out / "downstream_accuracy.png", dpi=120)
    plt.close(fig)
    print(f"wrote report to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debiasvae",
        description="Train and evaluate debiased VAEs on procedurally biased image data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate a biased/shifted/unbiased split")
    p.add_argument("--family", required=True)
    p.add_argument("--rule", default="diag", choices=["diag", "random", "none"])
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--reverse", action="store_true",
                   help="reverse-correlated variant of the rule")
    p.add_argument("--n", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--palette-seed", type=int, default=0)
    p.add_argument("--split", default="train", choices=["train", "test", "eval"])
    p.add_argument("--spectrum", action="store_true",
                   help="cover every target combination (unbiased eval split)")
    p.add_argument("--spectrum-repeats", type=int, default=None,
                   help="samples per target combination (implies --spectrum)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("make-feedback", help="emulate human feedback pairs + labels")
    p.add_argument("--family", required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--targets", default=None, help="comma-separated target factors")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--palette-seed", type=int, default=0)
    p.add_argument("--anchors", type=int, default=0,
                   help="fixed shared values per factor (0 = fully random; "
                        "1 = one-row/one-column pattern)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_make_feedback)

    p = sub.add_parser("train", help="train one model from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--feedback", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--resume", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("metrics", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True,
                   help="spectrum dataset dir, or a root with eval/ train/ test/")
    p.add_argument("--train-data", default=None)
    p.add_argument("--test-data", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None, help="append a row to this aggregate CSV")
    p.add_argument("--votes", type=int, default=1000)
    p.add_argument("--samples-per-vote", type=int, default=64)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--trials", type=int, default=2048)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("eval-grids", help="emit reconstruction/hybrid/traversal grids")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="spectrum dataset dir")
    p.add_argument("--test-data", default=None, help="source for reconstructions")
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval_grids)

    p = sub.add_parser("report", help="aggregate a results matrix into CSV + plots")
    p.add_argument("--in", dest="results", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DebiasVaeError as err:
        msg = str(err).replace("\n", " ")
        print(f"error: {type(err).__name__}: {msg}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"error: FileNotFoundError: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
