"""Qualitative artifacts: reconstruction grids, latent-arithmetic hybrids,
and latent traversals, emitted as PNG tile grids with JSON sidecars."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .datasets.families import color_factor_name, shape_factor_name
from .datasets.generate import Dataset
from .errors import ConfigError
from .model import VaeModel, images_to_tensor, tensor_to_images

_PAD = 2


def tile_grid(tiles: np.ndarray, pad: int = _PAD, pad_value: int = 32) -> np.ndarray:
    """(R, K, H, W, C) u8 tiles -> one padded grid image."""
    r, k, h, w, c = tiles.shape
    out = np.full(
        (r * (h + pad) + pad, k * (w + pad) + pad, c), pad_value, dtype=np.uint8
    )
    for i in range(r):
        for j in range(k):
            y = pad + i * (h + pad)
            x = pad + j * (w + pad)
            out[y : y + h, x : x + w] = tiles[i, j]
    return out


def _save(path: Path, grid: np.ndarray, sidecar: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(grid).save(path, format="PNG")
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def reconstruct(model: VaeModel, images: np.ndarray) -> np.ndarray:
    """Posterior-mean reconstructions of u8 (N, H, W, C) images."""
    with torch.no_grad():
        means, _ = model.encode(images_to_tensor(images))
        return tensor_to_images(model.decode(means))


def reconstruction_grid(model: VaeModel, images: np.ndarray, out_path) -> Path:
    """Two rows per batch: originals above their reconstructions."""
    recon = reconstruct(model, images)
    tiles = np.stack([images, recon], axis=0)  # (2, B, H, W, C)
    grid = tile_grid(tiles)
    return _save(
        Path(out_path), grid,
        {"kind": "reconstruction", "rows": ["original", "reconstruction"],
         "count": int(images.shape[0])},
    )


def hybrid_codes(
    model: VaeModel,
    x_shape_source: np.ndarray,
    x_color_source: np.ndarray,
    shape_factor: str,
    color_factor: str,
) -> torch.Tensor:
    """Latent assembly: shape block from A, color block from B, nuisance dims
    averaged between the two sources."""
    with torch.no_grad():
        mu_a, _ = model.encode(images_to_tensor(x_shape_source))
        mu_b, _ = model.encode(images_to_tensor(x_color_source))
    part = model.partition
    z = torch.empty_like(mu_a)
    lo, hi = part.block_range(shape_factor)
    z[:, lo:hi] = mu_a[:, lo:hi]
    lo, hi = part.block_range(color_factor)
    z[:, lo:hi] = mu_b[:, lo:hi]
    rest = [d for d in range(part.total_dims)
            if d not in part.block_dims(shape_factor)
            and d not in part.block_dims(color_factor)]
    if rest:
        z[:, rest] = 0.5 * (mu_a[:, rest] + mu_b[:, rest])
    return z


def hybridize(
    model: VaeModel,
    x_shape_source: np.ndarray,
    x_color_source: np.ndarray,
    shape_factor: str,
    color_factor: str,
) -> np.ndarray:
    """Decode one image combining A's shape block with B's color block."""
    z = hybrid_codes(
        model, x_shape_source[None] if x_shape_source.ndim == 3 else x_shape_source,
        x_color_source[None] if x_color_source.ndim == 3 else x_color_source,
        shape_factor, color_factor,
    )
    with torch.no_grad():
        return tensor_to_images(model.decode(z))[0]


def spectrum_sources(dataset: Dataset, factor: str) -> np.ndarray:
    """One representative sample index per value of `factor`."""
    card = dataset.spec.cardinality(factor)
    col = dataset.factor_column(factor)
    idx = np.full(card, -1, dtype=np.int64)
    for v in range(card):
        rows = np.flatnonzero(col == v)
        if len(rows) == 0:
            raise ConfigError(f"dataset has no sample with {factor}={v}")
        idx[v] = rows[0]
    return idx


def hybrid_grid(
    model: VaeModel,
    dataset: Dataset,
    out_path,
    shape_factor: str | None = None,
    color_factor: str | None = None,
) -> tuple[Path, np.ndarray, dict]:
    """Full cross-product: shape sources along the top row, color sources down
    the leftmost column; cell (r, c) combines shape c with color r.

    Returns (path, hybrid tiles (Kc x Ks, H, W, C), sidecar dict)."""
    spec = dataset.spec
    shape_factor = shape_factor or shape_factor_name(spec)
    color_factor = color_factor or color_factor_name(spec)
    shape_idx = spectrum_sources(dataset, shape_factor)
    color_idx = spectrum_sources(dataset, color_factor)
    ks, kc = len(shape_idx), len(color_idx)

    shape_imgs = dataset.images[shape_idx]
    color_imgs = dataset.images[color_idx]
    rep_a = np.repeat(np.arange(kc), ks)  # color source per cell (row-major)
    rep_b = np.tile(np.arange(ks), kc)  # shape source per cell
    z = hybrid_codes(
        model, shape_imgs[rep_b], color_imgs[rep_a], shape_factor, color_factor
    )
    with torch.no_grad():
        cells = tensor_to_images(model.decode(z)).reshape(
            kc, ks, *spec.image_dims
        )
    grid = tile_grid(cells)
    sidecar = {
        "kind": "hybrid",
        "shape_factor": shape_factor,
        "color_factor": color_factor,
        "shape_source_indices": shape_idx.tolist(),
        "color_source_indices": color_idx.tolist(),
        "assembly": "rows: color source; cols: shape source; nuisance averaged",
    }
    path = _save(Path(out_path), grid, sidecar)
    return path, cells, sidecar


def traverse(
    model: VaeModel,
    image: np.ndarray,
    dim: int,
    values: np.ndarray | None = None,
) -> np.ndarray:
    """Decode the seed image's posterior mean with one dim swept over values
    (default: 7 steps across [-3, 3] prior-sigma units)."""
    if values is None:
        values = np.linspace(-3.0, 3.0, 7)
    if not 0 <= dim < model.config.latent_dims:
        raise ConfigError(f"dim {dim} outside latent range")
    with torch.no_grad():
        mu, _ = model.encode(images_to_tensor(image[None] if image.ndim == 3 else image))
        z = mu.repeat(len(values), 1)
        z[:, dim] = torch.as_tensor(np.asarray(values, dtype=np.float32))
        return tensor_to_images(model.decode(z))


def traversal_grid(
    model: VaeModel,
    image: np.ndarray,
    dims: list[int],
    out_path,
    values: np.ndarray | None = None,
) -> Path:
    """One traversal row per dim."""
    if values is None:
        values = np.linspace(-3.0, 3.0, 7)
    rows = np.stack([traverse(model, image, d, values) for d in dims], axis=0)
    grid = tile_grid(rows)
    return _save(
        Path(out_path), grid,
        {"kind": "traversal", "dims": [int(d) for d in dims],
         "values": [float(v) for v in values]},
    )
