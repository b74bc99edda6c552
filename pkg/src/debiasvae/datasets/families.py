"""Procedural image families: glyphs10, sprites, scene.

Each family renders a u8 H x W x C image deterministically from integer
factor codes. Foreground pixels carry exactly the palette color of the color
factor; glyphs/sprites have a black background, the scene family draws wall
and floor bands behind the object.
"""
from __future__ import annotations

from functools import lru_cache
from importlib import resources

import numpy as np

from ..errors import FamilyError
from ..factors import Factor, FactorSpec

FAMILIES = ("glyphs10", "sprites", "scene")

# Maximally separated saturated colors; order is permuted per palette_seed.
GLYPHS10_PALETTE = (
    (255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 0), (0, 255, 255),
    (255, 0, 255), (255, 255, 255), (255, 128, 0), (128, 0, 255), (0, 255, 128),
)
SPRITES_PALETTE = ((255, 0, 0), (0, 255, 0), (0, 0, 255))
SCENE_OBJECT_PALETTE = ((255, 0, 0), (0, 255, 0), (0, 0, 255), (255, 255, 0))
# Band colors, fixed (never permuted). Saturated cube corners keep the
# Bernoulli likelihood informative (mid-gray bands have a huge irreducible
# cross-entropy floor and collapse the posterior); the set is disjoint from
# the object palette, bands are told apart by position.
SCENE_WALL_COLORS = ((0, 255, 255), (255, 0, 255), (255, 255, 255), (0, 0, 0))
SCENE_FLOOR_COLORS = ((255, 255, 255), (0, 0, 0), (0, 255, 255), (255, 0, 255))
SCENE_FLOOR_ROW = 40  # wall band above, floor band below


@lru_cache(maxsize=1)
def glyph_templates() -> np.ndarray:
    """The ten fixed 28x28 binary shape templates shipped as a repo asset."""
    text = (resources.files("debiasvae.datasets") / "assets" / "glyph_templates.txt").read_text()
    masks, rows = [], []
    for line in text.splitlines():
        if line.startswith("#") and "glyph" in line:
            if rows:
                masks.append(rows)
                rows = []
            continue
        if line:
            rows.append([c == "#" for c in line])
    if rows:
        masks.append(rows)
    arr = np.array(masks, dtype=bool)
    if arr.shape != (10, 28, 28):
        raise FamilyError(f"glyph asset malformed: shape {arr.shape}")
    return arr


def _permuted(palette, seed: int):
    if seed == 0:
        return tuple(palette)
    perm = np.random.default_rng(seed).permutation(len(palette))
    return tuple(palette[i] for i in perm)


def family_spec(family: str, palette_seed: int = 0) -> FactorSpec:
    """Resolve a family name to its FactorSpec, permuting the palette per seed.

    glyphs10/sprites palettes are shuffled by ``palette_seed`` (colors are
    re-randomized per run); the scene palette is fixed.
    """
    if family == "glyphs10":
        return FactorSpec(
            family="glyphs10",
            factors=(Factor("shape", 10, True), Factor("color", 10, True)),
            image_dims=(28, 28, 3),
            palette=_permuted(GLYPHS10_PALETTE, palette_seed),
            palette_seed=palette_seed,
        )
    if family == "sprites":
        return FactorSpec(
            family="sprites",
            factors=(
                Factor("shape", 3, True),
                Factor("color", 3, True),
                Factor("pos_x", 8, False),
                Factor("pos_y", 8, False),
                Factor("scale", 4, False),
            ),
            image_dims=(64, 64, 3),
            palette=_permuted(SPRITES_PALETTE, palette_seed),
            palette_seed=palette_seed,
        )
    if family == "scene":
        return FactorSpec(
            family="scene",
            factors=(
                Factor("object_shape", 4, True),
                Factor("object_hue", 4, True),
                Factor("wall_hue", 4, False),
                Factor("floor_hue", 4, False),
                Factor("scale", 4, False),
            ),
            image_dims=(64, 64, 3),
            palette=tuple(SCENE_OBJECT_PALETTE),
            palette_seed=palette_seed,
        )
    raise FamilyError(f"unknown family {family!r}; known: {FAMILIES}")


def _shape_mask(kind: str, size: int, cx: float, cy: float, r: float) -> np.ndarray:
    ys, xs = np.mgrid[0:size, 0:size]
    x = xs + 0.5
    y = ys + 0.5
    if kind == "square":
        return (np.abs(x - cx) <= r * 0.9) & (np.abs(y - cy) <= r * 0.9)
    if kind == "ellipse":
        return ((x - cx) / r) ** 2 + ((y - cy) / (0.72 * r)) ** 2 <= 1.0
    if kind == "heart":
        u = (x - cx) / (1.12 * r)
        w = (cy - y) / (1.12 * r) + 0.25
        return (u**2 + w**2 - 1.0) ** 3 - (u**2) * (w**3) <= 0.0
    if kind == "triangle":
        return (y >= cy - r) & (y <= cy + r) & (np.abs(x - cx) <= (y - (cy - r)) * 0.55)
    raise FamilyError(f"unknown sprite shape {kind!r}")


_SPRITE_SHAPES = ("square", "ellipse", "heart")
_SCENE_SHAPES = ("square", "ellipse", "heart", "triangle")


GLYPH_JITTER = 2  # max glyph translation in pixels, derived from the seed


def _jitter_offsets(seed: int) -> tuple[int, int]:
    # Cheap integer hash; instances of one glyph vary by a small translation
    # (the stand-in for the instance variability of handwritten digits).
    span = 2 * GLYPH_JITTER + 1
    mixed = (np.uint64(seed) * np.uint64(2654435761)) % np.uint64(2**32)
    dx = int(mixed % span) - GLYPH_JITTER
    dy = int((mixed // span) % span) - GLYPH_JITTER
    return dy, dx


def render_with_mask(spec: FactorSpec, factor_values, seed: int = 0):
    """Render one sample, returning (image u8 HxWxC, foreground mask HxW).

    Deterministic in (spec, values, seed). For glyphs the seed translates the
    template by up to +-2 px (instance variation); sprites and scene have
    explicit nuisance factors instead and ignore the seed.
    """
    values = spec.check_values(factor_values).reshape(-1)
    h, w, c = spec.image_dims
    img = np.zeros((h, w, c), dtype=np.uint8)

    if spec.family == "glyphs10":
        shape, color = values
        dy, dx = _jitter_offsets(seed)
        mask = np.roll(glyph_templates()[shape], (dy, dx), axis=(0, 1))
        img[mask] = np.asarray(spec.palette[color], dtype=np.uint8)
        return img, mask

    if spec.family == "sprites":
        shape, color, px, py, scale = values
        cx = 14.0 + 36.0 * px / 7.0
        cy = 14.0 + 36.0 * py / 7.0
        r = 5.0 + 2.0 * scale
        mask = _shape_mask(_SPRITE_SHAPES[shape], h, cx, cy, r)
        img[mask] = np.asarray(spec.palette[color], dtype=np.uint8)
        return img, mask

    if spec.family == "scene":
        shape, hue, wall, floor, scale = values
        img[:SCENE_FLOOR_ROW] = np.asarray(SCENE_WALL_COLORS[wall], dtype=np.uint8)
        img[SCENE_FLOOR_ROW:] = np.asarray(SCENE_FLOOR_COLORS[floor], dtype=np.uint8)
        r = 7.0 + 2.0 * scale
        mask = _shape_mask(_SCENE_SHAPES[shape], h, 32.0, float(SCENE_FLOOR_ROW), r)
        img[mask] = np.asarray(spec.palette[hue], dtype=np.uint8)
        return img, mask

    raise FamilyError(f"unknown family {spec.family!r}")


def render_sample(spec: FactorSpec, factor_values, seed: int = 0) -> np.ndarray:
    """Render one u8 H x W x C image from integer factor codes."""
    return render_with_mask(spec, factor_values, seed)[0]


def render_batch(
    spec: FactorSpec, factor_matrix: np.ndarray, seeds: np.ndarray | None = None
) -> np.ndarray:
    """Render N samples (optionally with per-sample seeds), caching repeats."""
    rows = spec.check_values(factor_matrix).reshape(-1, len(spec.factors))
    h, w, c = spec.image_dims
    out = np.zeros((rows.shape[0], h, w, c), dtype=np.uint8)
    jittered = spec.family == "glyphs10" and seeds is not None
    cache: dict[tuple, np.ndarray] = {}
    for i, row in enumerate(rows):
        seed = int(seeds[i]) if seeds is not None else 0
        key = tuple(row.tolist()) + (_jitter_offsets(seed) if jittered else ())
        img = cache.get(key)
        if img is None:
            img = render_sample(spec, row, seed=seed)
            cache[key] = img
        out[i] = img
    return out


def color_factor_name(spec: FactorSpec) -> str:
    """Name of the target factor indexing into spec.palette."""
    return {"glyphs10": "color", "sprites": "color", "scene": "object_hue"}[spec.family]


def shape_factor_name(spec: FactorSpec) -> str:
    return {"glyphs10": "shape", "sprites": "shape", "scene": "object_shape"}[spec.family]
