"""Regenerate the ten fixed 28x28 glyph template masks shipped with the package.

The templates are plain geometry (disk, ring, square, frame, plus, saltire,
triangle, diamond, horizontal bars, vertical bars) rasterized once and frozen
as an ASCII asset so the dataset family is hermetic and diffable.
"""
from pathlib import Path

import numpy as np

SIZE = 28
OUT = Path(__file__).resolve().parents[1] / "src" / "debiasvae" / "datasets" / "assets" / "glyph_templates.txt"


def build_masks() -> list[np.ndarray]:
    ys, xs = np.mgrid[0:SIZE, 0:SIZE]
    u = (xs + 0.5) / SIZE - 0.5
    v = (ys + 0.5) / SIZE - 0.5
    r = np.hypot(u, v)
    box = (np.abs(u) <= 0.36) & (np.abs(v) <= 0.36)

    disk = r <= 0.32
    ring = (r <= 0.40) & (r >= 0.24)
    square = (np.abs(u) <= 0.28) & (np.abs(v) <= 0.28)
    frame = ((np.abs(u) <= 0.38) & (np.abs(v) <= 0.38)) & ~(
        (np.abs(u) <= 0.22) & (np.abs(v) <= 0.22)
    )
    plus = box & ((np.abs(u) <= 0.11) | (np.abs(v) <= 0.11))
    saltire = box & ((np.abs(u - v) <= 0.13) | (np.abs(u + v) <= 0.13))
    triangle = (v >= -0.34) & (v <= 0.34) & (np.abs(u) <= (v + 0.34) * 0.58)
    diamond = (np.abs(u) + np.abs(v)) <= 0.40
    hbars = box & (
        (np.abs(v + 0.26) <= 0.06) | (np.abs(v) <= 0.06) | (np.abs(v - 0.26) <= 0.06)
    )
    vbars = box & (
        (np.abs(u + 0.26) <= 0.06) | (np.abs(u) <= 0.06) | (np.abs(u - 0.26) <= 0.06)
    )
    return [disk, ring, square, frame, plus, saltire, triangle, diamond, hbars, vbars]


def main() -> None:
    lines = []
    for i, mask in enumerate(build_masks()):
        lines.append(f"# glyph {i}")
        for row in mask:
            lines.append("".join("#" if cell else "." for cell in row))
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text("\n".join(lines) + "\n")
    print(f"wrote {OUT} ({len(build_masks())} templates)")


if __name__ == "__main__":
    main()
