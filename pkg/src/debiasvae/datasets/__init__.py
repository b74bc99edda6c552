from .families import (
    FAMILIES,
    color_factor_name,
    family_spec,
    glyph_templates,
    render_batch,
    render_sample,
    render_with_mask,
    shape_factor_name,
)
from .generate import (
    Dataset,
    FeedbackSet,
    build_feedback,
    full_spectrum,
    generate_split,
    uniformity_pvalue,
)
from .io import read_dataset, read_feedback, write_dataset, write_feedback

__all__ = [
    "FAMILIES",
    "Dataset",
    "FeedbackSet",
    "build_feedback",
    "color_factor_name",
    "family_spec",
    "full_spectrum",
    "generate_split",
    "glyph_templates",
    "read_dataset",
    "read_feedback",
    "render_batch",
    "render_sample",
    "render_with_mask",
    "shape_factor_name",
    "uniformity_pvalue",
    "write_dataset",
    "write_feedback",
]
