import math

import numpy as np
import pytest

from oracles import nearest_palette

from debiasvae.datasets import glyph_templates
from debiasvae.metrics import (
    CodeTable,
    consistency_estimator,
    counterexample_suite,
    nontriviality_estimator,
    restrictiveness_estimator,
)
from debiasvae.model import LatentPartition

PARTITION = LatentPartition(16, (("shape", (0, 4)), ("color", (4, 8))))


def glyph_color_index(img, palette):
    return nearest_palette(img, palette)


def glyph_shape_index(img):
    mask = img.any(axis=-1)
    overlaps = [(mask == t).sum() for t in glyph_templates()]
    return int(np.argmax(overlaps))


def encoder_writing(values_fn, dim, spec):
    """Synthetic encoder: one code dim carries values_fn(image), rest zero."""

    def encode(images):
        codes = np.zeros((images.shape[0], 16))
        codes[:, dim] = [values_fn(img) for img in images]
        return codes

    return encode


class TestConsistency:
    def test_constant_encoder_scores_zero(self, glyph_spec):
        encode = lambda images: np.zeros((images.shape[0], 16))
        val = consistency_estimator(encode, glyph_spec, PARTITION, "color", trials=64)
        assert val == 0.0

    def test_block_carrying_its_own_factor_scores_zero(self, glyph_spec):
        # color block carries the color index: pairs share color exactly
        encode = encoder_writing(
            lambda img: glyph_color_index(img, glyph_spec.palette), dim=5, spec=glyph_spec
        )
        val = consistency_estimator(encode, glyph_spec, PARTITION, "color", trials=256)
        assert val == 0.0

    def test_block_carrying_another_factor_scores_two(self, glyph_spec):
        # shape block carries the COLOR index; resampling color decorrelates it
        encode = encoder_writing(
            lambda img: glyph_color_index(img, glyph_spec.palette), dim=1, spec=glyph_spec
        )
        val = consistency_estimator(
            encode, glyph_spec, PARTITION, "shape", trials=10_000, seed=1
        )
        assert abs(val - 2.0) < 0.2

    def test_nonnegative(self, glyph_spec, rng):
        encode = lambda images: rng.normal(size=(images.shape[0], 16))
        val = consistency_estimator(encode, glyph_spec, PARTITION, "shape", trials=128)
        assert val >= 0


class TestRestrictiveness:
    def test_constant_complement_scores_zero(self, glyph_spec):
        encode = encoder_writing(
            lambda img: glyph_shape_index(img), dim=0, spec=glyph_spec
        )  # only the shape block varies; complement is constant
        val = restrictiveness_estimator(encode, glyph_spec, PARTITION, "shape", trials=64)
        assert val == 0.0

    def test_complement_ignoring_factor_scores_zero(self, glyph_spec):
        # complement of shape = color block + nuisance; it carries color only
        encode = encoder_writing(
            lambda img: glyph_color_index(img, glyph_spec.palette), dim=6, spec=glyph_spec
        )
        val = restrictiveness_estimator(
            encode, glyph_spec, PARTITION, "shape", trials=256
        )
        assert val == 0.0

    def test_complement_leaking_factor_scores_two(self, glyph_spec):
        # a nuisance dim carries the shape index; resampling shape moves it
        encode = encoder_writing(
            lambda img: glyph_shape_index(img), dim=12, spec=glyph_spec
        )
        val = restrictiveness_estimator(
            encode, glyph_spec, PARTITION, "shape", trials=10_000, seed=2
        )
        assert abs(val - 2.0) < 0.2

    def test_nonnegative(self, glyph_spec, rng):
        encode = lambda images: rng.normal(size=(images.shape[0], 16))
        val = restrictiveness_estimator(encode, glyph_spec, PARTITION, "color", trials=128)
        assert val >= 0


def make_table(codes, factors, cards=(10, 10)):
    return CodeTable(
        codes=codes,
        factors=factors,
        factor_names=("shape", "color"),
        cardinalities=cards,
        target_mask=(True, True),
        partition=PARTITION,
    )


class TestNontriviality:
    def test_block_copying_factor_scores_one(self, rng):
        n = 10_000
        factors = np.stack([rng.integers(0, 10, n), rng.integers(0, 10, n)], axis=1)
        codes = np.zeros((n, 16))
        codes[:, 0] = factors[:, 0]
        assert nontriviality_estimator(make_table(codes, factors), "shape") == pytest.approx(
            1.0, abs=1e-9
        )

    def test_constant_block_scores_zero(self, rng):
        n = 1000
        factors = np.stack([rng.integers(0, 10, n), rng.integers(0, 10, n)], axis=1)
        codes = np.zeros((n, 16))
        assert nontriviality_estimator(make_table(codes, factors), "shape") == 0.0

    def test_independent_block_stays_below_bias_floor(self, rng):
        n = 10_000
        factors = np.stack([rng.integers(0, 10, n), rng.integers(0, 10, n)], axis=1)
        codes = rng.normal(size=(n, 16))
        val = nontriviality_estimator(make_table(codes, factors), "shape")
        assert val <= 0.05


class TestCounterexample:
    def test_suite_passes(self):
        report = counterexample_suite()
        assert report.passed, report.checks

    def test_trivial_solution_witnesses(self):
        report = counterexample_suite(n=10_000, cardinality=4, seed=0)
        assert report.mp_loss_trivial == 0.0
        assert report.nontriviality_trivial <= 0.01
        assert report.pos_probe_ce_trivial == pytest.approx(math.log(4), abs=1e-6)

    def test_informative_encoder_beats_chance(self):
        report = counterexample_suite(seed=1)
        assert report.pos_probe_ce_informative < report.chance_ce - 0.2
        assert report.nontriviality_informative > 0.5

    def test_report_lines_format(self):
        report = counterexample_suite()
        lines = report.lines()
        assert len(lines) == len(report.checks)
        assert all(line.startswith(("PASS", "FAIL")) for line in lines)
