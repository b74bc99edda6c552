import numpy as np
import pytest

from debiasvae.datasets import build_feedback, family_spec, generate_split
from debiasvae.factors import BiasRule


@pytest.fixture(scope="session")
def glyph_spec():
    return family_spec("glyphs10")


@pytest.fixture(scope="session")
def glyph_rule(glyph_spec):
    return BiasRule.diagonal(glyph_spec, "shape", "color")


@pytest.fixture(scope="session")
def small_train(glyph_spec, glyph_rule):
    return generate_split(glyph_spec, glyph_rule, 512, seed=11)


@pytest.fixture(scope="session")
def small_feedback(glyph_spec):
    return build_feedback(glyph_spec, 120, seed=12)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
