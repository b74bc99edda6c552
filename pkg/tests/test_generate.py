import numpy as np
import pytest

from debiasvae.datasets import (
    build_feedback,
    family_spec,
    full_spectrum,
    generate_split,
    uniformity_pvalue,
)
from debiasvae.errors import FactorValueError, FeedbackBudgetError
from debiasvae.factors import BiasRule


class TestGenerateSplit:
    def test_empty_input_rejected(self, glyph_spec, glyph_rule):
        with pytest.raises(FactorValueError):
            generate_split(glyph_spec, glyph_rule, 0, seed=0)

    def test_colored_glyph_train_set_at_full_scale(self, glyph_spec, glyph_rule):
        # 60k train split: 28x28x3 images, shape(10) coupled to color(10)
        ds = generate_split(glyph_spec, glyph_rule, 60_000, seed=0)
        assert ds.images.shape == (60_000, 28, 28, 3)
        assert ds.images.dtype == np.uint8
        assert set(np.unique(ds.factor_column("shape"))) == set(range(10))
        combos = set(zip(ds.factor_column("shape").tolist(), ds.factor_column("color").tolist()))
        assert combos == glyph_rule.combinations()

    def test_reverse_rule_test_split_shares_no_combination(self, glyph_spec, glyph_rule):
        train = generate_split(glyph_spec, glyph_rule, 2000, seed=0)
        test = generate_split(
            glyph_spec, glyph_rule.reversed(), 10_000, seed=1, split_tag="test"
        )
        train_combos = set(
            zip(train.factor_column("shape").tolist(), train.factor_column("color").tolist())
        )
        test_combos = set(
            zip(test.factor_column("shape").tolist(), test.factor_column("color").tolist())
        )
        assert not (train_combos & test_combos)

    def test_bias_totality_offset_rule(self, glyph_spec):
        rule = BiasRule.random(glyph_spec, "shape", "color", seed=3)
        train = generate_split(glyph_spec, rule, 3000, seed=5)
        shifted = generate_split(glyph_spec, rule.with_offset(2), 3000, seed=6, split_tag="test")
        t = set(zip(train.factor_column("shape").tolist(), train.factor_column("color").tolist()))
        s = set(zip(shifted.factor_column("shape").tolist(), shifted.factor_column("color").tolist()))
        assert len(t) == 10 and len(s) == 10 and not (t & s)

    def test_marginals_uniform_chi2(self, glyph_spec, glyph_rule):
        ds = generate_split(glyph_spec, glyph_rule, 10_000, seed=2)
        for name in glyph_spec.target_names:
            p = uniformity_pvalue(ds.factor_column(name), glyph_spec.cardinality(name))
            assert p > 0.001

    def test_marginal_deviation_bound(self, glyph_spec, glyph_rule):
        for n in (101, 1000, 9999):
            ds = generate_split(glyph_spec, glyph_rule, n, seed=4)
            for name in glyph_spec.target_names:
                counts = np.bincount(ds.factor_column(name), minlength=10)
                assert np.abs(counts / n - 0.1).max() <= 2 / np.sqrt(n)

    def test_nuisance_iid_uniform(self):
        spec = family_spec("sprites")
        rule = BiasRule.diagonal(spec, "shape", "color")
        ds = generate_split(spec, rule, 20_000, seed=7)
        for name in spec.nuisance_names:
            p = uniformity_pvalue(ds.factor_column(name), spec.cardinality(name))
            assert p > 1e-6

    def test_rule_none_gives_unbiased_split(self, glyph_spec):
        ds = generate_split(glyph_spec, None, 5000, seed=8)
        combos = set(zip(ds.factor_column("shape").tolist(), ds.factor_column("color").tolist()))
        assert len(combos) > 90  # nearly all 100 combos appear

    def test_determinism(self, glyph_spec, glyph_rule):
        a = generate_split(glyph_spec, glyph_rule, 300, seed=9)
        b = generate_split(glyph_spec, glyph_rule, 300, seed=9)
        assert np.array_equal(a.images, b.images)
        assert np.array_equal(a.factors, b.factors)


class TestFullSpectrum:
    def test_covers_every_combination(self, glyph_spec):
        ds = full_spectrum(glyph_spec, repeats=2, seed=0)
        assert ds.n == 200
        combos = set(zip(ds.factor_column("shape").tolist(), ds.factor_column("color").tolist()))
        assert len(combos) == 100


class TestBuildFeedback:
    def test_budget_600_references_600_samples(self, glyph_spec):
        ds, fs = build_feedback(glyph_spec, budget=600, seed=0)
        assert len(fs.referenced_indices) == 600
        assert ds.n == 600

    def test_sprites_budget_1k(self):
        spec = family_spec("sprites")
        ds, fs = build_feedback(spec, budget=1000, seed=0)
        assert len(fs.referenced_indices) == 1000

    def test_every_pair_shares_stated_factor(self, glyph_spec):
        ds, fs = build_feedback(glyph_spec, budget=200, seed=1)
        for a, b, name in fs.pairs:
            col = glyph_spec.index(name)
            assert ds.factors[a, col] == ds.factors[b, col]

    def test_labels_match_ground_truth(self, glyph_spec):
        ds, fs = build_feedback(glyph_spec, budget=200, seed=2)
        for idx, name, value in fs.labels:
            assert ds.factors[idx, glyph_spec.index(name)] == value

    def test_budget_too_small(self, glyph_spec):
        with pytest.raises(FeedbackBudgetError):
            build_feedback(glyph_spec, budget=3, seed=0)

    def test_default_draws_shared_values_across_the_range(self, glyph_spec):
        ds, fs = build_feedback(glyph_spec, budget=400, seed=3)
        col = glyph_spec.index("shape")
        shared = {int(ds.factors[a, col]) for a, b, f in fs.pairs if f == "shape"}
        assert len(shared) > 3

    def test_anchored_geometry_by_flag(self, glyph_spec):
        # one-row/one-column pattern: a single shared value per factor
        ds, fs = build_feedback(glyph_spec, budget=400, seed=3, anchors_per_factor=1)
        for name in glyph_spec.target_names:
            col = glyph_spec.index(name)
            shared = {int(ds.factors[a, col]) for a, b, f in fs.pairs if f == name}
            assert len(shared) == 1

    def test_pair_members_share_render_state(self, glyph_spec):
        # shape-sharing glyph pairs differ only in color, so their foreground
        # masks (template + translation) must coincide exactly
        ds, fs = build_feedback(glyph_spec, budget=200, seed=9)
        shape_pairs = [(a, b) for a, b, f in fs.pairs if f == "shape"]
        assert shape_pairs
        for a, b in shape_pairs:
            assert np.array_equal(ds.images[a].any(axis=-1), ds.images[b].any(axis=-1))

    def test_labels_cover_many_classes_per_factor(self, glyph_spec):
        _, fs = build_feedback(glyph_spec, budget=600, seed=4)
        for name in glyph_spec.target_names:
            values = {v for _, v in fs.labels_for(name)}
            assert len(values) == 10

    def test_pairs_differ_on_nonshared_factors_statistically(self, glyph_spec):
        # two independent draws of the other factor collide with prob 1/10
        ds, fs = build_feedback(glyph_spec, budget=600, seed=5)
        differ = 0
        for a, b, name in fs.pairs:
            other = [f for f in glyph_spec.names if f != name]
            if any(
                ds.factors[a, glyph_spec.index(f)] != ds.factors[b, glyph_spec.index(f)]
                for f in other
            ):
                differ += 1
        rate = differ / len(fs.pairs)
        assert abs(rate - 0.9) < 0.06  # binomial 3-sigma at 300 pairs ~ 0.052

    def test_validate_rejects_budget_overrun(self, glyph_spec):
        ds, fs = build_feedback(glyph_spec, budget=100, seed=6)
        import dataclasses

        bad = dataclasses.replace(fs, budget=10)
        with pytest.raises(FeedbackBudgetError):
            bad.validate(ds)
