import numpy as np
import pytest
import torch

from debiasvae.datasets import full_spectrum
from debiasvae.errors import MetricDegenerateError
from debiasvae.metrics import CodeTable, MetricsReport, build_code_table
from debiasvae.model import LatentPartition, build_model, images_to_tensor, model_config_for


def valid_report(**overrides):
    fields = dict(
        factorvae_score=0.9,
        adapted_mig=0.5,
        adapted_mig_raw=0.48,
        mig_original=0.2,
        dci_disentanglement=0.7,
        dci_completeness=0.6,
        downstream_accuracy={"shape": 0.95, "color": 1.0},
        consistency={"shape": 0.01, "color": 0.02},
        restrictiveness={"shape": 0.01, "color": 0.02},
        nontriviality={"shape": 0.9, "color": 0.8},
    )
    fields.update(overrides)
    return MetricsReport(**fields)


class TestMetricsReport:
    def test_valid_report_accepted(self):
        valid_report()

    def test_bounded_fields_checked(self):
        with pytest.raises(MetricDegenerateError):
            valid_report(factorvae_score=1.2)
        with pytest.raises(MetricDegenerateError):
            valid_report(downstream_accuracy={"shape": -0.1})
        with pytest.raises(MetricDegenerateError):
            valid_report(adapted_mig=float("nan"))

    def test_estimators_may_exceed_one_but_not_be_negative(self):
        valid_report(consistency={"shape": 1.9, "color": 0.0})
        with pytest.raises(MetricDegenerateError):
            valid_report(restrictiveness={"shape": -0.01})

    def test_json_round_trip_mirrors_field_names(self):
        report = valid_report()
        back = MetricsReport.from_json(report.to_json())
        assert back == report
        import json

        keys = set(json.loads(report.to_json()).keys())
        assert keys == {
            "factorvae_score", "adapted_mig", "adapted_mig_raw", "mig_original",
            "dci_disentanglement", "dci_completeness", "downstream_accuracy",
            "consistency", "restrictiveness", "nontriviality", "notes",
        }


class TestCodeTable:
    def test_row_count_mismatch_rejected(self):
        part = LatentPartition(4, (("a", (0, 2)), ("b", (2, 4))))
        with pytest.raises(MetricDegenerateError):
            CodeTable(
                codes=np.zeros((5, 4)), factors=np.zeros((4, 2), dtype=int),
                factor_names=("a", "b"), cardinalities=(2, 2),
                target_mask=(True, True), partition=part,
            )

    def test_non_finite_codes_rejected(self):
        part = LatentPartition(4, (("a", (0, 2)), ("b", (2, 4))))
        codes = np.zeros((3, 4))
        codes[1, 2] = np.inf
        with pytest.raises(MetricDegenerateError):
            CodeTable(
                codes=codes, factors=np.zeros((3, 2), dtype=int),
                factor_names=("a", "b"), cardinalities=(2, 2),
                target_mask=(True, True), partition=part,
            )

    def test_build_code_table_uses_posterior_means(self, glyph_spec):
        model, _ = build_model(model_config_for("glyphs10"), glyph_spec, seed=3)
        ds = full_spectrum(glyph_spec, repeats=1, seed=0)
        table = build_code_table(model, ds, batch_size=32)
        assert table.codes.shape == (100, 16)
        with torch.no_grad():
            mu, _ = model.encode(images_to_tensor(ds.images[:7]))
        assert np.allclose(table.codes[:7], mu.numpy(), atol=1e-6)
        assert table.block_codes("shape").shape == (100, 4)
        assert table.complement_codes("shape").shape == (100, 12)
