import numpy as np
import pytest

from debiasvae.errors import MetricDegenerateError
from debiasvae.metrics import CodeTable, downstream_accuracy
from debiasvae.model import LatentPartition


def table_from(codes, factors, cards=(4, 4), tag="train"):
    return CodeTable(
        codes=codes,
        factors=factors,
        factor_names=("shape", "color"),
        cardinalities=cards,
        target_mask=(True, True),
        partition=LatentPartition(codes.shape[1], (("shape", (0, 4)), ("color", (4, 8)))),
        split_tag=tag,
    )


def one_hot_codes(factors, card=4):
    n = factors.shape[0]
    codes = np.zeros((n, 8))
    codes[np.arange(n), factors[:, 0]] = 1.0
    codes[np.arange(n), 4 + factors[:, 1]] = 1.0
    return codes


class TestDownstreamAccuracy:
    def test_one_hot_codes_transfer_perfectly_across_shift(self, rng):
        train_f = np.stack([rng.integers(0, 4, 800)] * 2, axis=1)  # diagonal bias
        test_f = np.stack(
            [rng.integers(0, 4, 400), rng.integers(0, 4, 400)], axis=1
        )  # arbitrary shift
        train = table_from(one_hot_codes(train_f), train_f)
        test = table_from(one_hot_codes(test_f), test_f, tag="test")
        acc = downstream_accuracy(train, test)
        assert acc == {"shape": 1.0, "color": 1.0}

    def test_uninformative_codes_score_chance(self, rng):
        train_f = np.stack([rng.integers(0, 4, 2000)] * 2, axis=1)
        test_f = np.stack([rng.integers(0, 4, 2000), rng.integers(0, 4, 2000)], axis=1)
        train = table_from(rng.normal(size=(2000, 8)), train_f)
        test = table_from(rng.normal(size=(2000, 8)), test_f, tag="test")
        acc = downstream_accuracy(train, test)
        for v in acc.values():
            assert abs(v - 0.25) < 0.08

    def test_entangled_bias_following_codes_fail_under_shift(self, rng):
        # codes encode the train-time coupled value in BOTH blocks; under a
        # shifted test coupling the color probe keeps predicting shape's color
        n = 1000
        shape = rng.integers(0, 4, n)
        train_f = np.stack([shape, shape], axis=1)
        codes_tr = np.zeros((n, 8))
        codes_tr[np.arange(n), shape] = 1.0
        codes_tr[np.arange(n), 4 + shape] = 1.0  # color block mirrors shape
        shape_te = rng.integers(0, 4, n)
        color_te = (shape_te + 1) % 4
        test_f = np.stack([shape_te, color_te], axis=1)
        codes_te = np.zeros((n, 8))
        codes_te[np.arange(n), shape_te] = 1.0
        codes_te[np.arange(n), 4 + shape_te] = 1.0
        acc = downstream_accuracy(
            table_from(codes_tr, train_f), table_from(codes_te, test_f, tag="test")
        )
        assert acc["shape"] == 1.0
        assert acc["color"] == 0.0

    def test_single_class_train_labels_rejected(self, rng):
        train_f = np.zeros((100, 2), dtype=int)
        test_f = np.stack([rng.integers(0, 4, 50), rng.integers(0, 4, 50)], axis=1)
        with pytest.raises(MetricDegenerateError):
            downstream_accuracy(
                table_from(rng.normal(size=(100, 8)), train_f),
                table_from(rng.normal(size=(50, 8)), test_f, tag="test"),
            )
