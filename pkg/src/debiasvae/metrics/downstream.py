"""Post-hoc linear probes under covariate shift: train on biased-split codes,
evaluate on shifted-split codes, one probe per target-factor block."""
from __future__ import annotations

import numpy as np
from sklearn.linear_model import LogisticRegression

from ..errors import MetricDegenerateError
from .codes import CodeTable


def downstream_accuracy(
    train_table: CodeTable,
    test_table: CodeTable,
    factors: tuple[str, ...] | None = None,
) -> dict[str, float]:
    """Per target factor: logistic probe on its block codes, accuracy on the
    shifted test codes. The train table must come from the original biased
    split (without feedback samples)."""
    names = factors if factors is not None else train_table.target_names
    out = {}
    for name in names:
        y_train = train_table.factor_column(name)
        if len(np.unique(y_train)) < 2:
            raise MetricDegenerateError(
                f"train labels for {name!r} are single-class"
            )
        probe = LogisticRegression(max_iter=1000, random_state=0)
        probe.fit(train_table.block_codes(name), y_train)
        pred = probe.predict(test_table.block_codes(name))
        out[name] = float((pred == test_table.factor_column(name)).mean())
    return out
