"""DCI disentanglement/completeness from an L1-regularized linear importance
matrix. Importance comes from multinomial logistic probes (deterministic)
rather than the tree ensembles of the original formulation."""
from __future__ import annotations

import warnings

import numpy as np
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression

from .codes import CodeTable

_EPS = 1e-12


def importance_matrix(table: CodeTable, c: float = 1.0, seed: int = 0) -> np.ndarray:
    """(m x n_targets) importance: per-factor L1 logistic probes on
    standardized codes; importance = |coef| summed over classes."""
    codes = table.codes
    std = codes.std(axis=0)
    standardized = (codes - codes.mean(axis=0)) / np.where(std > 0, std, 1.0)
    cols = []
    for name in table.target_names:
        y = table.factor_column(name)
        if len(np.unique(y)) < 2:
            cols.append(np.zeros(codes.shape[1]))
            continue
        probe = LogisticRegression(
            penalty="l1", solver="saga", C=c, max_iter=500, tol=1e-4,
            random_state=seed,
        )
        with warnings.catch_warnings():
            # saga may hit max_iter on weakly informative codes; the
            # coefficients are still deterministic and fine for ranking
            warnings.simplefilter("ignore", ConvergenceWarning)
            probe.fit(standardized, y)
        cols.append(np.abs(probe.coef_).sum(axis=0))
    return np.stack(cols, axis=1)


def dci_scores(importance: np.ndarray) -> tuple[float, float]:
    """(disentanglement, completeness) from an m x n importance matrix.

    Disentanglement: importance-weighted mean over dims of one minus the
    base-n entropy of the dim's row distribution. Completeness: mean over
    factors of one minus the base-m entropy of the factor's column
    distribution. An all-zero matrix scores (0, 0).
    """
    r = np.asarray(importance, dtype=np.float64)
    m, n = r.shape
    total = r.sum()
    if total <= 0:
        return 0.0, 0.0

    row_sums = r.sum(axis=1)
    d_scores = np.zeros(m)
    active = row_sums > 0
    if n > 1:
        probs = r[active] / row_sums[active, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.where(probs > 0, np.log(probs), 0.0)
        h = -(probs * logp).sum(axis=1) / np.log(n)
        d_scores[active] = 1.0 - h
    else:
        d_scores[active] = 1.0
    rho = row_sums / total
    disentanglement = float((rho * d_scores).sum())

    col_sums = r.sum(axis=0)
    c_scores = np.zeros(n)
    cactive = col_sums > 0
    if m > 1:
        probs = r[:, cactive] / col_sums[cactive]
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = np.where(probs > 0, np.log(probs), 0.0)
        h = -(probs * logp).sum(axis=0) / np.log(m)
        c_scores[cactive] = 1.0 - h
    else:
        c_scores[cactive] = 1.0
    completeness = float(c_scores.mean())
    return disentanglement, completeness


def dci(table: CodeTable, c: float = 1.0, seed: int = 0) -> tuple[float, float]:
    return dci_scores(importance_matrix(table, c=c, seed=seed))
