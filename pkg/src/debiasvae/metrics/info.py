"""Histogram-based entropy and mutual information on discrete codes."""
from __future__ import annotations

import numpy as np


def discretize_uniform(values: np.ndarray, bins: int) -> np.ndarray:
    """Bin each column into `bins` uniform-width bins over its empirical range.

    A constant column collapses to a single bin (code 0 everywhere), which
    makes its mutual information with anything exactly zero.
    """
    arr = np.asarray(values, dtype=np.float64)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[:, None]
    out = np.zeros(arr.shape, dtype=np.int64)
    for j in range(arr.shape[1]):
        col = arr[:, j]
        lo, hi = col.min(), col.max()
        if hi <= lo:
            continue
        edges = np.linspace(lo, hi, bins + 1)
        out[:, j] = np.clip(np.searchsorted(edges, col, side="right") - 1, 0, bins - 1)
    return out[:, 0] if squeeze else out


def entropy(codes: np.ndarray) -> float:
    """Plug-in entropy (nats) of one discrete variable."""
    _, counts = np.unique(np.asarray(codes), return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def histogram_mi(x: np.ndarray, y: np.ndarray) -> float:
    """Plug-in mutual information (nats) from the joint histogram of two
    discrete variables."""
    x = np.asarray(x).ravel()
    y = np.asarray(y).ravel()
    if x.shape != y.shape:
        raise ValueError(f"length mismatch {x.shape} vs {y.shape}")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    nx, ny = xi.max() + 1, yi.max() + 1
    if nx == 1 or ny == 1:
        return 0.0  # a constant variable carries no information
    joint = np.zeros((nx, ny))
    np.add.at(joint, (xi, yi), 1.0)
    joint /= joint.sum()
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    mi = (joint[mask] * np.log(joint[mask] / (px @ py)[mask])).sum()
    return float(max(mi, 0.0))


def mutual_info_matrix(code_bins: np.ndarray, factors: np.ndarray) -> np.ndarray:
    """(m x F) matrix of MI between every discretized code dim and factor."""
    code_bins = np.asarray(code_bins)
    factors = np.asarray(factors)
    m, f = code_bins.shape[1], factors.shape[1]
    out = np.zeros((m, f))
    for d in range(m):
        for j in range(f):
            out[d, j] = histogram_mi(code_bins[:, d], factors[:, j])
    return out
