"""Clustering metrics: ACC under optimal matching, NMI, ARI."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class ContingencyTable:
    counts: np.ndarray  # rows: predicted clusters, cols: true classes

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def contingency(pred, truth) -> ContingencyTable:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError("pred and truth must be 1-D and of equal length")
    if pred.size == 0:
        raise ValueError("empty labelling")
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    counts = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(counts, (p, t), 1)
    return ContingencyTable(counts)


def best_matching(table: ContingencyTable) -> tuple[np.ndarray, np.ndarray]:
    """Row/column pairs of the maximum-agreement bijection (padded to square)."""
    c = table.counts
    size = max(c.shape)
    square = np.zeros((size, size), dtype=np.int64)
    square[: c.shape[0], : c.shape[1]] = c
    return linear_sum_assignment(-square)


def accuracy(pred, truth) -> float:
    table = contingency(pred, truth)
    rows, cols = best_matching(table)
    size = max(table.counts.shape)
    square = np.zeros((size, size), dtype=np.int64)
    square[: table.counts.shape[0], : table.counts.shape[1]] = table.counts
    return float(square[rows, cols].sum() / table.n)


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the two entropies."""
    table = contingency(pred, truth)
    n = table.n
    h_pred = _entropy(table.row_sums, n)
    h_true = _entropy(table.col_sums, n)
    if h_pred == 0.0 or h_true == 0.0:
        return 1.0 if h_pred == h_true else 0.0
    c = table.counts
    nz = c > 0
    outer = np.outer(table.row_sums, table.col_sums)
    mi = float((c[nz] / n * np.log(c[nz] * n / outer[nz])).sum())
    return float(min(1.0, max(0.0, mi / np.sqrt(h_pred * h_true))))


def _pairs(x: np.ndarray) -> float:
    x = x.astype(np.float64)
    return float((x * (x - 1) / 2).sum())


def ari(pred, truth) -> float:
    table = contingency(pred, truth)
    n = table.n
    index = _pairs(table.counts)
    sum_a = _pairs(table.row_sums)
    sum_b = _pairs(table.col_sums)
    total = n * (n - 1) / 2
    expected = sum_a * sum_b / total if total else 0.0
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        # both partitions trivial (all singletons or a single block)
        return 1.0 if index == max_index else 0.0
    return float((index - expected) / (max_index - expected))


def evaluate(pred, truth) -> dict:
    return {"acc": accuracy(pred, truth), "nmi": nmi(pred, truth), "ari": ari(pred, truth)}
