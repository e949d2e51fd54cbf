"""Class-transition tracking and the instance-class -> cluster label map."""
from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import _kernels

DEFAULT_PAM_RESTARTS = 10


@dataclass
class PredictionLedger:
    """Last instance-level prediction per dataset index; -1 until first seen."""

    last_pred: np.ndarray
    n_classes: int

    @classmethod
    def empty(cls, n: int, n_classes: int) -> "PredictionLedger":
        return cls(np.full(n, -1, dtype=np.int64), n_classes)


class TransitionMatrix:
    """Ring buffer of the last ``capacity`` per-batch transition-count matrices."""

    def __init__(self, n_classes: int, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.n_classes = n_classes
        self.capacity = capacity
        self.batch_counts: deque[np.ndarray] = deque(maxlen=capacity)
        self._sum = np.zeros((n_classes, n_classes), dtype=np.int64)
        self.batches_tracked = 0

    def push(self, counts: np.ndarray) -> None:
        if len(self.batch_counts) == self.capacity:
            self._sum -= self.batch_counts[0]
        self.batch_counts.append(counts)
        self._sum += counts
        self.batches_tracked += 1

    @property
    def averaged(self) -> np.ndarray:
        return average(self)

    def snapshot(self) -> np.ndarray:
        return self._sum.copy()


@dataclass
class ClusterLabelMap:
    mapping: np.ndarray | None = None
    version: int = 0
    history: list = field(default_factory=list)

    def __call__(self, instance_labels: np.ndarray) -> np.ndarray:
        return self.mapping[np.asarray(instance_labels)]


def track_batch(
    ledger: PredictionLedger, indices: np.ndarray, preds: np.ndarray
) -> tuple[np.ndarray, PredictionLedger]:
    """Count a -> b changes between each sample's previous and current prediction.

    First sightings are recorded without counting.  The ledger is updated in
    place and also returned.
    """
    indices = np.asarray(indices, dtype=np.int64)
    preds = np.asarray(preds, dtype=np.int64)
    if indices.shape != preds.shape:
        raise ValueError("indices and preds must have the same length")
    if preds.size and (preds.min() < 0 or preds.max() >= ledger.n_classes):
        raise ValueError(f"predictions must lie in 0..{ledger.n_classes - 1}")
    prev = ledger.last_pred[indices]
    counts = _kernels.count_transitions(prev, preds, ledger.n_classes)
    ledger.last_pred[indices] = preds
    return counts, ledger


def average(matrix: TransitionMatrix) -> np.ndarray:
    if matrix.batches_tracked < 1:
        raise ValueError("no batches tracked yet")
    return matrix._sum / len(matrix.batch_counts)


def normalize_minmax(C: np.ndarray) -> np.ndarray:
    """Global min-max over off-diagonal entries; the diagonal is pinned to 1."""
    C = np.asarray(C, dtype=np.float64)
    n = C.shape[0]
    off = ~np.eye(n, dtype=bool)
    out = np.zeros_like(C)
    if n > 1:
        lo, hi = C[off].min(), C[off].max()
        if hi > lo:
            out[off] = (C[off] - lo) / (hi - lo)
    np.fill_diagonal(out, 1.0)
    return out


def kmedoids(D: np.ndarray, k: int, seed=0, restarts: int = DEFAULT_PAM_RESTARTS):
    """PAM on a dissimilarity matrix with seeded restarts.

    Start 0 is the greedy BUILD; further starts are random medoid sets.  Each
    is refined by SWAP and the cheapest result (first on ties) wins.
    Returns (medoids, labels, cost).
    """
    D = np.ascontiguousarray(D, dtype=np.float64)
    n = D.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds number of items {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    best = _kernels.pam_swap(D, _kernels.pam_build(D, k))
    for _ in range(restarts - 1):
        start = np.sort(rng.choice(n, size=k, replace=False)).astype(np.int64)
        cand = _kernels.pam_swap(D, start)
        if cand[2] < best[2] - 1e-12:
            best = cand
    medoids, labels, cost = best
    return np.asarray(medoids), np.asarray(labels), float(cost)


def _canonical(labels: np.ndarray) -> np.ndarray:
    # number clusters by first appearance so equal partitions get equal vectors
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(labels.max() + 1, dtype=np.int64)
    remap[np.unique(labels)[order]] = np.arange(len(order))
    return remap[labels]


def cluster_classes(
    similarity: np.ndarray, k: int, seed=0, restarts: int = DEFAULT_PAM_RESTARTS
) -> np.ndarray:
    """Group instance-level classes into ``k`` clusters from a [0, 1] similarity."""
    S = np.asarray(similarity, dtype=np.float64)
    n = S.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds number of instance classes {n}")
    D = 1.0 - 0.5 * (S + S.T)
    np.fill_diagonal(D, 0.0)  # a class is always its own nearest neighbour
    _, labels, _ = kmedoids(D, k, seed=seed, restarts=restarts)
    return _canonical(labels)


def align_indices(prev: np.ndarray, curr: np.ndarray, k: int) -> np.ndarray:
    """Relabel ``curr`` to agree with ``prev`` as much as possible (Hungarian)."""
    prev = np.asarray(prev, dtype=np.int64)
    curr = np.asarray(curr, dtype=np.int64)
    table = np.zeros((k, k), dtype=np.int64)
    np.add.at(table, (prev, curr), 1)
    rows, cols = linear_sum_assignment(-table)
    relabel = np.empty(k, dtype=np.int64)
    relabel[cols] = rows
    return relabel[curr]


def update_phi(
    phi: ClusterLabelMap,
    matrix: TransitionMatrix,
    k: int,
    seed=0,
    restarts: int = DEFAULT_PAM_RESTARTS,
) -> ClusterLabelMap:
    sim = normalize_minmax(average(matrix))
    mapping = cluster_classes(sim, k, seed=seed, restarts=restarts)
    if phi.mapping is not None:
        mapping = align_indices(phi.mapping, mapping, k)
    return ClusterLabelMap(mapping=mapping, version=phi.version + 1, history=phi.history)


def dump_phi_history(path: str | Path, history: list) -> None:
    """CSV with one row per (update, instance class): iteration, version, class, cluster."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "version", "instance_class", "cluster"])
        for iteration, version, mapping in history:
            for c, cl in enumerate(mapping):
                w.writerow([iteration, version, c, int(cl)])


def dump_transition_matrix(path: str | Path, averaged: np.ndarray) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in averaged:
            w.writerow([repr(float(x)) for x in row])
