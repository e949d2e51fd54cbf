"""Feature datasets: synthetic Gaussian mixtures, CSV fixtures, augmentations."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FixtureError(ValueError):
    """Raised when a CSV fixture cannot be parsed."""


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray | None
    k: int
    name: str = "dataset"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D matrix")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features contain non-finite entries")
        n = self.features.shape[0]
        if self.k < 2 or n < self.k:
            raise ValueError(f"need n >= k >= 2, got n={n}, k={self.k}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise ValueError("labels must have one entry per row")
            if self.labels.min() < 0 or self.labels.max() >= self.k:
                raise ValueError(f"labels must lie in 0..{self.k - 1}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class AugmentationSpec:
    weak_sigma: float = 0.5
    strong_sigma: float = 1.0
    strong_dropout: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.weak_sigma <= self.strong_sigma:
            raise ValueError("need 0 <= weak_sigma <= strong_sigma")
        if not 0.0 <= self.strong_dropout < 1.0:
            raise ValueError("strong_dropout must lie in [0, 1)")


def _class_centers(k: int, d: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    if d >= k:
        # random orthonormal directions: every pair sits exactly `separation` apart
        q, _ = np.linalg.qr(rng.standard_normal((d, k)))
        return q.T * (separation / math.sqrt(2.0))
    if d == 1:
        return (np.arange(k, dtype=np.float64) * separation)[:, None]
    centers = rng.standard_normal((k, d))
    diffs = centers[:, None, :] - centers[None, :, :]
    dist = np.sqrt((diffs**2).sum(axis=-1))
    min_dist = dist[np.triu_indices(k, 1)].min()
    return centers * (separation / min_dist)


def generate_gaussian_mixture(
    k: int, per_class: int, d: int, separation: float, seed: int = 0
) -> Dataset:
    """Isotropic unit-variance blobs, ``per_class`` samples each, labels in class order."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if per_class < 1 or d < 1:
        raise ValueError("per_class and d must be positive")
    if not separation > 0:
        raise ValueError("separation must be positive")
    rng = np.random.default_rng(seed)
    centers = _class_centers(k, d, float(separation), rng)
    labels = np.repeat(np.arange(k), per_class)
    features = centers[labels] + rng.standard_normal((k * per_class, d))
    name = f"gmm_k{k}_n{k * per_class}_d{d}_sep{separation:g}_seed{seed}"
    return Dataset(features=features, labels=labels, k=k, name=name)


def load_fixture(path: str | Path, k: int | None = None) -> Dataset:
    """Read the CSV layout ``f0,...,f{d-1}[,label]``.

    ``k`` defaults to ``max(label) + 1`` for labelled files; unlabelled files
    need ``k`` from the caller (2 is assumed otherwise).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FixtureError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        has_label = bool(header) and header[-1] == "label"
        d = len(header) - int(has_label)
        if d < 1 or header[:d] != [f"f{j}" for j in range(d)]:
            raise FixtureError(f"{path}:1: header must be f0,...,f{{d-1}}[,label]")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FixtureError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                vals = [float(c) for c in row[:d]]
            except ValueError:
                raise FixtureError(f"{path}:{lineno}: non-numeric cell") from None
            if not all(math.isfinite(v) for v in vals):
                raise FixtureError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
            if has_label:
                try:
                    lab = int(row[d])
                except ValueError:
                    raise FixtureError(f"{path}:{lineno}: label is not an integer") from None
                if lab < 0 or (k is not None and lab >= k):
                    raise FixtureError(f"{path}:{lineno}: label {lab} out of range")
                labels.append(lab)
    if not rows:
        raise FixtureError(f"{path}: no data rows")
    features = np.array(rows, dtype=np.float64)
    if has_label:
        lab_arr = np.array(labels, dtype=np.int64)
        k_eff = k if k is not None else int(lab_arr.max()) + 1
        return Dataset(features, lab_arr, k_eff, name=path.stem)
    return Dataset(features, None, k if k is not None else 2, name=path.stem)


def save_fixture(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    d = dataset.d
    header = [f"f{j}" for j in range(d)]
    if dataset.labels is not None:
        header.append("label")
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.features[i]]
            if dataset.labels is not None:
                row.append(str(int(dataset.labels[i])))
            writer.writerow(row)


def augment(x: np.ndarray, spec: AugmentationSpec, strength: str, seed) -> np.ndarray:
    """Weak view: additive noise. Strong view: larger noise plus coordinate dropout.

    Works on a single vector or a batch of rows. ``seed`` may be an int or a
    ``numpy.random.Generator``.
    """
    x = np.asarray(x, dtype=np.float64)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if strength == "weak":
        if spec.weak_sigma == 0.0:
            return x.copy()
        return x + spec.weak_sigma * rng.standard_normal(x.shape)
    if strength == "strong":
        out = x.copy()
        if spec.strong_sigma > 0.0:
            out += spec.strong_sigma * rng.standard_normal(x.shape)
        if spec.strong_dropout > 0.0:
            out[rng.random(x.shape) < spec.strong_dropout] = 0.0
        return out
    raise ValueError(f"strength must be 'weak' or 'strong', got {strength!r}")
