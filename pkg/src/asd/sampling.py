"""Pseudo-labeled subset selection and class-coverage probability."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .data import Dataset

DEFAULT_KMEANS_INITS = 4


@dataclass
class SamplerState:
    """Non-repeating sampler over ``range(n)``: every index once per epoch."""

    permutation: np.ndarray
    cursor: int
    epoch: int
    seed: int

    @classmethod
    def fresh(cls, n: int, seed: int = 0) -> "SamplerState":
        return cls(_epoch_permutation(n, seed, 0), 0, 0, seed)

    @property
    def n(self) -> int:
        return len(self.permutation)


@dataclass
class PseudoLabelSet:
    indices: np.ndarray
    soft_labels: np.ndarray | None = None
    cluster_labels: np.ndarray | None = None
    iteration: int = 1

    @property
    def size(self) -> int:
        return len(self.indices)

    def hard_instance_labels(self) -> np.ndarray:
        # argmax breaks ties toward the lowest index
        return np.argmax(self.soft_labels, axis=1)


def _epoch_permutation(n: int, seed: int, epoch: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(epoch,)))
    return rng.permutation(n)


def _carry_over(perm: np.ndarray, picked: list[int]) -> np.ndarray:
    # indices already returned by the current call move to the back of the new epoch
    mask = np.isin(perm, picked)
    return np.concatenate([perm[~mask], perm[mask]])


def sample_random(
    state: SamplerState,
    n_l: int,
    drop_classes=None,
    labels: np.ndarray | None = None,
) -> tuple[PseudoLabelSet, SamplerState]:
    """Take the next ``n_l`` indices from the shuffled order.

    At an epoch boundary the remainder of the old permutation is used first;
    indices already returned by this call are pushed to the back of the new
    permutation, so a draw never repeats an index and each epoch still visits
    every index exactly once.  Indices whose class is in ``drop_classes`` are
    consumed but not returned.
    """
    n = state.n
    if n_l > n:
        raise ValueError(f"n_l={n_l} exceeds dataset size n={n}")
    dropped = None
    if drop_classes:
        if labels is None:
            raise ValueError("drop_classes requires ground-truth labels")
        dropped = np.isin(labels, list(drop_classes))
        if dropped.all():
            raise ValueError("every class is dropped")
    perm, cursor, epoch = state.permutation, state.cursor, state.epoch
    picked: list[int] = []
    seen: set[int] = set()
    while len(picked) < n_l:
        if cursor == n:
            epoch += 1
            perm = _carry_over(_epoch_permutation(n, state.seed, epoch), picked)
            cursor = 0
        i = int(perm[cursor])
        cursor += 1
        if i in seen or (dropped is not None and dropped[i]):
            continue
        picked.append(i)
        seen.add(i)
    if cursor == n:
        epoch += 1
        perm = _epoch_permutation(n, state.seed, epoch)
        cursor = 0
    new_state = replace(state, permutation=perm, cursor=cursor, epoch=epoch)
    return PseudoLabelSet(indices=np.array(picked, dtype=np.int64)), new_state


def _seed_centers(X: np.ndarray, k: int, rng: np.random.Generator, init: str) -> np.ndarray:
    n = X.shape[0]
    if init == "random":
        return X[rng.choice(n, size=k, replace=False)].copy()
    if init != "k-means++":
        raise ValueError(f"unknown init {init!r}")
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = X[idx]
        d2 = np.minimum(d2, ((X - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(
    X: np.ndarray,
    k: int,
    seed=0,
    max_iter: int = 50,
    tol: float = 1e-6,
    init: str = "k-means++",
    n_init: int = DEFAULT_KMEANS_INITS,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd's algorithm with k-means++ (or uniform random) seeding.

    ``n_init`` independent seedings are refined and the lowest-inertia result
    is kept.  Returns (centers, labels, inertia) with labels consistent with
    the centers.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds number of points n={n}")
    if n_init < 1:
        raise ValueError("n_init must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        centers, _, _ = _kernels.lloyd(X, _seed_centers(X, k, rng, init), max_iter, tol)
        d2 = ((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
        labels = np.argmin(d2, axis=1)
        inertia = float(d2[np.arange(n), labels].sum())
        if best is None or inertia < best[2]:
            best = (centers, labels, inertia)
    return best


def prototype_quotas(n_l: int, k: int) -> np.ndarray:
    quotas = np.full(k, n_l // k, dtype=np.int64)
    quotas[: n_l % k] += 1
    return quotas


def nearest_to_prototypes(X: np.ndarray, centers: np.ndarray, n_l: int) -> np.ndarray:
    """Union of each centroid's nearest neighbours, exactly ``n_l`` distinct points.

    A point wanted by several centroids goes to the nearest one; the others
    backfill from further down their own ranking.
    """
    n, k = X.shape[0], centers.shape[0]
    dist = np.sqrt(((X[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1))
    ranking = np.argsort(dist, axis=0, kind="stable")
    quotas = prototype_quotas(n_l, k)
    owner = np.full(n, -1, dtype=np.int64)
    counts = np.zeros(k, dtype=np.int64)
    ptr = np.zeros(k, dtype=np.int64)
    while np.any(counts < quotas):
        progressed = False
        for c in range(k):
            while counts[c] < quotas[c] and ptr[c] < n:
                p = ranking[ptr[c], c]
                ptr[c] += 1
                cur = owner[p]
                if cur < 0:
                    owner[p] = c
                    counts[c] += 1
                    progressed = True
                elif dist[p, c] < dist[p, cur] or (dist[p, c] == dist[p, cur] and c < cur):
                    owner[p] = c
                    counts[c] += 1
                    counts[cur] -= 1
                    progressed = True
        if not progressed:
            raise RuntimeError("prototype backfill stalled")
    chosen = []
    for c in range(k):
        members = np.flatnonzero(owner == c)
        chosen.extend(members[np.argsort(dist[members, c], kind="stable")])
    return np.array(chosen, dtype=np.int64)


def sample_prototypes(
    dataset: Dataset,
    features_current: np.ndarray,
    k: int,
    n_l: int,
    seed=0,
    init: str = "k-means++",
) -> PseudoLabelSet:
    n = features_current.shape[0]
    if n != dataset.n:
        raise ValueError("features_current must have one row per dataset sample")
    if k > n:
        raise ValueError(f"k={k} exceeds dataset size n={n}")
    if n_l > n:
        raise ValueError(f"n_l={n_l} exceeds dataset size n={n}")
    centers, _, _ = kmeans(features_current, k, seed=seed, init=init)
    return PseudoLabelSet(indices=nearest_to_prototypes(features_current, centers, n_l))


# ---------------------------------------------------------------------------
# coverage probability
# ---------------------------------------------------------------------------


def _check_coverage_args(n_l: int, k: int, n: int) -> None:
    if k < 1 or n < 1:
        raise ValueError("k and n must be positive")
    if n % k:
        raise ValueError(f"k={k} does not divide n={n}")
    if n_l < k:
        raise ValueError(f"n_l={n_l} must be >= k={k}")
    if n_l > n:
        raise ValueError(f"n_l={n_l} exceeds n={n}")


def _binom_ratio(a: int, n: int, n_l: int) -> float:
    """C(a, n_l) / C(n, n_l) as a telescoping product."""
    if a < n_l:
        return 0.0
    # log-sum keeps thousands of factors from underflowing one by one
    return math.exp(math.fsum(math.log((a - j) / (n - j)) for j in range(n_l)))


def coverage_probability(n_l: int, k: int, n: int) -> float:
    """Probability that a uniform ``n_l``-subset of a balanced ``k``-class pool hits every class."""
    _check_coverage_args(n_l, k, n)
    per = n // k
    terms = []
    for i in range(1, k + 1):
        r = _binom_ratio(n - i * per, n, n_l)
        if r == 0.0:
            break  # every later term is zero too
        terms.append((-1) ** (i - 1) * math.comb(k, i) * r)
    p = 1.0 - math.fsum(terms)
    return min(1.0, max(0.0, p))


def coverage_probability_mc(
    n_l: int, k: int, n: int, trials: int, seed=0
) -> tuple[float, float]:
    """Frequency estimate of the same probability from simulated draws.

    Each trial's class counts are a multivariate hypergeometric draw, which is
    the law of class counts for a uniform draw without replacement.
    """
    _check_coverage_args(n_l, k, n)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    colors = np.full(k, n // k, dtype=np.int64)
    counts = rng.multivariate_hypergeometric(colors, n_l, size=trials)
    hits = np.all(counts > 0, axis=1)
    p = float(hits.mean())
    return p, math.sqrt(p * (1.0 - p) / trials)
