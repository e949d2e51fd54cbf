"""The cold-start training loop tying sampling, alignment, tracking and the learner together."""
from __future__ import annotations

import dataclasses
import time
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from . import ctt, learner, metrics, ot_align
from .data import AugmentationSpec, Dataset
from .sampling import (
    PseudoLabelSet,
    SamplerState,
    kmeans,
    sample_prototypes,
    sample_random,
)

STREAMS = ("sampling", "unlabeled", "augmentation", "init", "ablation", "prototypes", "clustering")


class ConfigError(ValueError):
    """A RunConfig field violates its constraint; ``key`` names the field."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


class TrainingError(RuntimeError):
    pass


@dataclass
class RunConfig:
    n_l: int | None = None  # None -> 4 * k
    N_b: int = 50
    N_t: int = 50
    B: int = 64
    iterations: int = 2000
    sampler: str = "random"
    ps_init: str = "k-means++"
    lam: float = 0.5
    sinkhorn_iters: int = ot_align.DEFAULT_MAX_ITERS
    sinkhorn_tol: float = ot_align.DEFAULT_TOL
    pam_restarts: int = ctt.DEFAULT_PAM_RESTARTS
    tau: float = 0.8
    lr: float = 0.05
    momentum: float = 0.9
    hidden: int = 64
    embed: int = 32
    weak_sigma: float = 0.5
    strong_sigma: float = 1.0
    strong_dropout: float = 0.2
    seed: int = 0
    n_miss: int = 0
    noise_ratio: float = 0.0
    fixed_dl: bool = False
    mapping: str = "ctt"

    def resolved(self, k: int) -> "RunConfig":
        cfg = dataclasses.replace(self, n_l=4 * k if self.n_l is None else self.n_l)
        cfg.validate(k)
        return cfg

    def validate(self, k: int, n: int | None = None) -> None:
        n_l = 4 * k if self.n_l is None else self.n_l
        if n_l < k:
            raise ConfigError("n_l", f"must be >= k={k}, got {n_l}")
        if n is not None and n_l >= n:
            raise ConfigError("n_l", f"must be < n={n}, got {n_l}")
        for key in ("N_b", "N_t", "B", "iterations", "sinkhorn_iters", "pam_restarts", "hidden", "embed"):
            if getattr(self, key) < 1:
                raise ConfigError(key, "must be >= 1")
        if self.sampler not in ("random", "prototypes"):
            raise ConfigError("sampler", "must be 'random' or 'prototypes'")
        if self.ps_init not in ("k-means++", "random"):
            raise ConfigError("ps_init", "must be 'k-means++' or 'random'")
        if self.mapping not in ("ctt", "kmeans"):
            raise ConfigError("mapping", "must be 'ctt' or 'kmeans'")
        if not self.lam > 0:
            raise ConfigError("lam", "must be > 0")
        if not self.sinkhorn_tol > 0:
            raise ConfigError("sinkhorn_tol", "must be > 0")
        if not 0 < self.tau < 1:
            raise ConfigError("tau", "must lie in (0, 1)")
        if not self.lr > 0:
            raise ConfigError("lr", "must be > 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum", "must lie in [0, 1)")
        if not 0 <= self.noise_ratio <= 1:
            raise ConfigError("noise_ratio", "must lie in [0, 1]")
        if not 0 <= self.n_miss < k:
            raise ConfigError("n_miss", f"must lie in [0, k={k})")
        if self.n_miss and self.sampler != "random":
            raise ConfigError("n_miss", "class dropping needs sampler = random")
        try:
            self.augmentation()
        except ValueError as exc:
            raise ConfigError("weak_sigma", str(exc)) from None

    def augmentation(self) -> AugmentationSpec:
        return AugmentationSpec(self.weak_sigma, self.strong_sigma, self.strong_dropout)


@dataclass
class RunRecord:
    config: RunConfig
    losses: list = field(default_factory=list)  # (iteration, LossReport)
    noise_rate: list = field(default_factory=list)  # (iteration, rate)
    phi_history: list = field(default_factory=list)  # (iteration, version, mapping)
    metrics: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    predictions: np.ndarray | None = None
    model: learner.ModelState | None = None

    def noise_series(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.noise_rate:
            return np.zeros(0, dtype=np.int64), np.zeros(0)
        it, rate = zip(*self.noise_rate)
        return np.array(it), np.array(rate)


def seed_streams(seed: int) -> dict:
    return {
        name: np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        for i, name in enumerate(STREAMS)
    }


def _stream_int(rng: np.random.Generator) -> int:
    return int(rng.integers(2**63 - 1))


def score_pseudo_label_noise(
    d_l: PseudoLabelSet, phi: ctt.ClusterLabelMap | None, truth: np.ndarray
) -> float:
    """Fraction of D_l whose cluster label disagrees with the truth after optimal matching.

    With ``phi`` the labels are phi(argmax soft label); without it the set's
    own ``cluster_labels`` are scored.
    """
    if truth is None:
        raise ValueError("noise rate needs ground-truth labels")
    if phi is not None and phi.mapping is not None:
        cl = phi(d_l.hard_instance_labels())
    elif d_l.cluster_labels is not None:
        cl = d_l.cluster_labels
    else:
        raise ValueError("pseudo-labeled set carries no cluster labels")
    return 1.0 - metrics.accuracy(cl, np.asarray(truth)[d_l.indices])


def corrupt_labels(
    clean: np.ndarray, ratio: float, k: int, rng: np.random.Generator
) -> np.ndarray:
    """Corrupt exactly round(ratio * len) labels, each to a uniformly drawn wrong class.

    The run applies this once to the whole dataset, so a noisy sample keeps
    the same wrong label every time it is drawn into D_l.
    """
    labels = np.array(clean, dtype=np.int64)
    m = int(round(ratio * len(labels)))
    if m == 0:
        return labels
    pos = rng.choice(len(labels), size=m, replace=False)
    shift = rng.integers(1, k, size=m)
    labels[pos] = (labels[pos] + shift) % k
    return labels


def smoothed(values: np.ndarray, window: int = 10) -> np.ndarray:
    """Moving average over full windows only; element j averages values[j : j + window]."""
    values = np.asarray(values, dtype=np.float64)
    if window < 1:
        raise ValueError("window must be >= 1")
    if len(values) < window:
        raise ValueError(f"need at least {window} values, got {len(values)}")
    return np.convolve(values, np.ones(window) / window, mode="valid")


def run(config: RunConfig, dataset: Dataset, progress=None) -> RunRecord:
    k = dataset.k
    config.validate(k, dataset.n)
    cfg = config.resolved(k)
    n_l = cfg.n_l
    X = dataset.features
    n = dataset.n
    truth = dataset.labels
    if (cfg.n_miss or cfg.noise_ratio > 0) and truth is None:
        raise ConfigError("noise_ratio" if cfg.noise_ratio else "n_miss", "ablation needs ground-truth labels")
    fixed_dl = cfg.fixed_dl or cfg.mapping == "kmeans"

    rngs = seed_streams(cfg.seed)
    model = learner.init_model(X.shape[1], n_l, k, cfg.hidden, cfg.embed, seed=rngs["init"])
    sampler = SamplerState.fresh(n, seed=_stream_int(rngs["sampling"]))
    unl_sampler = SamplerState.fresh(n, seed=_stream_int(rngs["unlabeled"]))
    aug = cfg.augmentation()
    ledger = ctt.PredictionLedger.empty(n, n_l)
    transitions = ctt.TransitionMatrix(n_l, cfg.N_b)
    phi = ctt.ClusterLabelMap()
    record = RunRecord(config=cfg)
    timings: dict = defaultdict(float)
    anchors = None
    forced = None
    if cfg.noise_ratio > 0:
        forced = corrupt_labels(truth, cfg.noise_ratio, k, rngs["ablation"])

    for t in range(1, cfg.iterations + 1):
        tic = time.perf_counter()
        if t == 1 or not fixed_dl:
            if cfg.sampler == "random":
                drop = None
                if cfg.n_miss:
                    drop = set(rngs["ablation"].choice(k, size=cfg.n_miss, replace=False).tolist())
                d_l, sampler = sample_random(sampler, n_l, drop, truth)
            else:
                d_l = sample_prototypes(
                    dataset, learner.features(model, X), k, n_l,
                    seed=rngs["prototypes"], init=cfg.ps_init,
                )
        else:
            d_l = PseudoLabelSet(indices=anchors)
        d_l.iteration = t
        toc = time.perf_counter()
        timings["sampling"] += toc - tic

        if t == 1:
            anchors = d_l.indices.copy()
            d_l.soft_labels = np.eye(n_l)
        else:
            # anchors are re-embedded with the current extractor every time
            d_l.soft_labels, _, _ = ot_align.align(
                learner.features(model, X[d_l.indices]),
                learner.features(model, X[anchors]),
                lam=cfg.lam, max_iters=cfg.sinkhorn_iters, tol=cfg.sinkhorn_tol,
            )
        tic = time.perf_counter()
        timings["alignment"] += tic - toc

        x_l = X[d_l.indices]
        l_ins, grads = learner.loss_instance(model, x_l, d_l.soft_labels)
        report = learner.LossReport(l_ins=l_ins)

        unlabeled = None
        if t > 1:
            batch, unl_sampler = sample_random(unl_sampler, min(cfg.B, n))
            unlabeled = batch.indices[~np.isin(batch.indices, d_l.indices)]
            preds = learner.predict_instances(model, X[unlabeled])
            counts, ledger = ctt.track_batch(ledger, unlabeled, preds)
            transitions.push(counts)
            toc = time.perf_counter()
            timings["tracking"] += toc - tic
            if t % cfg.N_t == 0:
                seed_c = rngs["clustering"]
                if cfg.mapping == "ctt":
                    phi = ctt.update_phi(phi, transitions, k, seed=seed_c, restarts=cfg.pam_restarts)
                else:
                    _, labels, _ = kmeans(learner.features(model, X[anchors]), k, seed=seed_c)
                    if phi.mapping is not None:
                        labels = ctt.align_indices(phi.mapping, labels, k)
                    phi = ctt.ClusterLabelMap(mapping=labels, version=phi.version + 1)
                record.phi_history.append((t, phi.version, phi.mapping.tolist()))
            tic = time.perf_counter()
            timings["label_map"] += tic - toc

        if phi.mapping is not None and unlabeled is not None:
            if forced is not None:
                d_l.cluster_labels = forced[d_l.indices]
            else:
                d_l.cluster_labels = phi(d_l.hard_instance_labels())
            l_sup, g_sup = learner.loss_supervised(model, x_l, d_l.cluster_labels)
            if unlabeled.size:
                l_uns, g_uns, mask_rate = learner.loss_unsupervised(
                    model, X[unlabeled], aug, cfg.tau, seed=rngs["augmentation"]
                )
            else:
                l_uns, g_uns, mask_rate = 0.0, learner.zero_grads(model), 0.0
            grads = learner.add_grads(grads, g_sup, g_uns)
            report = learner.LossReport(l_ins, l_sup, l_uns, mask_rate)
            if truth is not None:
                record.noise_rate.append((t, score_pseudo_label_noise(d_l, None, truth)))

        if not np.isfinite(report.total):
            raise TrainingError(f"non-finite loss at iteration {t}")
        learner.step(model, grads, cfg.lr, cfg.momentum)
        record.losses.append((t, report))
        toc = time.perf_counter()
        timings["training"] += toc - tic
        if progress is not None:
            progress(t, report)

    tic = time.perf_counter()
    pred = learner.predict_clusters(model, X)
    record.predictions = pred
    if truth is not None:
        record.metrics = metrics.evaluate(pred, truth)
    record.metrics["cluster_histogram"] = np.bincount(pred, minlength=k).tolist()
    timings["evaluation"] += time.perf_counter() - tic
    record.timings = dict(timings)
    record.model = model
    return record
