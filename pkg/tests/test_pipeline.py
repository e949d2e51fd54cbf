import dataclasses

import numpy as np
import pytest

from asd import ctt
from asd.data import generate_gaussian_mixture
from asd.pipeline import (
    ConfigError,
    RunConfig,
    corrupt_labels,
    run,
    score_pseudo_label_noise,
    seed_streams,
    smoothed,
)
from asd.sampling import PseudoLabelSet

SMALL = dict(N_b=5, N_t=5, B=32, iterations=30, hidden=16, embed=8)


@pytest.fixture(scope="module")
def ds():
    return generate_gaussian_mixture(k=3, per_class=40, d=4, separation=8.0, seed=0)


def test_single_iteration_only_instance_loss(ds):
    rec = run(RunConfig(iterations=1, **{k: v for k, v in SMALL.items() if k != "iterations"}), ds)
    (t, report), = rec.losses
    assert t == 1 and report.l_sup == 0 and report.l_unsup == 0 and report.total == report.l_ins
    assert rec.phi_history == [] and rec.noise_rate == []


def test_warmup_gating_and_history(ds):
    rec = run(RunConfig(**SMALL), ds)
    first = rec.phi_history[0][0]
    assert first == SMALL["N_t"]
    assert [t for t, _, _ in rec.phi_history] == list(range(5, 31, 5))
    assert [v for _, v, _ in rec.phi_history] == list(range(1, 7))
    for t, r in rec.losses:
        if t < first:
            assert r.l_sup == 0 and r.l_unsup == 0
    assert len(rec.noise_rate) == SMALL["iterations"] - first + 1
    assert all(0 <= v <= 1 for _, v in rec.noise_rate)
    assert set(rec.metrics) == {"acc", "nmi", "ari", "cluster_histogram"}
    assert sum(rec.metrics["cluster_histogram"]) == ds.n
    for _, _, mapping in rec.phi_history:
        assert len(mapping) == 12 and set(mapping) <= {0, 1, 2}


def test_deterministic(ds):
    a = run(RunConfig(**SMALL, seed=4), ds)
    b = run(RunConfig(**SMALL, seed=4), ds)
    assert a.metrics == b.metrics
    assert [r.as_dict() for _, r in a.losses] == [r.as_dict() for _, r in b.losses]
    assert a.phi_history == b.phi_history
    c = run(RunConfig(**SMALL, seed=5), ds)
    assert [r.l_ins for _, r in c.losses] != [r.l_ins for _, r in a.losses]


def test_streams_independent():
    s = seed_streams(0)
    draws = [r.integers(2**62) for r in s.values()]
    assert len(set(draws)) == len(draws)
    assert [r.integers(2**62) for r in seed_streams(0).values()] == draws


@pytest.mark.parametrize("field,value", [
    ("n_l", 2), ("n_l", 120), ("tau", 1.0), ("lam", 0.0), ("N_t", 0),
    ("sampler", "bogus"), ("mapping", "x"), ("noise_ratio", 1.5), ("n_miss", 3),
    ("lr", -1.0), ("weak_sigma", -0.1),
])
def test_config_errors_name_key(ds, field, value):
    cfg = dataclasses.replace(RunConfig(**SMALL), **{field: value})
    with pytest.raises(ConfigError) as err:
        run(cfg, ds)
    assert err.value.key == field


def test_default_n_l_is_4k(ds):
    rec = run(RunConfig(**SMALL), ds)
    assert rec.config.n_l == 12


def test_n_miss_records_noise(ds):
    rec = run(RunConfig(**SMALL, n_miss=1), ds)
    # one class is always absent from D_l, so a 3-way labelling of it is imperfect
    assert len(rec.noise_rate) > 0


def test_noise_injection_level(ds):
    rec = run(RunConfig(**SMALL, noise_ratio=0.5), ds)
    assert np.mean([v for _, v in rec.noise_rate]) > 0.2


def test_kmeans_mapping_and_fixed(ds):
    rec = run(RunConfig(**SMALL, mapping="kmeans"), ds)
    assert len(rec.phi_history) == 6
    rec = run(RunConfig(**SMALL, fixed_dl=True, sampler="prototypes"), ds)
    assert np.isfinite(rec.metrics["acc"])


def test_score_noise_examples():
    truth = np.array([0, 0, 1, 1, 2, 2])
    d_l = PseudoLabelSet(indices=np.array([0, 2, 4, 5]), soft_labels=np.eye(4))
    perfect = ctt.ClusterLabelMap(mapping=np.array([1, 2, 0, 0]), version=1)
    assert score_pseudo_label_noise(d_l, perfect, truth) == 0.0
    half = ctt.ClusterLabelMap(mapping=np.array([0, 0, 1, 1]), version=1)
    assert score_pseudo_label_noise(d_l, half, truth) == 0.25
    d_l.cluster_labels = np.array([0, 0, 0, 0])
    assert score_pseudo_label_noise(d_l, None, truth) == 0.5
    with pytest.raises(ValueError):
        score_pseudo_label_noise(PseudoLabelSet(indices=np.array([0])), None, truth)


def test_corrupt_labels_exact_count():
    clean = np.repeat(np.arange(4), 25)
    noisy = corrupt_labels(clean, 0.3, 4, np.random.default_rng(0))
    assert (noisy != clean).sum() == 30
    assert noisy.min() >= 0 and noisy.max() < 4
    assert np.array_equal(corrupt_labels(clean, 0.0, 4, np.random.default_rng(0)), clean)


def test_smoothed():
    assert np.allclose(smoothed(np.arange(12.0), 10), [4.5, 5.5, 6.5])
    with pytest.raises(ValueError):
        smoothed(np.zeros(5), 10)
