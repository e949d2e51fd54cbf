import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asd.data import (
    AugmentationSpec,
    Dataset,
    FixtureError,
    augment,
    generate_gaussian_mixture,
    load_fixture,
    save_fixture,
)
from asd.metrics import accuracy
from asd.sampling import kmeans


def test_two_point_mixture():
    ds = generate_gaussian_mixture(2, 1, 1, 10.0, seed=0)
    assert ds.labels.tolist() == [0, 1]
    # unit noise on each point: the gap stays near 10
    assert 5 < abs(ds.features[1, 0] - ds.features[0, 0]) < 15


def test_kmeans_oracle_separates_benchmark():
    ds = generate_gaussian_mixture(5, 400, 16, 8.0, seed=7)
    _, labels, _ = kmeans(ds.features, 5, seed=0)
    assert accuracy(labels, ds.labels) >= 0.99


def test_generator_deterministic_and_balanced():
    a = generate_gaussian_mixture(4, 30, 3, 5.0, seed=11)
    b = generate_gaussian_mixture(4, 30, 3, 5.0, seed=11)
    assert np.array_equal(a.features, b.features)
    assert np.bincount(a.labels).tolist() == [30] * 4


@pytest.mark.parametrize("k,d", [(5, 16), (3, 3), (6, 2), (4, 1)])
def test_center_separation(k, d):
    from asd.data import _class_centers

    c = _class_centers(k, d, 8.0, np.random.default_rng(0))
    dist = np.linalg.norm(c[:, None] - c[None], axis=-1)[np.triu_indices(k, 1)]
    assert dist.min() >= 8.0 - 1e-9


@pytest.mark.parametrize("args", [(1, 5, 2, 1.0), (2, 0, 2, 1.0), (2, 5, 0, 1.0), (2, 5, 2, 0.0)])
def test_generator_rejects_bad_params(args):
    with pytest.raises(ValueError):
        generate_gaussian_mixture(*args)


def test_dataset_invariants():
    with pytest.raises(ValueError):
        Dataset(np.array([[np.nan], [0.0]]), None, 2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 1)), np.array([0, 1, 2]), 2)
    with pytest.raises(ValueError):
        Dataset(np.zeros((1, 1)), None, 2)


def test_load_unlabelled(tmp_path):
    p = tmp_path / "u.csv"
    p.write_text("f0,f1\n0,1\n2,3\n4.5,-1e3\n")
    ds = load_fixture(p)
    assert ds.n == 3 and ds.d == 2 and ds.labels is None


def test_load_labelled_infers_k(tmp_path):
    p = tmp_path / "l.csv"
    p.write_text("f0,f1,label\n0,0,0\n1,1,1\n")
    ds = load_fixture(p)
    assert ds.n == 2 and ds.k == 2 and ds.labels.tolist() == [0, 1]


@pytest.mark.parametrize(
    "body,line",
    [
        ("f0,f1\n0,1\nNaN,2\n", 3),
        ("f0,f1\n0,1\n1\n", 3),
        ("f0,f1\n0,x\n", 2),
        ("f0,label\n0,0\n1,7\n", 3),
    ],
)
def test_load_errors_name_line(tmp_path, body, line):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(FixtureError, match=f":{line}:"):
        load_fixture(p, k=2 if "label" in body else None)


def test_bad_header(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(FixtureError, match=":1:"):
        load_fixture(p)


@settings(max_examples=30, deadline=None)
@given(
    st.integers(1, 6),
    st.integers(2, 4),
    st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=1),
    st.booleans(),
)
def test_fixture_roundtrip(d, k, salt, labelled):
    import tempfile
    from pathlib import Path

    rng = np.random.default_rng(abs(int(salt[0])) % 1000)
    n = k + 3
    feats = rng.standard_normal((n, d)) * salt[0]
    labels = np.arange(n) % k if labelled else None
    ds = Dataset(feats, labels, k)
    with tempfile.TemporaryDirectory() as tmp:
        p = Path(tmp) / "r.csv"
        save_fixture(ds, p)
        raw = p.read_bytes()
        assert b"\r\n" not in raw
        back = load_fixture(p, k=k)
    assert np.array_equal(back.features, ds.features)
    if labelled:
        assert np.array_equal(back.labels, labels)
    else:
        assert back.labels is None


def test_augment_identity_with_zero_noise():
    x = np.arange(5.0)
    spec = AugmentationSpec(0.0, 0.0, 0.0)
    assert np.array_equal(augment(x, spec, "weak", 3), x)
    assert np.array_equal(augment(x, spec, "strong", 3), x)


def test_augment_deterministic_and_unbiased():
    x = np.array([1.0, -2.0, 0.5])
    spec = AugmentationSpec(0.1, 0.2, 0.0)
    assert np.array_equal(augment(x, spec, "weak", 5), augment(x, spec, "weak", 5))
    rng = np.random.default_rng(0)
    reps = np.stack([augment(x, spec, "weak", rng) for _ in range(10_000)])
    se = 0.1 / np.sqrt(10_000)
    assert np.all(np.abs(reps.mean(axis=0) - x) < 3 * se)


def test_strong_dropout_rate():
    spec = AugmentationSpec(0.0, 0.0, 0.3)
    out = augment(np.ones((200, 50)), spec, "strong", 1)
    assert abs((out == 0).mean() - 0.3) < 0.02


def test_augmentation_spec_invariants():
    with pytest.raises(ValueError):
        AugmentationSpec(1.0, 0.5, 0.0)
    with pytest.raises(ValueError):
        AugmentationSpec(0.1, 0.5, 1.0)
    with pytest.raises(ValueError):
        augment(np.zeros(2), AugmentationSpec(), "medium", 0)
