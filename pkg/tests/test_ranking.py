import numpy as np
import pytest

from satfuse import ranking
from satfuse.dataset import LabeledSet, synth_generate
from satfuse.errors import DegenerateInputError


def test_class_stats_separated():
    values = np.array([0.0, 0.0, 1.0, 1.0])
    labels = np.array([0, 0, 1, 1])
    means, stds = ranking.class_stats(values, labels, 2)
    assert means == [0.0, 1.0]
    assert stds == [0.0, 0.0]


def test_class_stats_single_class():
    means, stds = ranking.class_stats(np.array([1.0, 3.0]), np.array([0, 0]), 1)
    assert len(means) == 1 and len(stds) == 1


def test_class_stats_empty_class():
    with pytest.raises(DegenerateInputError):
        ranking.class_stats(np.array([1.0, 2.0]), np.array([0, 0]), 2)


def test_class_stats_monte_carlo():
    rng = np.random.default_rng(0)
    n = 20000
    values = np.concatenate([rng.normal(0, 1, n), rng.normal(4, 1, n)])
    labels = np.concatenate([np.zeros(n, int), np.ones(n, int)])
    means, stds = ranking.class_stats(values, labels, 2)
    # three standard errors, on the min-max normalized scale
    scale = values.max() - values.min()
    assert abs(means[1] - means[0] - 4.0 / scale) < 3 / (scale * np.sqrt(n))


def test_separability_hand_cases():
    assert ranking.separability([0.3, 0.3], [0.1, 0.1])[2] == 0.0
    dm, ds, score = ranking.separability([0.0, 1.0], [1.0, 1.0])
    assert (dm, ds, score) == (1.0, 1.0, 1.0)


def test_separability_sentinels():
    assert ranking.separability([0.0, 1.0], [0.0, 0.0])[2] == np.inf
    assert ranking.separability([0.5, 0.5], [0.0, 0.0])[2] == 0.0
    with pytest.raises(ValueError):
        ranking.separability([0.5], [0.1])


def test_d_s_affine_invariance():
    rng = np.random.default_rng(1)
    values = rng.normal(size=300)
    labels = rng.integers(0, 3, size=300)
    base = ranking.separability(*ranking.class_stats(values, labels, 3))[2]
    shifted = ranking.separability(*ranking.class_stats(7.3 * values - 2.1, labels, 3))[2]
    assert shifted == pytest.approx(base, rel=1e-12)


def test_rank_features_synthetic():
    rng = np.random.default_rng(2)
    n = 2000
    labels = np.concatenate([np.zeros(n, int), np.ones(n, int)])
    strong = np.concatenate([rng.normal(0, 1, n), rng.normal(2, 1, n)])
    weak = np.concatenate([rng.normal(0, 1, n), rng.normal(0.1, 1, n)])
    matrix = np.column_stack([weak, strong])
    table = ranking.rank_features(matrix, ["weak", "strong"], labels, 2, threshold=0.3)
    assert [e.feature for e in table.entries] == ["strong", "weak"]
    assert len(table.selected()) == 1


def test_rank_features_permutation_invariant():
    rng = np.random.default_rng(3)
    matrix = rng.random((100, 4))
    labels = rng.integers(0, 2, size=100)
    table = ranking.rank_features(matrix, list("abcd"), labels, 2)
    perm = rng.permutation(100)
    table2 = ranking.rank_features(matrix[perm], list("abcd"), labels[perm], 2)
    for e1, e2 in zip(table.entries, table2.entries):
        assert e1.feature == e2.feature
        assert e1.d_s == pytest.approx(e2.d_s, rel=1e-12)


def test_rank_features_tie_break_by_name():
    matrix = np.column_stack([np.array([0.0, 0.0, 1.0, 1.0])] * 2)
    labels = np.array([0, 0, 1, 1])
    table = ranking.rank_features(matrix, ["zeta", "alpha"], labels, 2)
    assert [e.feature for e in table.entries] == ["alpha", "zeta"]


def test_measured_d_s_approaches_mean_gap():
    rng = np.random.default_rng(4)
    n = 100000
    labels = np.concatenate([np.zeros(n, int), np.ones(n, int)])
    for m in (0.5, 1.0, 2.0):
        values = np.concatenate([rng.normal(0, 1, n), rng.normal(m, 1, n)])
        score = ranking.separability(*ranking.class_stats(values, labels, 2))[2]
        assert score == pytest.approx(m, rel=0.05)


def test_dataset_separability_raw_single_class_error():
    patches = np.zeros((4, 28, 28, 4), np.uint8)
    with pytest.raises(Exception):
        ranking.dataset_separability_raw(
            LabeledSet(patches, np.zeros(4, np.uint8), 2))


def test_dataset_separability_raw_synth():
    dataset = synth_generate(30, 4, seed=5)
    dm, ds = ranking.dataset_separability_raw(dataset)
    assert dm > 0 and ds > 0


def test_dataset_separability_features():
    rng = np.random.default_rng(6)
    n = 500
    labels = np.concatenate([np.zeros(n, int), np.ones(n, int)])
    matrix = np.column_stack([
        np.concatenate([rng.normal(0, 1, n), rng.normal(3, 1, n)]),
        rng.normal(size=2 * n),
    ])
    dm, ds = ranking.dataset_separability_features(matrix, ["a", "b"], labels, 2)
    assert dm > 0 and ds > 0
