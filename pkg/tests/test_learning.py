import math

import numpy as np
import pytest

from orbitfl.learning import (
    DataFormatError,
    LearnerConfig,
    LocalDataset,
    NumericDivergenceError,
    PartitionError,
    compute_time,
    evaluate,
    global_aggregate,
    init_params,
    load_idx,
    local_gd,
    local_gradient,
    local_loss,
    model_dimension,
    partial_aggregate,
    partition_dataset,
    synthetic_pool,
)

from helpers import numeric_gradient


def small_dataset(seed=0, n=40, f=5, c=3):
    return synthetic_pool(n, f, c, seed=seed, separation=2.0)


def test_model_dimension_and_init():
    assert model_dimension(784, 10) == 7850
    zeros = init_params(4, 3)
    assert zeros.shape == (15,)
    assert not zeros.any()
    a = init_params(4, 3, seed=9)
    b = init_params(4, 3, seed=9)
    np.testing.assert_array_equal(a, b)
    assert a.any()


# Zero parameters give uniform class probabilities, so the loss is ln(num_classes)
def test_local_loss_at_zero_params():
    ds = small_dataset(c=3)
    assert local_loss(np.zeros(model_dimension(5, 3)), ds) == pytest.approx(math.log(3), rel=1e-12)


# Direct per-sample softmax признание: naive loop oracle
def test_local_loss_matches_naive_loop():
    rng = np.random.default_rng(5)
    ds = small_dataset(seed=1, n=25, f=4, c=4)
    params = rng.normal(size=model_dimension(4, 4))
    w = params.reshape(5, 4)
    total = 0.0
    for x, y in zip(ds.features, ds.labels):
        scores = np.append(x, 1.0) @ w
        probs = np.exp(scores) / np.exp(scores).sum()
        total -= math.log(probs[y])
    assert local_loss(params, ds) == pytest.approx(total / ds.num_samples, rel=1e-10)


def test_local_loss_rejects_mismatched_params():
    ds = small_dataset()
    with pytest.raises(ValueError):
        local_loss(np.zeros(17), ds)


def test_local_gradient_matches_finite_differences():
    rng = np.random.default_rng(12)
    for _ in range(20):
        f = int(rng.integers(2, 7))
        c = int(rng.integers(2, 5))
        n = int(rng.integers(5, 30))
        ds = synthetic_pool(n, f, c, seed=int(rng.integers(1e6)), separation=1.5)
        params = rng.normal(size=model_dimension(f, c))
        analytic = local_gradient(params, ds)
        numeric = numeric_gradient(lambda p: local_loss(p, ds), params)
        denom = np.maximum(np.abs(analytic), 1e-6)
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-5


# Duplicating every sample leaves the mean gradient unchanged
def test_local_gradient_duplicate_invariance():
    ds = small_dataset(seed=3)
    doubled = LocalDataset(
        np.vstack([ds.features, ds.features]), np.concatenate([ds.labels, ds.labels])
    )
    params = init_params(5, 3, seed=2)
    np.testing.assert_allclose(
        local_gradient(params, ds), local_gradient(params, doubled), rtol=1e-12
    )


def test_local_gd_descends_and_composes():
    ds = small_dataset(seed=4)
    params = np.zeros(model_dimension(5, 3))
    cfg1 = LearnerConfig(learning_rate=0.1, local_iterations=1)
    cfg2 = LearnerConfig(learning_rate=0.1, local_iterations=2)
    after1 = local_gd(params, ds, cfg1)
    assert local_loss(after1, ds) < local_loss(params, ds)
    # two iterations must equal one iteration applied twice, bit for bit
    np.testing.assert_array_equal(local_gd(params, ds, cfg2), local_gd(after1, ds, cfg1))


def test_local_gd_guards_against_divergence():
    ds = small_dataset(seed=6)
    bad = LocalDataset(ds.features * 1e200, ds.labels)
    cfg = LearnerConfig(learning_rate=1e300, local_iterations=5)
    with pytest.raises(NumericDivergenceError):
        local_gd(np.ones(model_dimension(5, 3)), bad, cfg)


def test_compute_time_reference_value():
    # 1500 samples of 784 features at 8 bits each, 1e3 cycles per bit, 1 GHz clock
    ds = LocalDataset(np.zeros((1500, 784)), np.zeros(1500, dtype=int))
    cfg = LearnerConfig(learning_rate=0.1, cycles_per_sample=1e3, cpu_hz=1e9)
    assert ds.size_bits == 1500 * 6272
    assert compute_time(ds, cfg) == pytest.approx(9.408, rel=1e-12)
    scaled = LearnerConfig(learning_rate=0.1, cycles_per_sample=1e3, cpu_hz=1e9,
                           compute_time_factor=10.0)
    assert compute_time(ds, scaled) == pytest.approx(94.08, rel=1e-12)


def test_compute_time_linear_in_samples():
    cfg = LearnerConfig(learning_rate=0.1)
    one = compute_time(LocalDataset(np.zeros((10, 20)), np.zeros(10, dtype=int)), cfg)
    two = compute_time(LocalDataset(np.zeros((20, 20)), np.zeros(20, dtype=int)), cfg)
    assert two == pytest.approx(2 * one, rel=1e-12)


def test_partial_aggregate_weighted_sum():
    own = np.array([1.0, 2.0])
    out = partial_aggregate(own, 3, [np.array([4.0, 4.0]), np.array([1.0, 0.0])])
    np.testing.assert_array_equal(out, [8.0, 10.0])
    with pytest.raises(ValueError):
        partial_aggregate(own, 0, [])
    with pytest.raises(ValueError):
        partial_aggregate(own, 1, [np.zeros(3)])


def test_global_aggregate_is_weighted_average():
    parts = [np.array([2.0, 4.0]), np.array([4.0, 2.0])]
    np.testing.assert_array_equal(global_aggregate(parts, 3), [2.0, 2.0])
    with pytest.raises(ValueError):
        global_aggregate([], 3)


# Folding weighted contributions up an arbitrary tree must equal the flat
# weighted average, to float precision
def test_tree_fold_matches_centralized():
    rng = np.random.default_rng(21)
    dim = 50
    counts = rng.integers(1, 500, size=7)
    models = rng.normal(size=(7, dim))
    # chain 0<-1<-2 and 0<-3, plus chain 4<-5<-6 folded at two roots
    leaf2 = partial_aggregate(models[2], counts[2], [])
    node1 = partial_aggregate(models[1], counts[1], [leaf2])
    leaf3 = partial_aggregate(models[3], counts[3], [])
    root0 = partial_aggregate(models[0], counts[0], [node1, leaf3])
    leaf6 = partial_aggregate(models[6], counts[6], [])
    node5 = partial_aggregate(models[5], counts[5], [leaf6])
    root4 = partial_aggregate(models[4], counts[4], [node5])
    total = int(counts.sum())
    tree = global_aggregate([root0, root4], total)
    flat = (counts[:, None] * models).sum(axis=0) / total
    np.testing.assert_allclose(tree, flat, rtol=1e-12)


def test_partition_iid_conserves_samples():
    pool = small_dataset(seed=8, n=103, f=4, c=3)
    shards = partition_dataset(pool, 10, "iid", seed=5)
    assert len(shards) == 10
    assert sum(s.num_samples for s in shards) == 103
    sizes = sorted(s.num_samples for s in shards)
    assert sizes[-1] - sizes[0] <= 1
    # a second call with the same seed deals identically
    again = partition_dataset(pool, 10, "iid", seed=5)
    for a, b in zip(shards, again):
        np.testing.assert_array_equal(a.features, b.features)


def test_partition_single_worker_gets_everything():
    pool = small_dataset(seed=9, n=30)
    (shard,) = partition_dataset(pool, 1, "iid", seed=0)
    assert shard.num_samples == 30
    np.testing.assert_allclose(np.sort(shard.features, axis=0), np.sort(pool.features, axis=0))


def test_partition_label_split_reference_layout():
    pool = synthetic_pool(4000, 8, 10, seed=14, separation=2.0)
    groups = [set(range(5)), set(range(5, 10))]
    shards = partition_dataset(pool, 40, "label_split", seed=3, label_groups=groups)
    for worker, shard in enumerate(shards):
        expected = groups[0] if worker < 20 else groups[1]
        assert set(shard.labels.tolist()) <= expected
        assert shard.num_samples > 0
    assert sum(s.num_samples for s in shards) == 4000


def test_partition_errors():
    pool = small_dataset(seed=10, n=5, c=3)
    with pytest.raises(PartitionError):
        partition_dataset(pool, 6, "iid", seed=0)  # more workers than samples
    with pytest.raises(PartitionError):
        partition_dataset(pool, 2, "label_split", seed=0)  # missing groups
    with pytest.raises(PartitionError):
        partition_dataset(pool, 2, "nonsense", seed=0)
    # a group whose labels never occur leaves its workers empty
    with pytest.raises(PartitionError):
        partition_dataset(pool, 2, "label_split", seed=0, label_groups=[{0, 1, 2}, {7}])


def test_evaluate_perfect_and_uniform():
    ds = synthetic_pool(60, 5, 3, seed=11, separation=8.0)
    # hand-built nearest-mean discriminant: with clusters this far apart it
    # classifies everything correctly
    params = np.zeros((6, 3))
    means = np.stack([ds.features[ds.labels == c].mean(axis=0) for c in range(3)])
    params[:5, :] = (10.0 * means).T
    params[5, :] = -5.0 * (means**2).sum(axis=1)
    accuracy, loss = evaluate(params.reshape(-1), ds)
    assert accuracy == 1.0
    assert loss < 0.1
    ds = small_dataset(seed=11, n=60, f=5, c=3)
    # zero params: every class ties, argmax picks class 0
    accuracy0, loss0 = evaluate(np.zeros(18), ds)
    assert accuracy0 == pytest.approx(np.mean(ds.labels == 0))
    assert loss0 == pytest.approx(math.log(3), rel=1e-12)


def test_evaluate_matches_naive_argmax():
    rng = np.random.default_rng(17)
    ds = small_dataset(seed=13, n=50, f=4, c=4)
    params = rng.normal(size=model_dimension(4, 4))
    w = params.reshape(5, 4)
    correct = 0
    for x, y in zip(ds.features, ds.labels):
        scores = np.append(x, 1.0) @ w
        best = 0
        for c in range(1, 4):
            if scores[c] > scores[best]:
                best = c
        correct += best == y
    accuracy, _ = evaluate(params, ds)
    assert accuracy == pytest.approx(correct / 50)


def test_synthetic_pool_properties():
    a = synthetic_pool(100, 6, 4, seed=3)
    b = synthetic_pool(100, 6, 4, seed=3)
    np.testing.assert_array_equal(a.features, b.features)
    np.testing.assert_array_equal(a.labels, b.labels)
    counts = np.bincount(a.labels, minlength=4)
    np.testing.assert_array_equal(counts, [25, 25, 25, 25])
    # 103 samples over 4 classes: remainder goes to the lowest class indices
    c = synthetic_pool(103, 6, 4, seed=3)
    np.testing.assert_array_equal(np.bincount(c.labels, minlength=4), [26, 26, 26, 25])
    with pytest.raises(ValueError):
        synthetic_pool(3, 6, 4, seed=3)


def test_synthetic_pool_shared_means_differ_in_draws():
    train = synthetic_pool(200, 5, 3, seed=1, means_seed=99)
    test = synthetic_pool(200, 5, 3, seed=2, means_seed=99)
    assert not np.array_equal(train.features, test.features)
    for c in range(3):
        np.testing.assert_allclose(
            train.features[train.labels == c].mean(axis=0),
            test.features[test.labels == c].mean(axis=0),
            atol=0.5,
        )


# Well-separated clusters are easy: 50 plain GD steps reach 95% train accuracy
def test_separable_pool_trains_quickly():
    pool = synthetic_pool(300, 10, 4, seed=20, separation=5.0)
    cfg = LearnerConfig(learning_rate=0.5, local_iterations=50)
    trained = local_gd(init_params(10, 4), pool, cfg)
    accuracy, _ = evaluate(trained, pool)
    assert accuracy >= 0.95


def _write_idx_pair(tmp_path, images, labels):
    import struct as _struct

    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    n, rows, cols = images.shape
    ip = tmp_path / "images-idx3-ubyte"
    lp = tmp_path / "labels-idx1-ubyte"
    ip.write_bytes(_struct.pack(">IIII", 0x00000803, n, rows, cols) + images.tobytes())
    lp.write_bytes(_struct.pack(">II", 0x00000801, n) + labels.tobytes())
    return str(ip), str(lp)


def test_load_idx_round_trip(tmp_path):
    rng = np.random.default_rng(31)
    images = rng.integers(0, 256, size=(7, 4, 3), dtype=np.uint8)
    labels = rng.integers(0, 10, size=7, dtype=np.uint8)
    ip, lp = _write_idx_pair(tmp_path, images, labels)
    pool = load_idx(ip, lp)
    assert pool.num_samples == 7
    assert pool.num_features == 12
    np.testing.assert_array_equal(pool.labels, labels)
    np.testing.assert_allclose(pool.features, images.reshape(7, 12) / 255.0)
    assert pool.features.max() <= 1.0


def test_load_idx_rejects_bad_magic(tmp_path):
    import struct as _struct

    ip = tmp_path / "img"
    lp = tmp_path / "lab"
    ip.write_bytes(_struct.pack(">IIII", 0xDEADBEEF, 1, 2, 2) + bytes(4))
    lp.write_bytes(_struct.pack(">II", 0x00000801, 1) + bytes(1))
    with pytest.raises(DataFormatError):
        load_idx(str(ip), str(lp))


def test_load_idx_rejects_count_mismatch(tmp_path):
    images = np.zeros((3, 2, 2), dtype=np.uint8)
    labels = np.zeros(3, dtype=np.uint8)
    ip, lp = _write_idx_pair(tmp_path, images, labels)
    # truncate one label
    raw = open(lp, "rb").read()
    open(lp, "wb").write(raw[:-1])
    with pytest.raises(DataFormatError):
        load_idx(ip, lp)


def test_learner_config_validation():
    with pytest.raises(ValueError):
        LearnerConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        LearnerConfig(learning_rate=0.1, local_iterations=0)
    with pytest.raises(ValueError):
        LearnerConfig(learning_rate=0.1, compute_time_factor=0.0)
