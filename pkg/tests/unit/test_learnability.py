import math

import numpy as np
import pytest

from prime_lab.components import learnability, maxent, sieve_core
from prime_lab.components.learnability import Dataset, LinearModel, SplitKind, Task, TrainConfig
from prime_lab.errors import DivergenceError, DomainError, InvalidArgumentError, RangeError


@pytest.fixture(scope="module")
def prime_dataset_1e6():
    return learnability.make_dataset(Task.PRIME, 10**6, SplitKind.RANGE, seed=0)


@pytest.fixture(scope="module")
def prime_probe_1e6(prime_dataset_1e6):
    return learnability.run_probe(prime_dataset_1e6, TrainConfig(log_every=0), ablate_bit0=True)


def _random_dataset(rows=64, width=8, seed=1):
    rng = np.random.default_rng(seed)
    features = rng.integers(0, 2, size=(rows, width))
    labels = rng.integers(0, 2, size=rows)
    return Dataset.from_arrays(features, labels)


def test_featurize():
    assert learnability.featurize(5, 4).tolist() == [1, 0, 1, 0]
    assert learnability.featurize(0, 4).tolist() == [0, 0, 0, 0]
    assert learnability.featurize(10, 4).tolist() == [0, 1, 0, 1]
    with pytest.raises(RangeError):
        learnability.featurize(16, 4)


def test_splitmix64_reference_value():
    assert int(learnability.splitmix64(0, 1)[0]) == 0xE220A8397B1DCDAF
    np.testing.assert_array_equal(learnability.splitmix64(7, 100), learnability.splitmix64(7, 100))


def test_prime_dataset_labels_and_range_split():
    ds = learnability.make_dataset("prime", 100)
    assert ds.width == 7
    assert ds.labels[97 - 2] == 1.0
    assert ds.labels[96 - 2] == 0.0
    train_ns = ds.ns[ds.train_idx]
    test_ns = ds.ns[ds.test_idx]
    assert train_ns.max() == 79 and test_ns.min() == 80
    assert sorted(np.concatenate([train_ns, test_ns]).tolist()) == list(range(2, 101))


def test_shuffle_split_is_seeded_partition():
    a = learnability.make_dataset("prime", 1000, SplitKind.SHUFFLE, seed=3)
    b = learnability.make_dataset("prime", 1000, SplitKind.SHUFFLE, seed=3)
    c = learnability.make_dataset("prime", 1000, SplitKind.SHUFFLE, seed=4)
    np.testing.assert_array_equal(a.train_idx, b.train_idx)
    assert not np.array_equal(a.train_idx, c.train_idx)
    assert a.train_idx.size == math.floor(0.8 * 999)
    assert np.intersect1d(a.train_idx, a.test_idx).size == 0
    assert a.train_idx.size + a.test_idx.size == 999


def test_width_holds_powers_of_two():
    ds = learnability.make_dataset("prime", 16)
    assert ds.width == 5
    assert ds.features[-1].tolist() == [0, 0, 0, 0, 1]


def test_dataset_domain():
    with pytest.raises(DomainError):
        learnability.make_dataset("prime", 15)
    with pytest.raises(InvalidArgumentError):
        learnability.make_dataset("parity", 100)


def test_ek_sign_labels():
    N = 10_000
    ds = learnability.make_dataset("ek", N)
    assert ds.task is Task.EK_SIGN
    omega = np.array([sieve_core.trial_division_omega(n)[0] for n in range(2, N + 1)])
    threshold = math.log(math.log(N))
    np.testing.assert_array_equal(ds.labels, (omega > threshold).astype(float))


def test_engineered_features_and_ablation():
    ds = learnability.make_dataset("prime", 100, engineered=True)
    assert ds.width == 7 + 8
    assert ds.features[0].tolist()[7:] == [0, 0, 1, 0, 0, 1, 0, 0]
    ablated = ds.ablate(["bit0"])
    assert ablated.width == ds.width - 1
    assert "bit0" not in ablated.feature_names
    with pytest.raises(InvalidArgumentError):
        ds.ablate(["bit99"])


def test_zero_epochs_keep_initialization():
    model = learnability.train_logistic(_random_dataset(), TrainConfig(epochs=0))
    assert not model.weights.any()
    assert model.bias == 0.0
    assert len(model.loss_history) == 1


def test_separable_loss_decreases():
    features = [[0, 1], [1, 0], [1, 1], [0, 0]] * 4
    ds = Dataset.from_arrays(features, [row[0] for row in features])
    model = learnability.train_logistic(ds, TrainConfig(lr=0.1, epochs=100, l2=0.0))
    history = np.array(model.loss_history)
    assert len(history) == 101
    assert np.all(np.diff(history) < 0)


def test_all_positive_labels():
    ds = Dataset.from_arrays(_random_dataset().features, np.ones(64))
    model = learnability.train_logistic(ds, TrainConfig(lr=0.5, epochs=500, l2=0.0))
    assert learnability.evaluate(model, ds, "train").mean_predicted_rate >= 0.9


def test_minibatch_training_is_deterministic():
    ds = _random_dataset(rows=200)
    config = TrainConfig(lr=0.5, epochs=20, batch=32, seed=9)
    a = learnability.train_logistic(ds, config)
    b = learnability.train_logistic(ds, config)
    np.testing.assert_array_equal(a.weights, b.weights)
    assert a.loss_history == b.loss_history


def test_training_errors():
    ds = _random_dataset()
    empty = Dataset.from_arrays(ds.features, ds.labels, train_idx=[], test_idx=[0])
    with pytest.raises(InvalidArgumentError):
        learnability.train_logistic(empty)
    with pytest.raises(InvalidArgumentError):
        learnability.train_logistic(ds, TrainConfig(lr=0.0))
    with pytest.raises(DivergenceError):
        learnability.train_logistic(ds, TrainConfig(lr=math.inf, epochs=1, l2=0.0))


def test_evaluate_perfect_and_constant_predictors():
    features = [[0], [1], [1], [0]]
    ds = Dataset.from_arrays(features, [0, 1, 1, 0])
    perfect = LinearModel(np.array([40.0]), -20.0, TrainConfig())
    metrics = learnability.evaluate(perfect, ds, "test")
    assert metrics.accuracy == 1.0
    assert metrics.mcc == 1.0
    assert metrics.balanced_accuracy == 1.0

    constant = LinearModel(np.zeros(1), 0.0, TrainConfig())
    metrics = learnability.evaluate(constant, ds, "test")
    assert metrics.log_loss_bits == pytest.approx(1.0)
    assert metrics.mean_predicted_rate == 0.5
    with pytest.raises(InvalidArgumentError):
        learnability.evaluate(LinearModel(np.zeros(2), 0.0, TrainConfig()), ds, "test")


def test_baseline_metrics():
    ds = Dataset.from_arrays(np.zeros((10, 1)), [0] * 9 + [1])
    baseline = learnability.baseline_metrics(ds, "test")
    assert baseline.accuracy == pytest.approx(0.9)
    assert baseline.baseline_accuracy == pytest.approx(0.9)
    assert baseline.log_loss_bits == pytest.approx(maxent.bernoulli_entropy(0.1))

    balanced = Dataset.from_arrays(np.zeros((4, 1)), [0, 1, 0, 1])
    assert learnability.baseline_metrics(balanced, "test").accuracy == 0.5


def test_gradient_at_zero_weights():
    ds = _random_dataset()
    X = ds.features.astype(float)
    _, grad_b = learnability.logistic_gradient(np.zeros(ds.width), 0.0, X, ds.labels)
    assert grad_b == pytest.approx(0.5 - ds.labels.mean())


@pytest.mark.parametrize("l2", [0.0, 0.1])
def test_gradient_check(l2):
    rng = np.random.default_rng(42)
    for trial in range(10):
        ds = _random_dataset(rows=96, width=6, seed=trial)
        model = LinearModel(rng.normal(size=6), float(rng.normal()), TrainConfig(l2=l2))
        assert learnability.gradient_check(ds, model, epsilon=1e-5) < 1e-4
    with pytest.raises(InvalidArgumentError):
        learnability.gradient_check(ds, model, epsilon=1e-2)


def test_probe_report_is_deterministic():
    ds = learnability.make_dataset("prime", 5000)
    config = TrainConfig(epochs=30, log_every=0)
    a = learnability.run_probe(ds, config, ablate_bit0=True).as_dict()
    b = learnability.run_probe(ds, config, ablate_bit0=True).as_dict()
    assert a == b
    assert a["ablations"][0]["removed"] == ["bit0"]


def test_prime_probe_is_calibrated(prime_dataset_1e6):
    model = learnability.train_logistic(prime_dataset_1e6, TrainConfig(log_every=0))
    train = learnability.evaluate(model, prime_dataset_1e6, "train")
    assert abs(train.mean_predicted_rate - prime_dataset_1e6.positive_rate("train")) <= 0.01


def test_prime_probe_gain_comes_from_parity(prime_probe_1e6):
    margins = prime_probe_1e6.margins()
    assert abs(margins["accuracy_margin"]) <= 0.01
    assert margins["log_loss_gain_bits"] > 0.02
    ablated_gain = prime_probe_1e6.ablations[0]["log_loss_gain_bits"]
    assert ablated_gain < 0.5 * margins["log_loss_gain_bits"]


def test_ek_sign_probe_stays_near_baseline():
    ds = learnability.make_dataset("ek", 10**6)
    report = learnability.run_probe(ds, TrainConfig(log_every=0))
    assert abs(report.margins()["accuracy_margin"]) <= 0.1
    assert 0.0 <= report.test.balanced_accuracy <= 1.0
    assert report.test.log_loss_bits >= 0.0


def test_raw_array_dataset_supports_bit0_ablation():
    ds = _random_dataset(rows=128, width=6)
    assert ds.feature_names == ("bit0", "bit1", "bit2", "bit3", "bit4", "bit5")
    report = learnability.run_probe(ds, TrainConfig(epochs=10, log_every=0), ablate_bit0=True)
    assert report.ablations[0]["removed"] == ["bit0"]
    assert ds.ablate(["bit0"]).width == 5
