import math

import numpy as np
import pytest

from hadr.mlp import MlpModel, MlpTrainConfig, bce_loss, inner_split, sigmoid, train_mlp
from hadr.numerics import check_gradient


def blobs(n=40, seed=0, gap=6.0):
    rng = np.random.default_rng(seed)
    y = np.r_[np.zeros(n // 2), np.ones(n - n // 2)].astype(int)
    X = rng.normal(size=(n, 2)) + gap * (y[:, None] - 0.5)
    return X, y


def naive_forward(model, x):
    """Layer by layer with explicit sums."""
    a = list(map(float, x))
    for k, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = [sum(W[i, j] * a[j] for j in range(len(a))) + b[i] for i in range(W.shape[0])]
        if k == len(model.weights) - 1:
            a = [1.0 / (1.0 + math.exp(-v)) for v in z]
        elif model.hidden_activation == "relu":
            a = [max(v, 0.0) for v in z]
        else:
            a = [1.0 / (1.0 + math.exp(-v)) for v in z]
    return a[0]


class TestForward:
    def test_zero_weights_give_half(self):
        m = MlpModel((5, 10, 10, 1))
        assert m.forward(np.ones(5)) == 0.5

    def test_hand_computed(self):
        m = MlpModel((2, 2, 1))
        m.weights[0][...] = [[1.0, -1.0], [0.5, 2.0]]
        m.biases[0][...] = [0.0, -1.0]
        m.weights[1][...] = [[1.0, -2.0]]
        m.biases[1][...] = [0.5]
        # hidden = relu([1 - 2, 0.5 + 4 - 1]) = [0, 3.5]; out = sigmoid(0.5 - 7)
        assert m.forward([1.0, 2.0]) == pytest.approx(1.0 / (1.0 + math.exp(6.5)), rel=1e-14)

    @pytest.mark.parametrize("act", ["relu", "sigmoid"])
    def test_matches_naive_loops(self, act):
        rng = np.random.default_rng(1)
        m = MlpModel.init((4, 10, 10, 1), rng, act)
        for x in rng.normal(size=(10, 4)):
            assert abs(m.forward(x) - naive_forward(m, x)) < 1e-12

    def test_output_in_unit_interval(self):
        rng = np.random.default_rng(2)
        m = MlpModel.init((3, 10, 10, 1), rng)
        p = m.predict_proba(rng.normal(size=(200, 3)) * 100)
        assert np.all((0 <= p) & (p <= 1))

    def test_wrong_width(self):
        with pytest.raises(ValueError):
            MlpModel((3, 1)).forward(np.ones(4))

    def test_stable_sigmoid(self):
        with np.errstate(over="raise", invalid="raise"):
            np.testing.assert_array_equal(sigmoid(np.array([-1000.0, 1000.0])), [0.0, 1.0])


class TestLoss:
    def test_half_probability(self):
        assert bce_loss([0.5], [1]) == pytest.approx(math.log(2), abs=1e-15)
        assert bce_loss([0.5, 0.5], [0, 1]) == pytest.approx(math.log(2), abs=1e-15)

    def test_clamped(self):
        assert bce_loss([0.0], [1]) == pytest.approx(-math.log(1e-7))
        assert math.isfinite(bce_loss([1.0], [0]))

    def test_gradient_check(self):
        rng = np.random.default_rng(3)
        for trial in range(20):
            act = "relu" if trial % 2 else "sigmoid"
            m = MlpModel.init((3, 10, 10, 1), rng, act)
            X = rng.normal(size=(8, 3))
            y = rng.integers(0, 2, 8)

            def f(theta):
                return MlpModel(m.dims, act, theta).loss(X, y)

            def g(theta):
                return MlpModel(m.dims, act, theta).loss_and_grad(X, y)[1]

            assert check_gradient(f, g, m.theta.copy()) < 1e-4

    def test_layer_views_share_memory(self):
        m = MlpModel((2, 3, 1))
        m.theta[:] = np.arange(m.theta.size)
        assert m.weights[0].tolist() == [[0, 1], [2, 3], [4, 5]]
        assert m.biases[-1].tolist() == [m.theta.size - 1]


class TestTraining:
    def test_separable_blobs(self):
        cfg = MlpTrainConfig(epochs=200)
        for seed in range(10):
            X, y = blobs(seed=seed)
            m = train_mlp(X, y, cfg, np.random.default_rng(seed))
            assert np.array_equal(m.predict_label(X), y)

    def test_loss_falls_over_first_epochs(self):
        first, tenth = [], []
        for seed in range(10):
            X, y = blobs(seed=seed, gap=3.0)
            m = train_mlp(X, y, MlpTrainConfig(epochs=10, patience=None), np.random.default_rng(seed))
            first.append(m.history["train_loss"][0])
            tenth.append(m.history["train_loss"][9])
        assert np.mean(tenth) < np.mean(first)

    def test_forward_is_pure(self):
        m = MlpModel.init((3, 10, 10, 1), np.random.default_rng(0))
        x = np.array([0.3, -1.0, 2.0])
        assert m.forward(x) == m.forward(x)
        theta = m.theta.copy()
        m.predict_proba(np.ones((4, 3)))
        assert np.array_equal(m.theta, theta)

    def test_deterministic(self):
        X, y = blobs(seed=1)
        cfg = MlpTrainConfig(epochs=30)
        a = train_mlp(X, y, cfg, np.random.default_rng(5))
        b = train_mlp(X, y, cfg, np.random.default_rng(5))
        assert np.array_equal(a.theta, b.theta)

    def test_zero_epochs_is_initialization(self):
        X, y = blobs()
        m = train_mlp(X, y, MlpTrainConfig(epochs=0), np.random.default_rng(7))
        ref = MlpModel.init((2, 10, 10, 1), np.random.default_rng(7))
        assert np.array_equal(m.theta, ref.theta)

    def test_checkpoint_is_best_validation(self):
        X, y = blobs(60, seed=2, gap=1.0)
        m = train_mlp(X, y, MlpTrainConfig(epochs=120, patience=20), np.random.default_rng(0))
        assert m.validated
        val = m.history["val_loss"]
        assert m.best_epoch == int(np.argmin(val))
        split = inner_split(y.astype(float), 0.2, np.random.default_rng(0))
        assert split is not None

    def test_early_stopping_limits_epochs(self):
        X, y = blobs(60, seed=3, gap=0.5)
        m = train_mlp(X, y, MlpTrainConfig(epochs=1000, patience=5), np.random.default_rng(0))
        assert len(m.history["val_loss"]) <= m.best_epoch + 1 + 5

    def test_too_few_minority_skips_validation(self):
        X, y = blobs(20)
        y = np.zeros(20, int)
        y[:3] = 1
        notes = []
        m = train_mlp(X, y, MlpTrainConfig(epochs=3), np.random.default_rng(0), log=notes.append)
        assert not m.validated and notes and len(m.history["train_loss"]) == 3

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            train_mlp(np.zeros((4, 2)), np.zeros(4))

    def test_json_round_trip(self):
        X, y = blobs()
        m = train_mlp(X, y, MlpTrainConfig(epochs=5), np.random.default_rng(0))
        back = MlpModel.from_json(m.to_json())
        assert np.array_equal(back.predict_proba(X), m.predict_proba(X))


class TestLabels:
    def test_threshold_edges(self):
        m = MlpModel((1, 1))
        m.biases[0][...] = 0.0  # p == 0.5 exactly
        assert m.predict_label([[3.0]]).tolist() == [1]
        assert m.predict_label([[3.0]], threshold=0.0).tolist() == [1]
        assert m.predict_label([[3.0]], threshold=1.0).tolist() == [0]


class TestInnerSplit:
    def test_stratified(self):
        y = np.r_[np.zeros(80), np.ones(20)]
        tr, va = inner_split(y, 0.2, np.random.default_rng(0))
        assert (y[va] == 1).sum() == 4 and (y[va] == 0).sum() == 16
        assert np.intersect1d(tr, va).size == 0 and tr.size + va.size == 100

    def test_disabled(self):
        assert inner_split(np.r_[np.zeros(8), np.ones(8)], 0.0, np.random.default_rng(0)) is None
