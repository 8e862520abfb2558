"""Network construction, training, inference and the weights container."""

import numpy as np
import pytest

from polykit import mlp as m
from polykit.errors import ModelFormatError, TrainingDiverged


def identity_net(width):
    """Stack of two identity layers that pass the input straight through."""
    layer = lambda: m.DenseLayer(np.eye(width), np.zeros(width), "identity")
    cfg = m.MLPConfig((width, width), ("identity",), output_kind="linear")
    return m.MLP((layer(), layer()), cfg, width)


class TestConfig:
    def test_defaults_normalized(self):
        cfg = m.MLPConfig((8, 4, 2))
        assert cfg.activations == ("relu", "relu")
        assert cfg.dropout_rates == (0.0, 0.0)

    def test_bad_widths(self):
        with pytest.raises(ValueError):
            m.MLPConfig((0, 3))

    def test_bad_dropout(self):
        with pytest.raises(ValueError):
            m.MLPConfig((4, 2), dropout_rates=(1.0,))

    def test_bad_activation(self):
        with pytest.raises(ValueError):
            m.MLPConfig((4, 2), activations=("sigmoid",))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            m.MLPConfig((4, 4, 2), activations=("relu",))


class TestForward:
    def test_identity_passthrough(self):
        X = np.random.default_rng(0).normal(size=(6, 3))
        net = identity_net(3)
        np.testing.assert_array_equal(m.forward(net, X), X)
        np.testing.assert_array_equal(m.layer_activations(net, X, 0), X)
        np.testing.assert_array_equal(m.layer_activations(net, X, 1), X)

    def test_relu_kills_negative_preactivations(self):
        net = m.MLP(
            (m.DenseLayer(np.eye(2), np.array([-10.0, -10.0]), "relu"),),
            m.MLPConfig((2,)),
            2,
        )
        X = np.random.default_rng(1).uniform(0, 1, size=(5, 2))
        np.testing.assert_array_equal(m.forward(net, X), np.zeros((5, 2)))

    def test_dropout_is_identity_at_inference(self):
        cfg = m.MLPConfig((4, 2), ("tanh",), (0.5,), seed=3)
        net = m.build_mlp(3, cfg)
        X = np.random.default_rng(2).normal(size=(10, 3))
        dense_out = m.layer_activations(net, X, 0)
        dropout_out = m.layer_activations(net, X, 1)
        np.testing.assert_array_equal(dense_out, dropout_out)

    def test_layer_index_out_of_range(self):
        net = identity_net(2)
        with pytest.raises(IndexError):
            m.layer_activations(net, np.zeros((1, 2)), 5)

    def test_labels(self):
        cfg = m.MLPConfig((10, 10, 10), ("relu", "relu"), (0.4, 0.3), output_kind="softmax")
        net = m.build_mlp(784, cfg)
        assert m.layer_labels(net) == ["dense_1", "dropout_1", "dense_2", "dropout_2", "dense_3"]

    def test_forward_independent_of_seed(self):
        # same weights, different config seeds: inference identical
        cfg_a = m.MLPConfig((3, 1), ("tanh",), seed=0)
        net = m.build_mlp(2, cfg_a)
        X = np.random.default_rng(5).normal(size=(4, 2))
        out1 = m.forward(net, X)
        out2 = m.forward(net, X)
        np.testing.assert_array_equal(out1, out2)


class TestGradients:
    @pytest.mark.parametrize(
        "output_kind,acts,widths",
        [
            ("linear", ("tanh", "square"), (4, 3, 2)),
            ("linear", ("relu",), (5, 1)),
            ("softmax", ("identity",), (4, 3)),
        ],
    )
    def test_matches_central_differences(self, output_kind, acts, widths):
        cfg = m.MLPConfig(widths, acts, output_kind=output_kind, seed=11)
        net = m.build_mlp(3, cfg)
        rng = np.random.default_rng(0)
        X = rng.normal(size=(6, 3)) + 0.05  # keep relu kinks away from samples
        if output_kind == "softmax":
            Y = np.eye(widths[-1])[rng.integers(0, widths[-1], 6)]
        else:
            Y = rng.normal(size=(6, widths[-1]))
        _, grads = m.loss_and_gradients(net, X, Y)
        h = 1e-6
        gi = 0
        for layer in net.layers:
            if isinstance(layer, m.DropoutLayer):
                continue
            analytic = grads[gi]
            gi += 1
            for arr, g in ((layer.weights, analytic[0]), (layer.bias, analytic[1])):
                it = np.nditer(arr, flags=["multi_index"])
                for _ in it:
                    idx = it.multi_index
                    orig = arr[idx]
                    arr[idx] = orig + h
                    up, _ = m.loss_and_gradients(net, X, Y)
                    arr[idx] = orig - h
                    down, _ = m.loss_and_gradients(net, X, Y)
                    arr[idx] = orig
                    numeric = (up - down) / (2 * h)
                    denom = max(1.0, abs(numeric), abs(g[idx]))
                    assert abs(numeric - g[idx]) / denom < 1e-5


class TestTraining:
    def test_linear_target_learned(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(-1, 1, size=(200, 1))
        y = 3.0 * X[:, 0]
        cfg = m.MLPConfig(
            (4, 1), ("identity",), epochs=200, batch_size=32, learning_rate=0.05, seed=1
        )
        net = m.train_mlp(X, y, cfg)
        mse = float(np.mean((m.forward(net, X)[:, 0] - y) ** 2))
        assert mse < 1e-3

    def test_xor_solvable_in_some_seed(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        labels = np.array([0, 1, 1, 0])
        Y, classes = m.one_hot(labels)
        solved = 0
        for seed in range(5):
            cfg = m.MLPConfig(
                (4, 2), ("relu",), output_kind="softmax",
                epochs=2000, batch_size=4, learning_rate=0.5, seed=seed,
            )
            net = m.train_mlp(X, Y, cfg)
            pred = np.argmax(m.forward(net, X), axis=1)
            solved += np.array_equal(np.asarray(classes)[pred], labels)
        assert solved >= 1

    def test_zero_epochs_returns_initialized_network(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(30, 2))
        y = rng.normal(size=30)
        cfg = m.MLPConfig((3, 1), ("tanh",), epochs=0, seed=7)
        net = m.train_mlp(X, y, cfg)
        init = m.build_mlp(2, cfg)
        for trained, fresh in zip(net.layers, init.layers):
            np.testing.assert_array_equal(trained.weights, fresh.weights)
            np.testing.assert_array_equal(trained.bias, fresh.bias)
        loss_trained, _ = m.loss_and_gradients(net, X, y[:, None])
        loss_init, _ = m.loss_and_gradients(init, X, y[:, None])
        assert loss_trained == loss_init

    def test_deterministic_under_seed(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(100, 3))
        y = rng.normal(size=100)
        cfg = m.MLPConfig((5, 1), ("tanh",), (0.3,), epochs=5, seed=42)
        a = m.train_mlp(X, y, cfg)
        b = m.train_mlp(X, y, cfg)
        for la, lb in zip(a.layers, b.layers):
            if isinstance(la, m.DropoutLayer):
                continue
            np.testing.assert_array_equal(la.weights, lb.weights)

    def test_divergence_detected(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 2)) * 10
        y = rng.normal(size=50) * 10
        cfg = m.MLPConfig((8, 1), ("square",), epochs=50, learning_rate=10.0, seed=0)
        with pytest.raises(TrainingDiverged, match="learning rate"):
            m.train_mlp(X, y, cfg)

    def test_target_width_checked(self):
        cfg = m.MLPConfig((3, 2))
        with pytest.raises(ValueError):
            m.train_mlp(np.zeros((4, 2)), np.zeros(4), cfg)


class TestWeightsContainer:
    def test_round_trip(self, tmp_path):
        cfg = m.MLPConfig((6, 4, 3), ("relu", "tanh"), (0.2, 0.0),
                          output_kind="softmax", seed=5)
        net = m.build_mlp(4, cfg)
        path = tmp_path / "w.txt"
        m.save_weights(net, path)
        back = m.load_weights(path)
        X = np.random.default_rng(0).normal(size=(8, 4))
        np.testing.assert_array_equal(m.forward(net, X), m.forward(back, X))
        assert m.layer_labels(back) == m.layer_labels(net)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "w.txt"
        path.write_text("not a container\n", encoding="utf-8")
        with pytest.raises(ModelFormatError):
            m.load_weights(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ModelFormatError):
            m.load_weights(tmp_path / "absent.txt")
