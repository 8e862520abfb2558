"""VIF computation and the per-layer collinearity probe."""

import numpy as np
import pytest

from polykit import diagnostics as dg
from polykit import mlp as m


def correlated_pair(rho, n=200, seed=0):
    """Two centered unit columns with sample correlation exactly rho."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=n)
    b = rng.normal(size=n)
    a -= a.mean()
    a /= np.linalg.norm(a)
    b -= b.mean()
    b -= (b @ a) * a
    b /= np.linalg.norm(b)
    return np.column_stack([a, rho * a + np.sqrt(1 - rho**2) * b])


class TestVif:
    def test_orthogonal_columns_are_one(self):
        rng = np.random.default_rng(1)
        q, _ = np.linalg.qr(rng.normal(size=(50, 4)))
        q -= q.mean(axis=0)
        # re-orthogonalize after centering
        q, _ = np.linalg.qr(q)
        values = dg.vif(q)
        np.testing.assert_allclose(values, 1.0, atol=1e-8)

    def test_rho_squared_point_nine_gives_ten(self):
        X = correlated_pair(np.sqrt(0.9))
        values = dg.vif(X)
        np.testing.assert_allclose(values, 10.0, atol=1e-6)

    def test_duplicate_column_capped(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=40)
        values = dg.vif(np.column_stack([x, x]))
        np.testing.assert_array_equal(values, [dg.VIF_CAP, dg.VIF_CAP])

    def test_zero_variance_column_capped(self):
        rng = np.random.default_rng(3)
        X = np.column_stack([np.ones(30), rng.normal(size=30)])
        assert dg.vif(X)[0] == dg.VIF_CAP

    def test_two_column_identity_with_correlation(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(100, 2))
        X[:, 1] += 0.5 * X[:, 0]
        r = np.corrcoef(X[:, 0], X[:, 1])[0, 1]
        np.testing.assert_allclose(dg.vif(X), 1.0 / (1.0 - r**2), atol=1e-8)

    def test_scale_invariance(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(80, 3))
        X[:, 2] += X[:, 0]
        before = dg.vif(X)
        X[:, 1] *= 1e4
        after = dg.vif(X)
        np.testing.assert_allclose(before, after, rtol=1e-8)

    def test_needs_two_columns(self):
        with pytest.raises(ValueError):
            dg.vif(np.ones((5, 1)))

    def test_threaded_matches_serial(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(60, 5))
        np.testing.assert_array_equal(dg.vif(X), dg.vif(X, n_jobs=4))


class TestSummary:
    def test_all_ones(self):
        assert dg.vif_summary(np.array([1.0, 1.0, 1.0])) == (0.0, 1.0)

    def test_mixed(self):
        prop, mean = dg.vif_summary(np.array([5.0, 15.0, 40.0, 2.0]))
        assert prop == 0.5
        assert mean == 15.5

    def test_all_capped(self):
        vifs = np.full(10, dg.VIF_CAP)
        assert dg.vif_summary(vifs) == (1.0, dg.VIF_CAP)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            dg.vif_summary(np.array([]))


def identity_net(width, with_dropout=False):
    layers = [m.DenseLayer(np.eye(width), np.zeros(width), "identity")]
    if with_dropout:
        layers.append(m.DropoutLayer(0.4))
    layers.append(m.DenseLayer(np.eye(width), np.zeros(width), "identity"))
    cfg = m.MLPConfig((width, width), ("identity",),
                      (0.4,) if with_dropout else (0.0,))
    return m.MLP(tuple(layers), cfg, width)


class TestProbe:
    def test_identity_network_reports_input_summary(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(100, 3))
        X[:, 2] += X[:, 0]
        base_prop, base_mean = dg.vif_summary(dg.vif(X))
        reports = dg.probe_layers(identity_net(3), X)
        assert len(reports) == 2
        for rep in reports:
            assert rep.proportion_over_threshold == base_prop
            assert rep.mean_vif == pytest.approx(base_mean, rel=1e-12)

    def test_dropout_duplicates_preceding_dense_exactly(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(80, 4))
        cfg = m.MLPConfig((5, 5, 3), ("tanh", "tanh"), (0.4, 0.3),
                          output_kind="softmax", seed=2)
        net = m.build_mlp(4, cfg)
        reports = dg.probe_layers(net, X)
        labels = [r.layer_label for r in reports]
        assert labels == ["dense_1", "dropout_1", "dense_2", "dropout_2", "dense_3"]
        assert reports[1].vifs == reports[0].vifs
        assert reports[1].mean_vif == reports[0].mean_vif
        assert reports[3].vifs == reports[2].vifs

    def test_softmax_output_layer_is_capped(self):
        # softmax rows sum to one: exact collinearity in the last layer
        rng = np.random.default_rng(2)
        X = rng.normal(size=(60, 4))
        cfg = m.MLPConfig((5, 3), ("tanh",), output_kind="softmax", seed=0)
        net = m.build_mlp(4, cfg)
        reports = dg.probe_layers(net, X)
        assert reports[-1].mean_vif == dg.VIF_CAP
        assert reports[-1].proportion_over_threshold == 1.0

    def test_width_one_layer_undefined(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(30, 2))
        cfg = m.MLPConfig((1, 2), ("tanh",), seed=0)
        net = m.build_mlp(2, cfg)
        reports = dg.probe_layers(net, X)
        assert reports[0].undefined
        assert not reports[1].undefined

    def test_untrained_network_probes_cleanly(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(50, 6))
        cfg = m.MLPConfig((4, 4, 2), ("relu", "relu"), (0.2, 0.2), seed=9)
        net = m.build_mlp(6, cfg)
        reports = dg.probe_layers(net, X)
        assert len(reports) == 5
        assert all(np.isfinite(r.mean_vif) for r in reports)

    def test_square_activation_collinearity_grows(self):
        # deeper squares of smooth data should not get less collinear
        wins = 0
        for seed in range(5):
            rng = np.random.default_rng(seed)
            X = rng.normal(size=(300, 3))
            cfg = m.MLPConfig((6, 6, 6), ("square", "square"), seed=seed)
            net = m.build_mlp(3, cfg)
            reports = dg.probe_layers(net, X)
            means = [r.mean_vif for r in reports]
            wins += all(b >= a * 0.999 for a, b in zip(means, means[1:]))
        assert wins >= 3


class TestFormatting:
    def test_table_layout(self):
        reports = [
            dg.VIFReport("dense_1", (1.0, 2.0), 0.0, 1.5),
            dg.VIFReport("dense_2", (), 0.0, 0.0, undefined=True),
        ]
        text = dg.format_reports(reports)
        lines = text.splitlines()
        assert lines[0].split() == ["layer", "share_vif_over_10", "mean_vif"]
        assert "dense_1" in lines[1]
        assert "undefined" in lines[2]

    def test_csv_layout(self):
        reports = [dg.VIFReport("dense_1", (1.0,), 0.25, 3.5)]
        text = dg.reports_to_csv(reports)
        assert text.splitlines()[0] == "layer,share_over_threshold,mean_vif,threshold,undefined"
        assert text.splitlines()[1].startswith("dense_1,0.25,3.5,")
