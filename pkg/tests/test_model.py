"""Model: init, forward symmetries, losses, trainer, checkpoints."""

import numpy as np
import pytest

import oracles
from conftest import micro_config, synthetic_complex
from gdegan import equivcheck, gda_layer, geom, model
from gdegan.errors import (
    ConfigError,
    CorruptCheckpoint,
    DivergenceError,
    ShapeError,
)
from gdegan.nn import softplus


class TestConfig:
    def test_defaults_valid(self):
        model.ModelConfig().validate()

    def test_head_divisibility(self):
        with pytest.raises(ConfigError):
            model.ModelConfig(h_d=100, e_d=100, n_heads=3).validate()

    def test_edge_width_must_match(self):
        with pytest.raises(ConfigError):
            model.ModelConfig(e_d=64).validate()

    def test_text_round_trip(self):
        cfg = micro_config(n_layers=2, tau=0.4)
        again = model.ModelConfig.from_text(cfg.to_text())
        assert again == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            model.ModelConfig.from_text("bogus=3\n")


class TestInitModel:
    def test_same_seed_bitwise_identical(self):
        cfg = micro_config()
        w1 = model.init_model(cfg, 7)
        w2 = model.init_model(cfg, 7)
        np.testing.assert_array_equal(w1.flat, w2.flat)

    def test_different_seeds_differ(self):
        cfg = micro_config()
        assert np.any(model.init_model(cfg, 1).flat != model.init_model(cfg, 2).flat)

    def test_temperatures_start_at_expected_value(self):
        cfg = micro_config()
        w = model.init_model(cfg, 0)
        np.testing.assert_allclose(
            softplus(w.layers[0].params.raw_xi), 2.03, atol=1e-6
        )

    def test_default_parameter_count_in_range(self):
        w = model.init_model(model.ModelConfig(), 0)
        assert 1_400_000 <= model.count_params(w) <= 2_400_000

    def test_zero_layer_config_counts_init_and_head_only(self):
        cfg = micro_config(n_layers=0)
        w = model.init_model(cfg, 0)
        names = [name for name, _ in w.named_tensors()]
        assert all(n.startswith(("init.", "head.")) for n in names)

    def test_attention_scalars_per_layer(self):
        cfg = micro_config(n_layers=2)
        with_attn = model.count_params(model.init_model(cfg, 0))
        xi_total = sum(
            arr.size
            for name, arr in model.init_model(cfg, 0).named_tensors()
            if name.endswith("raw_xi")
        )
        assert xi_total == cfg.n_heads * cfg.n_layers
        assert with_attn - xi_total == with_attn - cfg.n_heads * cfg.n_layers


class TestForward:
    def test_permutation_equivariance(self):
        cfg = micro_config()
        w = model.init_model(cfg, 4)
        rng = np.random.default_rng(5)
        g = equivcheck.random_graph(12, cfg, rng)
        perm = rng.permutation(12)
        gp = equivcheck.transformed_graph(g, cfg, perm=perm)
        p0 = model.forward(g, w, cfg)
        p1 = model.forward(gp, w, cfg)
        np.testing.assert_allclose(p1.probs, p0.probs[perm], atol=1e-10)

    def test_rigid_motion(self):
        cfg = micro_config(l_max=2)
        w = model.init_model(cfg, 6)
        rng = np.random.default_rng(7)
        g = equivcheck.random_graph(15, cfg, rng)
        rot = geom.Rotation.random(rng).matrix
        shift = rng.normal(scale=25.0, size=3)
        gt = equivcheck.transformed_graph(g, cfg, rot=rot, shift=shift)
        p0 = model.forward(g, w, cfg)
        p1 = model.forward(gt, w, cfg)
        np.testing.assert_allclose(p1.probs, p0.probs, rtol=1e-5, atol=1e-8)
        np.testing.assert_allclose(p1.directions, p0.directions @ rot.T, atol=1e-4)

    def test_zero_weights_give_sigmoid_of_bias(self):
        cfg = micro_config()
        w = model.init_model(cfg, 0)
        w.flat[:] = 0.0
        for name, arr in w.named_tensors():
            if name == "head.b2":
                arr[:] = 0.7
        rng = np.random.default_rng(8)
        g = equivcheck.random_graph(9, cfg, rng)
        pred = model.forward(g, w, cfg)
        np.testing.assert_allclose(pred.probs, 1.0 / (1.0 + np.exp(-0.7)), atol=1e-12)

    def test_probs_in_open_interval(self):
        cfg = micro_config()
        w = model.init_model(cfg, 9)
        g = equivcheck.random_graph(10, cfg, np.random.default_rng(10))
        pred = model.forward(g, w, cfg)
        assert np.all(pred.probs > 0.0) and np.all(pred.probs < 1.0)

    def test_directions_normalized_with_guard(self):
        # directions are v / (|v| + eps) for the channel-mean v of the
        # degree-1 block: never above unit norm, and unit to within
        # eps / |v| whenever the block is active
        cfg = micro_config()
        w = model.init_model(cfg, 11)
        g = equivcheck.random_graph(10, cfg, np.random.default_rng(12))
        state, pred = model.forward_state(g, w, cfg)
        v = state.x[0].mean(axis=2)
        vnorm = np.linalg.norm(v, axis=1)
        norms = np.linalg.norm(pred.directions, axis=1)
        np.testing.assert_allclose(norms, vnorm / (vnorm + cfg.eps), atol=1e-12)
        assert np.all(norms <= 1.0)
        active = vnorm > 1e-3
        assert active.any()
        assert np.all(norms[active] > 0.999)

    def test_feature_width_mismatch(self):
        cfg = micro_config()
        w = model.init_model(cfg, 0)
        g = equivcheck.random_graph(5, micro_config(n_d=6), np.random.default_rng(0))
        with pytest.raises(ShapeError):
            model.forward(g, w, cfg)

    def test_mirror_probs_identical(self):
        cfg = micro_config(l_max=2)
        w = model.init_model(cfg, 13)
        rng = np.random.default_rng(14)
        g = equivcheck.random_graph(15, cfg, rng)
        gm = equivcheck.transformed_graph(g, cfg, mirror=True)
        s0, p0 = model.forward_state(g, w, cfg)
        s1, p1 = model.forward_state(gm, w, cfg)
        np.testing.assert_allclose(p1.probs, p0.probs, rtol=1e-5, atol=1e-9)
        np.testing.assert_allclose(s1.x[0], -s0.x[0], atol=1e-9)  # odd parity
        np.testing.assert_allclose(s1.x[1], s0.x[1], atol=1e-9)   # even parity


class TestLosses:
    def test_dice_exact_match_is_zero(self):
        y = np.array([1.0, 0.0, 1.0, 0.0])
        assert model.dice_loss(y, y) == pytest.approx(0.0)

    def test_dice_total_mismatch(self):
        y = np.array([1.0] * 5 + [0.0] * 5)
        assert model.dice_loss(1.0 - y, y) == pytest.approx(1.0 - 1.0 / 11.0)

    def test_dice_empty_masks(self):
        z = np.zeros(6)
        assert model.dice_loss(z, z) == pytest.approx(0.0)

    def test_dice_range_fuzzed(self):
        rng = np.random.default_rng(15)
        for _ in range(1000):
            n = int(rng.integers(1, 30))
            y_hat = rng.uniform(size=n)
            y = (rng.uniform(size=n) < 0.4).astype(float)
            val = model.dice_loss(y_hat, y)
            assert 0.0 <= val <= 1.0

    def test_dice_matches_oracle(self):
        rng = np.random.default_rng(16)
        y_hat = rng.uniform(size=9)
        y = (rng.uniform(size=9) < 0.5).astype(float)
        np.testing.assert_allclose(
            model.dice_loss(y_hat, y), oracles.dice(y_hat.tolist(), y.tolist()), atol=1e-12
        )

    def test_dice_length_mismatch(self):
        with pytest.raises(ShapeError):
            model.dice_loss(np.zeros(3), np.zeros(4))

    def test_directional_aligned(self):
        d = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
        assert model.directional_loss(d, d, np.array([True, True])) == pytest.approx(0.0)

    def test_directional_opposed(self):
        d = np.array([[0.0, 0.0, 1.0]])
        assert model.directional_loss(-d, d, np.array([True])) == pytest.approx(2.0)

    def test_directional_mixed(self):
        d_hat = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        d_true = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        assert model.directional_loss(d_hat, d_true, np.array([True, True])) == pytest.approx(0.5)

    def test_directional_empty_mask(self):
        d = np.zeros((3, 3))
        assert model.directional_loss(d, d, np.zeros(3, dtype=bool)) == 0.0

    def test_total_is_sum(self):
        g, _, _ = synthetic_complex()
        cfg = micro_config()
        w = model.init_model(cfg, 17)
        pred = model.forward(g, w, cfg)
        expected = model.dice_loss(pred.probs, g.labels.astype(float)) + model.directional_loss(
            pred.directions, g.true_dirs, model.direction_mask(g)
        )
        assert model.total_loss(g, pred) == pytest.approx(expected, abs=1e-14)


class TestToyTrain:
    def test_zero_learning_rate_keeps_weights(self):
        g, _, _ = synthetic_complex()
        cfg = micro_config()
        before = model.init_model(cfg, cfg.seed).flat.copy()
        trained, trace = model.toy_train(g, cfg, steps=2, lr=0.0)
        np.testing.assert_array_equal(trained.flat, before)
        assert len(set(np.round(trace, 12))) == 1

    def test_micro_config_enforced(self):
        g, _, _ = synthetic_complex()
        with pytest.raises(ConfigError):
            model.toy_train(g, micro_config(h_d=32, e_d=32), steps=1, lr=0.1)

    def test_nan_hook_diverges(self):
        g, _, _ = synthetic_complex()
        with pytest.raises(DivergenceError):
            model.toy_train(g, micro_config(), steps=1, lr=0.1, nan_hook=True)

    def test_loss_decreases(self):
        g, _, _ = synthetic_complex()
        _, trace = model.toy_train(g, micro_config(), steps=6, lr=0.2)
        assert trace[-1] < trace[0]

    def test_temperature_gradient_matches_hand_derivative(self):
        # receiver with two distinct neighbors: the attention derivative with
        # respect to the temperature follows the softmax quotient rule
        cfg = micro_config(n_d=2, h_d=2, n_heads=1)
        rng = np.random.default_rng(18)
        positions = np.array([[0.0, 0, 0], [3.0, 0, 0], [-3.0, 0.5, 0]])
        feats = rng.normal(size=(3, 2)).astype(np.float32)
        from gdegan.protein import graph_from_arrays

        g = graph_from_arrays(positions, feats, 10.0, 8)
        h = feats.astype(np.float64)
        _, var = gda_layer.neighborhood_stats(g, h)
        d_scaled = gda_layer.scaled_differences(h, var, cfg.eps, g)

        raw = 0.45
        fd_step = 1e-6
        alphas = {}
        for delta in (fd_step, -fd_step, 0.0):
            params = gda_layer.GDAParams(raw_xi=np.array([raw + delta]), eps=cfg.eps)
            alphas[delta] = gda_layer.gaussian_attention(d_scaled, params, g)
        fd = (alphas[fd_step] - alphas[-fd_step]) / (2 * fd_step)

        xi = float(softplus(np.array([raw]))[0])
        nbrs = {i: g.neighbors(i).tolist() for i in range(g.n)}
        var_l = [row.tolist() for row in var]
        hand = oracles.attention_xi_grad(
            [row.tolist() for row in h], nbrs, var_l, cfg.eps, [xi], 0
        )
        chain = 1.0 / (1.0 + np.exp(-raw))  # d xi / d raw
        for e in range(g.n_edges):
            key = (int(g.edge_dst[e]), int(g.edge_src[e]))
            expected = hand[key] * chain
            if abs(expected) > 1e-12:
                assert fd[e, 0] == pytest.approx(expected, rel=1e-4)
            else:
                assert abs(fd[e, 0]) < 1e-6

    def test_two_node_graph_has_vanishing_temperature_gradient(self):
        # a single neighbor pins the attention row at exactly 1 regardless
        # of temperature, so both derivative routes are zero
        cfg = micro_config(n_d=2, h_d=2, n_heads=1)
        from gdegan.protein import graph_from_arrays

        g = graph_from_arrays(
            np.array([[0.0, 0, 0], [3.0, 0, 0]]),
            np.random.default_rng(19).normal(size=(2, 2)).astype(np.float32),
            10.0,
            8,
        )
        h = g.node_features.astype(np.float64)
        _, var = gda_layer.neighborhood_stats(g, h)
        d_scaled = gda_layer.scaled_differences(h, var, cfg.eps, g)
        out = {}
        for delta in (1e-6, -1e-6):
            params = gda_layer.GDAParams(raw_xi=np.array([0.45 + delta]), eps=cfg.eps)
            out[delta] = gda_layer.gaussian_attention(d_scaled, params, g)
        fd = (out[1e-6] - out[-1e-6]) / 2e-6
        np.testing.assert_allclose(fd, 0.0, atol=1e-8)
        nbrs = {i: g.neighbors(i).tolist() for i in range(g.n)}
        hand = oracles.attention_xi_grad(
            [r.tolist() for r in h], nbrs, [r.tolist() for r in var], cfg.eps, [2.0], 0
        )
        assert all(abs(v) < 1e-15 for v in hand.values())


class TestCheckpoint:
    def test_round_trip_bitwise(self):
        cfg = micro_config(n_layers=2, l_max=2)
        w = model.init_model(cfg, 20)
        blob = model.save_checkpoint(w, cfg)
        loaded, cfg2 = model.load_checkpoint(blob)
        assert cfg2 == cfg
        np.testing.assert_array_equal(loaded.flat, w.flat)
        # and saving again reproduces the identical bytes
        assert model.save_checkpoint(loaded, cfg2) == blob

    def test_forward_identical_after_round_trip(self):
        cfg = micro_config()
        w = model.init_model(cfg, 21)
        g = equivcheck.random_graph(8, cfg, np.random.default_rng(22))
        loaded, _ = model.load_checkpoint(model.save_checkpoint(w, cfg))
        p0 = model.forward(g, w, cfg)
        p1 = model.forward(g, loaded, cfg)
        np.testing.assert_array_equal(p0.probs, p1.probs)

    def test_truncated_payload(self):
        cfg = micro_config()
        blob = model.save_checkpoint(model.init_model(cfg, 0), cfg)
        with pytest.raises(CorruptCheckpoint):
            model.load_checkpoint(blob[:-8])

    def test_shape_mismatch_on_expected_config(self):
        cfg = micro_config()
        blob = model.save_checkpoint(model.init_model(cfg, 0), cfg)
        other = micro_config(h_d=16, e_d=16)
        with pytest.raises(ShapeError):
            model.load_checkpoint(blob, expected_cfg=other)

    def test_tampered_manifest(self):
        cfg = micro_config()
        blob = model.save_checkpoint(model.init_model(cfg, 0), cfg)
        with pytest.raises(CorruptCheckpoint):
            model.load_checkpoint(blob.replace(b"init.w_a", b"init.w_zz", 1))

    def test_trained_weights_round_trip(self):
        g, _, _ = synthetic_complex()
        cfg = micro_config()
        trained, _ = model.toy_train(g, cfg, steps=1, lr=0.2)
        loaded, _ = model.load_checkpoint(model.save_checkpoint(trained, cfg))
        np.testing.assert_array_equal(loaded.flat, trained.flat)
