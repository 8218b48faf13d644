import math

import numpy as np
import pytest

from tgx import autodiff as ad
from tgx import model as tgm
from tgx.autodiff import Tensor
from tgx.data import TemporalGraph


def toy_graph():
    """3 nodes, 4 steps, a changing edge set, binary features."""
    edges = [[(0, 1)], [(0, 1), (1, 2)], [(1, 2)], [(0, 2), (0, 1)]]
    features = np.array([[1, 0, 0], [1, 1, 0], [1, 1, 0], [1, 1, 1]], dtype=np.uint8)
    adjs = [tgm.normalized_adjacency(step, 3) for step in edges]
    return features, edges, adjs


def make_single_layer_traj(seq):
    node_states = [[Tensor(a)] for a in seq]
    node_concat = [ad.concat(per, axis=1) for per in node_states]
    graph_states = [ad.reduce_sum(c, axis=0, keepdims=True) for c in node_concat]
    return tgm.Trajectories(node_states, node_concat, graph_states)


class TestGcn:
    def test_no_edges_identity_weights_passes_features_through(self):
        x = np.array([[0.3, -1.0, 2.0], [1.5, 0.0, 0.25]])
        out = tgm.gcn_forward(x, [], Tensor(np.eye(3)))
        assert np.allclose(out.value, x)

    def test_two_nodes_one_edge_constant_features(self):
        # hand evaluation: A+I all-ones, degrees 2, normalized matrix is all 1/2
        x = np.ones((2, 1))
        out = tgm.gcn_forward(x, [(0, 1)], Tensor(np.eye(1)))
        assert np.allclose(out.value, np.ones((2, 1)))

    def test_isolated_node_has_no_division_by_zero(self):
        out = tgm.gcn_forward(np.ones((3, 1)), [(0, 1)], Tensor(np.eye(1)))
        assert np.isfinite(out.value).all()
        assert out.value[2, 0] == 1.0

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(5, 2))
        w = Tensor(rng.normal(size=(2, 3)))
        edges = [(0, 1), (1, 3), (2, 4)]
        perm = rng.permutation(5)
        p_edges = [(perm[u], perm[v]) for (u, v) in edges]
        out = tgm.gcn_forward(x, edges, w).value
        out_p = tgm.gcn_forward(x[np.argsort(perm)], p_edges, w).value
        assert np.allclose(out_p[perm], out[np.argsort(perm)][perm])
        # direct statement: permuting inputs permutes outputs
        x_p = np.empty_like(x)
        x_p[perm] = x
        out_p2 = tgm.gcn_forward(x_p, p_edges, w).value
        expected = np.empty_like(out)
        expected[perm] = out
        assert np.allclose(out_p2, expected)


class TestLstmStep:
    def zero_weights(self, f):
        return {g: Tensor(np.zeros((f, f))) for g in
                ("xi", "hi", "xf", "hf", "xg", "hg", "xo", "ho")}

    def test_zero_weights_zero_state(self):
        w = self.zero_weights(3)
        h, c = tgm.lstm_step(Tensor(np.ones((2, 3))), Tensor(np.zeros((2, 3))),
                             Tensor(np.zeros((2, 3))), w)
        assert np.array_equal(h.value, np.zeros((2, 3)))
        assert np.array_equal(c.value, np.zeros((2, 3)))

    def test_zero_weights_halve_previous_cell(self):
        # gates sit at sigma(0)=1/2 and g=0, so c = c_prev / 2
        w = self.zero_weights(2)
        c_prev = np.array([[0.8, -0.4]])
        h, c = tgm.lstm_step(Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))),
                             Tensor(c_prev), w)
        assert np.allclose(c.value, 0.5 * c_prev)
        assert np.allclose(h.value, 0.5 * np.tanh(0.5 * c_prev))

    def test_random_scalar_cell_matches_hand_evaluation(self):
        rng = np.random.default_rng(4)
        names = ("xi", "hi", "xf", "hf", "xg", "hg", "xo", "ho")
        wv = {n: rng.normal() for n in names}
        x, h0, c0 = rng.normal(), rng.normal(), rng.normal()

        sig = lambda v: 1.0 / (1.0 + math.exp(-v))
        i = sig(wv["xi"] * x + wv["hi"] * h0)
        f = sig(wv["xf"] * x + wv["hf"] * h0)
        g = math.tanh(wv["xg"] * x + wv["hg"] * h0)
        o = sig(wv["xo"] * x + wv["ho"] * h0)
        c_ref = f * c0 + i * g
        h_ref = o * math.tanh(c_ref)

        w = {n: Tensor(np.array([[wv[n]]])) for n in names}
        h, c = tgm.lstm_step(Tensor([[x]]), Tensor([[h0]]), Tensor([[c0]]), w)
        assert abs(h.value.item() - h_ref) < 1e-12
        assert abs(c.value.item() - c_ref) < 1e-12

    def test_gate_ranges(self):
        rng = np.random.default_rng(8)
        w = {g: Tensor(rng.normal(size=(3, 3))) for g in
             ("xi", "hi", "xf", "hf", "xg", "hg", "xo", "ho")}
        h, c = tgm.lstm_step(Tensor(rng.normal(size=(4, 3))),
                             Tensor(rng.normal(size=(4, 3))),
                             Tensor(rng.normal(size=(4, 3))), w)
        assert (np.abs(h.value) < 1.0).all()


class TestEncode:
    def test_single_step_graph(self):
        cfg = tgm.ModelConfig(hidden=4, layers=2, mlp_layers=1)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(0))
        feats = np.array([[1, 0]], dtype=np.uint8)
        adjs = [tgm.normalized_adjacency([(0, 1)], 2)]
        traj = tgm.encode(feats, adjs, params)
        assert traj.horizon == 1
        assert np.array_equal(traj.graph_states[-1].value,
                              traj.graph_states[0].value)

    def test_zero_features_zero_weights_all_states_zero(self):
        cfg = tgm.ModelConfig(hidden=3, layers=2, mlp_layers=1)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(0))
        for t in params.tensors.values():
            t.value = np.zeros_like(t.value)
        feats = np.zeros((5, 4), dtype=np.uint8)
        adjs = [tgm.normalized_adjacency([], 4)] * 5
        traj = tgm.encode(feats, adjs, params)
        for g in traj.graph_states:
            assert np.array_equal(g.value, np.zeros((1, 6)))

    def test_shape_contract(self):
        cfg = tgm.ModelConfig(hidden=16, layers=2, mlp_layers=1)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(0))
        feats = (np.random.default_rng(1).random((7, 5)) < 0.5).astype(np.uint8)
        adjs = [tgm.normalized_adjacency([(0, 1), (2, 3)], 5)] * 7
        arrays = tgm.encode(feats, adjs, params).to_arrays()
        assert arrays.graph_states.shape == (7, 32)
        assert arrays.node_states.shape == (7, 5, 2, 16)
        assert arrays.node_concat.shape == (7, 5, 32)
        assert np.array_equal(arrays.graph_embedding, arrays.graph_states[-1])
        assert np.allclose(arrays.node_concat.sum(axis=1), arrays.graph_states)

    def test_node_permutation_invariance_of_pooled_states_and_logit(self):
        rng = np.random.default_rng(3)
        cfg = tgm.ModelConfig(hidden=4, layers=2, mlp_layers=2)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(9))
        feats, edges, adjs = toy_graph()
        perm = rng.permutation(3)
        p_feats = feats[:, np.argsort(perm)][:, :]
        p_feats = np.empty_like(feats)
        p_feats[:, perm] = feats
        p_edges = [[(int(perm[u]), int(perm[v])) for (u, v) in step] for step in edges]
        p_adjs = [tgm.normalized_adjacency(step, 3) for step in p_edges]
        t1 = tgm.encode(feats, adjs, params)
        t2 = tgm.encode(p_feats, p_adjs, params)
        for a, b in zip(t1.graph_states, t2.graph_states):
            assert np.allclose(a.value, b.value)
        # equivariance of the per-node trajectories themselves
        for per_t1, per_t2 in zip(t1.node_states, t2.node_states):
            for h1, h2 in zip(per_t1, per_t2):
                assert np.allclose(h2.value[perm], h1.value)
        y1 = tgm.readout(t1.graph_states[-1], params).value
        y2 = tgm.readout(t2.graph_states[-1], params).value
        assert np.allclose(y1, y2)


class TestReadout:
    def test_zero_weights_give_half_probability(self):
        cfg = tgm.ModelConfig(hidden=2, layers=1, mlp_layers=2)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(0))
        for j in range(2):
            t = params.tensors[f"mlp.{j}"]
            t.value = np.zeros_like(t.value)
        y = tgm.readout(Tensor(np.ones((1, 2))), params)
        assert y.value.item() == 0.0

    def test_single_layer_is_a_dot_product(self):
        cfg = tgm.ModelConfig(hidden=2, layers=1, mlp_layers=1)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(1))
        h = np.array([[0.25, -1.5]])
        y = tgm.readout(Tensor(h), params)
        assert np.allclose(y.value, h @ params.tensors["mlp.0"].value)

    def test_two_layer_matches_hand_computation(self):
        cfg = tgm.ModelConfig(hidden=2, layers=1, mlp_layers=2)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(2))
        w0 = np.array([[0.5, -1.0], [2.0, 0.25]])
        w1 = np.array([[1.5], [-0.5]])
        params.tensors["mlp.0"].value = w0
        params.tensors["mlp.1"].value = w1
        h = np.array([[0.1, 0.9]])
        expected = np.tanh(h @ w0) @ w1
        y = tgm.readout(Tensor(h), params)
        assert np.allclose(y.value, expected, atol=1e-15)


class TestKoopmanReconstruct:
    def test_identity_operator_shifts_the_series(self):
        rng = np.random.default_rng(5)
        seq = [rng.normal(size=(3, 2)) for _ in range(5)]
        traj = make_single_layer_traj(seq)
        recon = tgm.koopman_reconstruct(traj, Tensor(np.eye(2)))
        assert recon[0] is None
        for t in range(1, 5):
            assert np.allclose(recon[t].value, traj.graph_states[t - 1].value)

    def test_zero_operator_gives_zero(self):
        seq = [np.random.default_rng(6).normal(size=(2, 2)) for _ in range(4)]
        recon = tgm.koopman_reconstruct(make_single_layer_traj(seq), Tensor(np.zeros((2, 2))))
        for t in range(1, 4):
            assert np.array_equal(recon[t].value, np.zeros((1, 2)))

    def test_rotation_traces_the_rotated_sequence(self):
        theta = 0.3
        rot = np.array([[np.cos(theta), np.sin(theta)],
                        [-np.sin(theta), np.cos(theta)]])
        seq = [np.array([[1.0, 0.0]]), np.array([[0.5, 0.5]]), np.array([[0.0, 1.0]])]
        recon = tgm.koopman_reconstruct(make_single_layer_traj(seq), Tensor(rot))
        for t in range(1, 3):
            assert np.allclose(recon[t].value, seq[t - 1] @ rot)


class TestLoss:
    def test_bce_of_zero_logit_is_log_two(self):
        y = Tensor(np.zeros((1, 1)))
        loss = tgm.bce_loss(y, 1)
        assert abs(float(loss.value) - math.log(2.0)) < 1e-12
        loss0 = tgm.bce_loss(y, 0)
        assert abs(float(loss0.value) - math.log(2.0)) < 1e-12

    def test_beta_zero_reduces_to_bce_plus_rec(self):
        feats, edges, adjs = toy_graph()
        cfg = tgm.ModelConfig(hidden=3, layers=2, mlp_layers=2, alpha=1.0, beta=0.0)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(7))
        loss, _ = tgm.loss_total(feats, adjs, 1, params)

        traj = tgm.encode(feats, adjs, params)
        y = tgm.readout(traj.graph_states[-1], params)
        recon = tgm.koopman_reconstruct(traj, params.tensors["koopman"])
        y_rec = tgm.readout(recon[-1], params)
        expected = float(tgm.bce_loss(y, 1).value) + float(tgm.bce_loss(y_rec, 1).value)
        assert abs(float(loss.value) - expected) < 1e-12

    def test_alpha_beta_zero_matches_plain_bce_gradients_bitwise(self):
        feats, edges, adjs = toy_graph()
        cfg = tgm.ModelConfig(hidden=3, layers=1, mlp_layers=1, alpha=0.0, beta=0.0)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(11))
        loss, _ = tgm.loss_total(feats, adjs, 1, params)
        g1 = ad.gradients(loss, params.tensors)

        traj = tgm.encode(feats, adjs, params)
        plain = tgm.bce_loss(tgm.readout(traj.graph_states[-1], params), 1)
        g2 = ad.gradients(plain, params.tensors)
        for k in g1:
            assert np.array_equal(g1[k], g2[k])

    def test_full_loss_gradients_match_finite_differences(self):
        feats, edges, adjs = toy_graph()
        cfg = tgm.ModelConfig(hidden=3, layers=2, mlp_layers=2, alpha=1.0,
                              beta=0.5, koopman_decay=1e-3)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(13))
        loss, _ = tgm.loss_total(feats, adjs, 1, params)
        grads = ad.gradients(loss, params.tensors)

        def f():
            return float(tgm.loss_total(feats, adjs, 1, params)[0].value)

        fd = ad.finite_difference(f, params.tensors, step=1e-5)
        for name in params.tensors:
            assert ad.relative_error(grads[name], fd[name]) < 1e-4, name


class TestTraining:
    def _pair(self):
        horizon, n = 6, 4
        edges = [[(0, 1), (1, 2), (2, 3)]] * horizon
        ones = np.zeros((horizon, n), dtype=np.uint8)
        ones[2:] = 1
        pos = TemporalGraph(n, edges, ones, 1, "p0")
        neg = TemporalGraph(n, edges, np.zeros((horizon, n), dtype=np.uint8), 0, "n0")
        return [pos, neg]

    def test_zero_learning_rate_keeps_parameters(self):
        graphs = self._pair()
        cfg = tgm.ModelConfig(hidden=3, layers=1, mlp_layers=1, lr=0.0, epochs=2,
                              batch=2, val_fraction=0.0, seed=0, beta=0.0)
        params, _ = tgm.train(graphs, cfg)
        fresh = tgm.GcrnParams(cfg, rng=np.random.default_rng([cfg.seed, 0]))
        for k in params.tensors:
            assert np.array_equal(params.tensors[k].value, fresh.tensors[k].value)

    def test_separable_pair_reaches_full_training_accuracy(self):
        graphs = self._pair()
        cfg = tgm.ModelConfig(hidden=4, layers=1, mlp_layers=1, lr=0.05, epochs=60,
                              batch=2, val_fraction=0.0, seed=1, alpha=1.0, beta=0.05)
        params, history = tgm.train(graphs, cfg)
        assert history["best_train_acc"] == 1.0

    def test_empty_or_single_class_dataset_rejected(self):
        with pytest.raises(ValueError):
            tgm.train([], tgm.ModelConfig())
        pos = self._pair()[0]
        with pytest.raises(ValueError):
            tgm.train([pos], tgm.ModelConfig())

    def test_training_is_deterministic(self):
        graphs = self._pair()
        cfg = tgm.ModelConfig(hidden=3, layers=1, mlp_layers=1, lr=0.05, epochs=3,
                              batch=1, val_fraction=0.0, seed=5)
        p1, h1 = tgm.train(graphs, cfg)
        p2, h2 = tgm.train(graphs, cfg)
        for k in p1.tensors:
            assert np.array_equal(p1.tensors[k].value, p2.tensors[k].value)
        for e1, e2 in zip(h1["epochs"], h2["epochs"]):
            assert e1["train_loss"] == e2["train_loss"]
            assert e1["train_acc"] == e2["train_acc"]


class TestPersistence:
    def test_checkpoint_round_trip(self, tmp_path):
        cfg = tgm.ModelConfig(hidden=3, layers=2, mlp_layers=2)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(17))
        path = tmp_path / "ckpt.json"
        tgm.save_checkpoint(path, params, extra={"config_hash": "abc"})
        loaded, payload = tgm.load_checkpoint(path)
        assert payload["config_hash"] == "abc"
        for k in params.tensors:
            assert np.array_equal(loaded.tensors[k].value, params.tensors[k].value)

    def test_embedding_dump_round_trip_and_recompute(self, tmp_path):
        feats, edges, adjs = toy_graph()
        tg = TemporalGraph(3, edges, feats, 1, "g0000p")
        cfg = tgm.ModelConfig(hidden=3, layers=2, mlp_layers=1)
        params = tgm.GcrnParams(cfg, rng=np.random.default_rng(19))
        path = tmp_path / "emb.jsonl"
        tgm.dump_embeddings(path, params, [tg], split_map={"g0000p": "val"},
                            config_hash="h123")
        records, header = tgm.read_embeddings(path)
        assert header["config_hash"] == "h123"
        [rec] = records
        assert rec["split"] == "val" and rec["T"] == 4 and rec["N"] == 3
        arrays = tgm.encode(feats, adjs, params).to_arrays()
        assert np.array_equal(rec["h_graph"], arrays.graph_states)
        assert np.array_equal(rec["h_node"], arrays.node_concat)


def test_linear_fit_residual_zero_on_linear_data():
    rng = np.random.default_rng(23)
    a = rng.normal(size=(4, 4)) * 0.4
    states = [rng.normal(size=4)]
    for _ in range(20):
        states.append(a @ states[-1])
    resid = tgm.linear_fit_residual([np.array(states)])
    assert resid < 1e-6
