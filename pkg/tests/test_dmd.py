import numpy as np
import pytest

from tgx import dmd


def stable_matrix(rng, dim, radius=0.9):
    a = rng.normal(size=(dim, dim))
    return a * (radius / max(abs(np.linalg.eigvals(a))))


def linear_trajectories(a, rng, count, length):
    trajs = []
    for _ in range(count):
        x = rng.normal(size=a.shape[0])
        states = [x]
        for _ in range(length - 1):
            states.append(a @ states[-1])
        trajs.append(np.array(states))
    return trajs


def rotation(theta):
    return np.array([[np.cos(theta), -np.sin(theta)],
                     [np.sin(theta), np.cos(theta)]])


class TestRidgeFit:
    def test_exact_linear_dynamics_recovered(self):
        rng = np.random.default_rng(0)
        a = stable_matrix(rng, 8)
        trajs = linear_trajectories(a, rng, 10, 21)  # 200 snapshot pairs
        fit = dmd.fit_dmd_global(trajs, gamma=1e-12)
        assert np.linalg.norm(fit.operator - a) < 1e-8

    def test_constant_trajectories_have_unit_eigenvalue_on_span(self):
        x = np.array([1.0, -2.0, 0.5])
        trajs = [np.tile(x, (10, 1))]
        fit = dmd.fit_dmd_global(trajs, gamma=1e-14)
        assert np.linalg.norm(fit.operator @ x - x) < 1e-6

    def test_huge_gamma_shrinks_operator_to_zero(self):
        rng = np.random.default_rng(1)
        trajs = linear_trajectories(stable_matrix(rng, 3), rng, 4, 10)
        fit = dmd.fit_dmd_global(trajs, gamma=1e12)
        assert np.abs(fit.operator).max() < 1e-9

    def test_zero_gamma_singular_falls_back_to_pinv(self):
        # rank-deficient snapshots: one direction only
        x = np.array([1.0, 0.0])
        fit = dmd.fit_dmd_node(np.array([[x, x], [2 * x, 2 * x], [4 * x, 4 * x]]),
                               gamma=0.0)
        assert fit.pinv_fallback
        assert np.isfinite(fit.operator).all()
        assert np.allclose(fit.operator @ x, 2 * x)  # doubling along the span

    def test_node_fit_rotation_eigenvalues_on_unit_circle(self):
        theta = 0.6
        rot = rotation(theta)
        rng = np.random.default_rng(2)
        horizon, n = 30, 5
        node_trajs = np.empty((horizon, n, 2))
        for i in range(n):
            x = rng.normal(size=2)
            for t in range(horizon):
                node_trajs[t, i] = x
                x = rot @ x
        fit = dmd.fit_dmd_node(node_trajs, gamma=1e-12)
        assert np.allclose(np.abs(fit.eigenvalues), 1.0, atol=1e-8)
        assert np.allclose(sorted(fit.eigenvalues.imag), sorted([-np.sin(theta), np.sin(theta)]),
                           atol=1e-8)

    def test_pairs_do_not_cross_trajectory_boundaries(self):
        # two constant trajectories at different levels: a cross-boundary pair
        # would break the exact fixed-point property of each
        t1 = np.tile(np.array([1.0, 0.0]), (6, 1))
        t2 = np.tile(np.array([0.0, 1.0]), (6, 1))
        x, y = dmd.snapshot_pairs([t1, t2])
        assert x.shape == (2, 10)
        assert np.array_equal(x, y)


class TestEig:
    def test_identity_all_ones(self):
        vals, vecs = dmd.eig_sorted(np.eye(4))
        assert np.allclose(vals, 1.0)
        assert np.allclose(np.linalg.norm(vecs, axis=0), 1.0)

    def test_rotation_gives_conjugate_unit_pair(self):
        theta = 0.35
        vals, _ = dmd.eig_sorted(rotation(theta))
        expected = {np.exp(1j * theta), np.exp(-1j * theta)}
        for v in vals:
            assert min(abs(v - e) for e in expected) < 1e-12

    def test_random_eigenpair_residuals(self):
        rng = np.random.default_rng(3)
        c = rng.normal(size=(5, 5))
        vals, vecs = dmd.eig_sorted(c)  # residual asserted internally
        resid = np.linalg.norm(c @ vecs - vecs * vals[None, :], axis=0)
        assert resid.max() < 1e-8 * np.linalg.norm(c)

    def test_sorted_by_decreasing_modulus(self):
        c = np.diag([0.2, 0.9, 0.5])
        vals, _ = dmd.eig_sorted(c)
        assert np.allclose(np.abs(vals), [0.9, 0.5, 0.2])

    def test_non_square_rejected(self):
        with pytest.raises(ValueError, match="square"):
            dmd.eig_sorted(np.ones((2, 3)))

    def test_diagonalization_reconstructs_operator(self):
        rng = np.random.default_rng(9)
        c = rng.normal(size=(6, 6))
        vals, vecs = dmd.eig_sorted(c)
        back = (vecs @ np.diag(vals) @ np.linalg.inv(vecs)).real
        assert np.linalg.norm(back - c) < 1e-6 * np.linalg.norm(c)

    def test_nearly_defective_operator_warns(self):
        c = np.array([[1.0, 1.0], [0.0, 1.0 + 1e-12]])  # almost a Jordan block
        with pytest.warns(UserWarning, match="defective"):
            dmd.eig_sorted(c)


class TestWeights:
    def test_constant_mode_gives_zero_time_weight(self):
        s = np.full(10, 2.0 + 1.0j)
        assert np.array_equal(dmd.time_weight(s), np.zeros(9))

    def test_unit_ramp_gives_unit_weights(self):
        s = np.arange(8, dtype=float)
        assert np.allclose(dmd.time_weight(s), np.ones(7))

    def test_step_change_spikes_at_the_step(self):
        c = 3.5
        s = np.concatenate([np.zeros(4), np.full(5, c)])
        w = dmd.time_weight(s)
        expected = np.zeros(8)
        expected[3] = c
        assert np.allclose(w, expected)

    def test_node_weight_identical_nodes_zero(self):
        assert dmd.node_weight(np.full(6, 1.7 + 0.3j)).max() < 1e-12

    def test_node_weight_single_outlier_hand_values(self):
        w = dmd.node_weight(np.array([1.0 + 0.0j, 0.0, 0.0, 0.0]))
        assert np.allclose(w, [0.75, 0.25, 0.25, 0.25])

    def test_node_weight_translation_invariant(self):
        rng = np.random.default_rng(4)
        vals = rng.normal(size=6) + 1j * rng.normal(size=6)
        shift = 2.3 - 1.1j
        assert np.allclose(dmd.node_weight(vals), dmd.node_weight(vals + shift))

    def test_spatiotemporal_matches_node_weight_at_final_time(self):
        rng = np.random.default_rng(5)
        series = rng.normal(size=(7, 4)) + 1j * rng.normal(size=(7, 4))
        w_g = dmd.spatiotemporal_weight(series)
        assert np.allclose(w_g[-1], dmd.node_weight(series[-1]))

    def test_all_equal_column_gives_zero_column(self):
        series = np.ones((5, 3), dtype=complex)
        series[2] = 4.2
        assert np.array_equal(dmd.spatiotemporal_weight(series), np.zeros((5, 3)))

    def test_spatiotemporal_hand_fixture(self):
        series = np.array([[1.0, 2.0, 3.0], [0.0, 0.0, 3.0]], dtype=complex)
        w = dmd.spatiotemporal_weight(series)
        assert np.allclose(w[0], [1.0, 0.0, 1.0])
        assert np.allclose(w[1], [1.0, 1.0, 2.0])

    def test_weights_invariant_to_global_phase_rotation(self):
        rng = np.random.default_rng(6)
        series = rng.normal(size=(9, 5)) + 1j * rng.normal(size=(9, 5))
        phase = np.exp(1j * 1.234)
        assert np.allclose(dmd.time_weight(series[:, 0]),
                           dmd.time_weight(phase * series[:, 0]))
        assert np.allclose(dmd.node_weight(series[-1]),
                           dmd.node_weight(phase * series[-1]))
        assert np.allclose(dmd.spatiotemporal_weight(series),
                           dmd.spatiotemporal_weight(phase * series))


class TestModeProperties:
    def test_modes_decay_geometrically_for_stable_systems(self):
        rng = np.random.default_rng(7)
        a = stable_matrix(rng, 4, radius=0.8)
        [traj] = linear_trajectories(a, rng, 1, 60)
        fit = dmd.fit_dmd_global([traj], gamma=1e-12)
        s = dmd.mode_series(fit, traj, 0)
        head = np.abs(s[:5]).max()
        tail = np.abs(s[-5:]).max()
        assert tail < 1e-3 * max(head, 1e-300) or tail < 1e-12

    def test_mode_eigen_residual_small_for_normal_operator(self):
        # scaled rotation is normal, so right eigenvectors are also left ones
        a = 0.95 * rotation(0.5)
        rng = np.random.default_rng(8)
        [traj] = linear_trajectories(a, rng, 1, 40)
        fit = dmd.fit_dmd_global([traj], gamma=1e-13)
        for mode in range(2):
            s = dmd.mode_series(fit, traj, mode)
            resid = np.abs(s[1:] - fit.eigenvalues[mode] * s[:-1])
            assert resid.max() < 1e-6
