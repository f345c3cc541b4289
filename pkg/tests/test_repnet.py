import numpy as np
import pytest

from rtl.errors import ConfigError, DimensionMismatch
from rtl.repnet import (GradientBundle, NetworkConfig, NetworkParams, forward, init_params,
                        loss_and_gradients, sgd_step, with_output_transform)


def _flatten(params):
    return np.concatenate([a.ravel() for a in params.weights] + [b.ravel() for b in params.biases])


def _unflatten(template, flat):
    weights, biases, pos = [], [], 0
    for A in template.weights:
        weights.append(flat[pos:pos + A.size].reshape(A.shape))
        pos += A.size
    for b in template.biases:
        biases.append(flat[pos:pos + b.size].reshape(b.shape))
        pos += b.size
    return NetworkParams(template.config, tuple(weights), tuple(biases))


def _batches(rng, q, p, sizes):
    return [(rng.uniform(-1, 1, size=(n, q)), rng.standard_normal(n), rng.standard_normal(p)) for n in sizes]


class TestNetworkConfig:
    def test_layer_sizes(self):
        assert NetworkConfig(3, 2, depth=2, width=4).layer_sizes == [3, 4, 4, 2]

    def test_depth_zero_is_affine(self):
        assert NetworkConfig(3, 2, depth=0).layer_sizes == [3, 2]

    def test_rejects_zero_width(self):
        with pytest.raises(ConfigError):
            NetworkConfig(3, 2, width=0)

    def test_from_dict_unbounded(self):
        cfg = NetworkConfig.from_dict({"depth": 1, "width": 8, "param_bound": "unbounded"}, input_dim=4, output_dim=2)
        assert cfg.param_bound is None
        assert cfg.to_dict()["param_bound"] == "unbounded"

    def test_from_dict_unknown_key(self):
        with pytest.raises(ConfigError):
            NetworkConfig.from_dict({"input_dim": 2, "output_dim": 1, "layers": 3})


class TestForward:
    def test_output_shape(self, rng):
        params = init_params(NetworkConfig(3, 2, depth=2, width=5, seed=1))
        assert forward(params, rng.uniform(size=(7, 3))).shape == (7, 2)

    def test_wrong_input_width(self):
        params = init_params(NetworkConfig(3, 2))
        with pytest.raises(DimensionMismatch):
            forward(params, np.zeros((4, 2)))

    def test_init_is_seeded(self):
        a = init_params(NetworkConfig(3, 2, seed=9))
        b = init_params(NetworkConfig(3, 2, seed=9))
        np.testing.assert_array_equal(_flatten(a), _flatten(b))

    def test_seeds_differ(self):
        a = init_params(NetworkConfig(3, 2, seed=1))
        b = init_params(NetworkConfig(3, 2, seed=2))
        assert np.any(_flatten(a) != _flatten(b))

    def test_weight_shapes(self):
        params = init_params(NetworkConfig(3, 2, depth=2, width=5))
        assert [A.shape for A in params.weights] == [(5, 3), (5, 5), (2, 5)]
        assert all(np.all(b == 0) for b in params.biases)

    def test_zero_network_outputs_zero(self, rng):
        params = init_params(NetworkConfig(3, 2, depth=2, width=4))
        zero = NetworkParams(params.config, tuple(np.zeros_like(A) for A in params.weights),
                             tuple(np.zeros_like(b) for b in params.biases))
        np.testing.assert_array_equal(forward(zero, rng.standard_normal((6, 3))), np.zeros((6, 2)))

    def test_relu_kills_negative_input(self):
        params = NetworkParams(NetworkConfig(1, 1, depth=1, width=1),
                               (np.array([[1.0]]), np.array([[1.0]])), (np.zeros(1), np.zeros(1)))
        assert forward(params, np.array([[-2.0]]))[0, 0] == 0.0

    @pytest.mark.parametrize("c", [0.5, 3.0])
    def test_positively_homogeneous(self, rng, c):
        params = init_params(NetworkConfig(3, 2, depth=1, width=6, seed=3))
        params = NetworkParams(params.config, params.weights, (rng.standard_normal(6), rng.standard_normal(2)))
        scaled = NetworkParams(params.config, (c * params.weights[0], params.weights[1]),
                               (c * params.biases[0], params.biases[1]))
        Z = rng.standard_normal((8, 3))
        b_out = params.biases[1]
        np.testing.assert_allclose(forward(scaled, Z) - b_out, c * (forward(params, Z) - b_out), atol=1e-12)

    def test_hand_evaluated_relu_net(self):
        params = NetworkParams(
            NetworkConfig(1, 1, depth=1, width=2),
            (np.array([[1.0], [-1.0]]), np.array([[1.0, 1.0]])),
            (np.zeros(2), np.array([0.5])),
        )
        assert forward(params, np.array([[2.0]]))[0, 0] == pytest.approx(2.5)

    def test_affine_network(self, rng):
        params = init_params(NetworkConfig(2, 2, depth=0, seed=4))
        Z = rng.uniform(size=(5, 2))
        np.testing.assert_allclose(forward(params, Z), Z @ params.weights[0].T + params.biases[0])


class TestGradients:
    @pytest.mark.parametrize("trial", range(20))
    def test_matches_central_differences(self, trial):
        rng = np.random.default_rng(100 + trial)
        q, p = int(rng.integers(1, 7)), int(rng.integers(1, 5))
        depth, width = int(rng.integers(0, 4)), int(rng.integers(1, 9))
        params = init_params(NetworkConfig(q, p, depth=depth, width=width, seed=trial))
        batches = _batches(rng, q, p, [5, 8])

        grads = loss_and_gradients(params, batches)
        analytic = np.concatenate([g.ravel() for g in grads.weights] + [g.ravel() for g in grads.biases])

        theta = _flatten(params)
        numeric = np.zeros_like(theta)
        h = 1e-6
        for i in range(theta.size):
            up, down = theta.copy(), theta.copy()
            up[i] += h
            down[i] -= h
            numeric[i] = (loss_and_gradients(_unflatten(params, up), batches).loss_value
                          - loss_and_gradients(_unflatten(params, down), batches).loss_value) / (2 * h)

        scale = np.maximum(np.abs(numeric), 1e-3)
        assert np.max(np.abs(analytic - numeric) / scale) <= 1e-5

    def test_loss_value(self, rng):
        params = init_params(NetworkConfig(2, 1, depth=1, width=3))
        Z = rng.uniform(size=(4, 2))
        t = rng.standard_normal(4)
        gamma = np.array([2.0])
        expected = np.mean((t - forward(params, Z) @ gamma) ** 2)
        assert loss_and_gradients(params, [(Z, t, gamma)]).loss_value == pytest.approx(expected)

    def test_perfect_fit_has_zero_gradient(self, rng):
        params = init_params(NetworkConfig(2, 2, depth=1, width=4, seed=6))
        Z = rng.uniform(size=(5, 2))
        gamma = np.array([1.0, -0.5])
        grads = loss_and_gradients(params, [(Z, forward(params, Z) @ gamma, gamma)])
        assert grads.loss_value == pytest.approx(0.0, abs=1e-28)
        assert all(np.allclose(g, 0.0, atol=1e-14) for g in grads.weights + grads.biases)

    def test_affine_closed_form(self):
        params = NetworkParams(NetworkConfig(2, 2, depth=0),
                               (np.array([[0.5, -1.0], [2.0, 0.25]]),), (np.array([0.1, -0.2]),))
        z = np.array([0.3, -0.7])
        gamma = np.array([1.5, -2.0])
        t = 0.8
        y_hat = gamma @ (params.weights[0] @ z + params.biases[0])
        grads = loss_and_gradients(params, [(z[None, :], np.array([t]), gamma)])
        np.testing.assert_allclose(grads.weights[0], -2 * (t - y_hat) * np.outer(gamma, z), atol=1e-12)
        np.testing.assert_allclose(grads.biases[0], -2 * (t - y_hat) * gamma, atol=1e-12)

    def test_gamma_length_checked(self, rng):
        params = init_params(NetworkConfig(2, 2))
        with pytest.raises(DimensionMismatch):
            loss_and_gradients(params, [(rng.uniform(size=(3, 2)), np.zeros(3), np.zeros(3))])


class TestSgdStep:
    def test_descends(self, rng):
        params = init_params(NetworkConfig(2, 2, depth=1, width=6, seed=2))
        batches = _batches(rng, 2, 2, [30])
        before = loss_and_gradients(params, batches)
        after = loss_and_gradients(sgd_step(params, before, 1e-3), batches)
        assert after.loss_value < before.loss_value

    def test_one_step_arithmetic(self):
        params = NetworkParams(NetworkConfig(1, 1, depth=0), (np.array([[1.0]]),), (np.zeros(1),))
        grads = GradientBundle((np.array([[2.0]]),), (np.zeros(1),))
        assert sgd_step(params, grads, 0.1).weights[0][0, 0] == pytest.approx(0.8)

    def test_zero_gradient_is_a_no_op(self):
        params = init_params(NetworkConfig(3, 2, depth=1, width=4, seed=7))
        grads = GradientBundle(tuple(np.zeros_like(A) for A in params.weights),
                               tuple(np.zeros_like(b) for b in params.biases))
        np.testing.assert_array_equal(_flatten(sgd_step(params, grads, 0.5)), _flatten(params))

    def test_zero_learning_rate_is_a_no_op(self, rng):
        params = init_params(NetworkConfig(3, 2, depth=1, width=4, seed=7))
        grads = loss_and_gradients(params, _batches(rng, 3, 2, [10]))
        np.testing.assert_array_equal(_flatten(sgd_step(params, grads, 0.0)), _flatten(params))

    def test_affine_step_descends(self, rng):
        params = init_params(NetworkConfig(3, 1, depth=0, seed=5))
        batches = _batches(rng, 3, 1, [20])
        before = loss_and_gradients(params, batches)
        after = loss_and_gradients(sgd_step(params, before, 1e-2), batches)
        assert after.loss_value < before.loss_value

    def test_clamp(self):
        params = init_params(NetworkConfig(2, 1, depth=0))
        grads = GradientBundle(tuple(np.full_like(A, -100.0) for A in params.weights),
                               tuple(np.full_like(b, -100.0) for b in params.biases))
        stepped = sgd_step(params, grads, 1.0, clamp=0.5)
        assert np.all(np.abs(_flatten(stepped)) <= 0.5)


def test_output_transform_identity_of_gamma_r(rng):
    params = init_params(NetworkConfig(3, 2, depth=1, width=5, seed=8))
    Lam = np.array([[2.0, 1.0], [0.5, 1.5]])
    Z = rng.uniform(size=(10, 3))
    gamma = rng.standard_normal(2)
    transformed = with_output_transform(params, np.linalg.inv(Lam))
    np.testing.assert_allclose(forward(params, Z) @ gamma, forward(transformed, Z) @ (Lam.T @ gamma), atol=1e-10)


def test_save_and_load(tmp_path):
    params = init_params(NetworkConfig(3, 2, depth=1, width=4, seed=5))
    path = tmp_path / "rep.json"
    params.save(path)
    loaded = NetworkParams.load(path)
    assert loaded.config == params.config
    np.testing.assert_array_equal(_flatten(loaded), _flatten(params))
