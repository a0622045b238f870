# -*- coding: utf-8 -*-
"""神经网络与策略头的梯度检查"""

import math

import numpy as np
import pytest

from src.core.errors import ContractViolation, DomainError
from src.core.learning.mappo import HMappoModel
from src.core.learning.neural import (
    MIN_STD, Adam, BernoulliPolicy, GaussianPolicy, Mlp, ValueNet, clip_grad_norm,
)
from src.data.models import TrainConfig

H = 1e-5
RTOL = 1e-4
ATOL = 1e-7


SEEDS = range(20)


def numeric_grad(loss_fn, params, h=H):
    """中心差分逐元素估计梯度"""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=['multi_index'])
        for _ in it:
            g[it.multi_index] = central_difference(loss_fn, p, it.multi_index, h)
        grads.append(g)
    return grads


def central_difference(loss_fn, p, idx, h=H):
    old = p[idx]
    p[idx] = old + h
    up = loss_fn()
    p[idx] = old - h
    down = loss_fn()
    p[idx] = old
    return (up - down) / (2 * h)


def assert_grads_close(analytic, numeric):
    assert len(analytic) == len(numeric)
    for a, n in zip(analytic, numeric):
        np.testing.assert_allclose(a, n, rtol=RTOL, atol=ATOL)


def assert_sampled_grads_close(analytic, loss_fn, params, rng, per_array=8):
    """大网络只抽查每个参数数组中的若干元素"""
    for a, p in zip(analytic, params):
        flat = rng.choice(p.size, size=min(per_array, p.size), replace=False)
        for k in flat:
            idx = np.unravel_index(k, p.shape)
            np.testing.assert_allclose(a[idx], central_difference(loss_fn, p, idx),
                                       rtol=RTOL, atol=ATOL)


def training_critic_dim(n=5, obs_dim=15):
    """训练时 AUV 评价者的输入维度"""
    model = HMappoModel(n, 4 * n, obs_dim, [0.01, -5.0, -5.0, -5.0], [2.0, 5.0, 5.0, 5.0],
                        TrainConfig(), np.random.default_rng(0))
    return model.critic_dim


class TestMlp:
    def test_zero_network_outputs_zero(self, rng):
        net = Mlp([3, 4, 2], rng)
        for p in net.params:
            p[...] = 0.0
        assert np.array_equal(net(rng.normal(size=(5, 3))), np.zeros((5, 2)))

    def test_linear_identity(self, rng):
        net = Mlp([3, 3], rng)
        net.params[0][...] = np.eye(3)
        net.params[1][...] = 0.0
        x = rng.normal(size=(4, 3))
        assert np.array_equal(net(x), x)

    def test_rejects_wrong_input_width(self, rng):
        with pytest.raises(DomainError):
            Mlp([3, 2], rng)(np.zeros((1, 4)))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_backward_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        net = Mlp([4, 6, 5, 3], rng)
        x = rng.normal(size=(7, 4))
        weight = rng.normal(size=(7, 3))

        def loss():
            return float(np.sum(net(x) * weight))

        _, cache = net.forward(x)
        grads, grad_in = net.backward(cache, weight, return_input=True)
        assert_grads_close(grads, numeric_grad(loss, net.params))
        assert_grads_close([grad_in], numeric_grad(loss, [x]))

    @pytest.mark.parametrize("seed", SEEDS)
    @pytest.mark.parametrize("in_dim,out_dim", [(12, 4), (15, 4), ("critic", 1)])
    def test_backward_on_training_shapes(self, seed, in_dim, out_dim):
        if in_dim == "critic":
            in_dim = training_critic_dim()
        rng = np.random.default_rng(seed)
        net = Mlp([in_dim, *TrainConfig().hidden, out_dim], rng)
        x = rng.normal(size=(5, in_dim))
        weight = rng.normal(size=(5, out_dim))

        def loss():
            return float(np.sum(net(x) * weight))

        _, cache = net.forward(x)
        grads, grad_in = net.backward(cache, weight, return_input=True)
        assert_sampled_grads_close(grads, loss, net.params, rng)
        assert_sampled_grads_close([grad_in], loss, [x], rng)

    def test_zero_upstream_gradient(self, rng):
        net = Mlp([3, 4, 2], rng)
        _, cache = net.forward(rng.normal(size=(2, 3)))
        grads = net.backward(cache, np.zeros((2, 2)))
        assert all(not np.any(g) for g in grads)

    def test_backward_rejects_foreign_cache(self, rng):
        a = Mlp([3, 4, 2], rng)
        b = Mlp([5, 4, 2], rng)
        _, cache = b.forward(np.zeros((1, 5)))
        with pytest.raises(ContractViolation):
            a.backward(cache, np.zeros((1, 2)))

    def test_state_dict_round_trip(self, rng):
        a = Mlp([3, 4, 2], rng)
        b = Mlp([3, 4, 2], rng)
        b.load_state_dict(a.state_dict("net"), "net")
        x = rng.normal(size=(3, 3))
        assert np.array_equal(a(x), b(x))


class TestAdam:
    def test_zero_gradient_leaves_params(self, rng):
        params = [rng.normal(size=(3, 2)), rng.normal(size=2)]
        before = [p.copy() for p in params]
        Adam(params, lr=0.1).step(params, [np.zeros((3, 2)), np.zeros(2)])
        for p, q in zip(params, before):
            assert np.array_equal(p, q)

    def test_first_step_moves_by_lr(self):
        params = [np.array([1.0, -1.0, 0.5])]
        Adam(params, lr=0.01).step(params, [np.array([3.0, -0.2, 1e-3])])
        assert params[0] == pytest.approx([0.99, -0.99, 0.49], abs=1e-6)

    @pytest.mark.parametrize("scale", [0.1, 10.0, 1000.0])
    def test_update_is_invariant_to_gradient_scale(self, rng, scale):
        start = [rng.normal(size=(4, 3)), rng.normal(size=3)]
        grad_seq = [[rng.choice([-1.0, 1.0], size=p.shape) * rng.uniform(0.1, 1.0, size=p.shape)
                     for p in start] for _ in range(5)]
        base = [p.copy() for p in start]
        scaled = [p.copy() for p in start]
        opt_base = Adam(base, lr=0.01)
        opt_scaled = Adam(scaled, lr=0.01)
        for grads in grad_seq:
            opt_base.step(base, grads)
            opt_scaled.step(scaled, [scale * g for g in grads])
        for b, s, p in zip(base, scaled, start):
            np.testing.assert_allclose(s - p, b - p, rtol=1e-5, atol=1e-7)

    def test_shape_mismatch(self):
        params = [np.zeros(3)]
        with pytest.raises(DomainError):
            Adam(params, lr=0.01).step(params, [np.zeros(4)])


def test_clip_grad_norm():
    grads = [np.array([3.0, 0.0]), np.array([4.0])]
    norm = clip_grad_norm(grads, 1.0)
    assert norm == pytest.approx(5.0)
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    assert total == pytest.approx(1.0, rel=1e-9)


class TestGaussianPolicy:
    LOW = [0.01, -5.0, -5.0, -5.0]
    HIGH = [2.0, 5.0, 5.0, 5.0]

    def make(self, rng, **kwargs):
        return GaussianPolicy(6, self.LOW, self.HIGH, (8, 8), rng, **kwargs)

    def test_actions_within_bounds(self, rng):
        pi = self.make(rng)
        _, action, logp = pi.sample(rng.normal(size=(200, 6)), rng)
        assert np.all(action >= np.array(self.LOW)) and np.all(action <= np.array(self.HIGH))
        assert np.all(np.isfinite(logp))

    def test_log_prob_round_trip(self, rng):
        pi = self.make(rng)
        obs = rng.normal(size=(20, 6))
        u, action, logp = pi.sample(obs, rng)
        assert pi.log_prob(obs, u) == pytest.approx(logp, rel=1e-12)
        assert np.array_equal(pi.squash(u), action)

    def test_log_prob_includes_squash_jacobian(self, rng):
        pi = self.make(rng)
        obs = np.zeros((1, 6))
        u = np.zeros((1, 4))
        mean = pi.net(obs)
        std = np.exp(pi.log_std)
        gauss = np.sum(-0.5 * ((u - mean) / std) ** 2 - np.log(std) - 0.5 * math.log(2 * math.pi))
        jac = np.sum(np.log(pi.half))
        assert pi.log_prob(obs, u)[0] == pytest.approx(gauss - jac, rel=1e-12)

    def test_sample_statistics(self, rng):
        pi = self.make(rng, init_std=0.5)
        obs = np.tile(rng.normal(size=(1, 6)), (20000, 1))
        u, _, _ = pi.sample(obs, rng)
        mean = pi.net(obs[:1])[0]
        assert u.mean(axis=0) == pytest.approx(mean, abs=0.02)
        assert u.std(axis=0) == pytest.approx(np.full(4, 0.5), abs=0.02)

    def test_deterministic_uses_mean(self, rng):
        pi = self.make(rng)
        obs = rng.normal(size=(3, 6))
        u, action, _ = pi.sample(obs, rng, deterministic=True)
        assert np.array_equal(u, pi.net(obs))
        assert np.array_equal(action, pi.squash(u))

    def test_std_floor_keeps_values_finite(self, rng):
        pi = self.make(rng)
        pi.log_std[...] = -50.0
        obs = rng.normal(size=(4, 6))
        u, _, logp = pi.sample(obs, rng)
        assert np.all(np.isfinite(logp))
        assert pi.entropy() == pytest.approx(4 * (math.log(MIN_STD) + 0.5 * (math.log(2 * math.pi) + 1)))
        _, _, state = pi.evaluate(obs, u)
        grads = pi.backward(state, np.ones(4), 0.3)
        assert not np.any(grads[-1])

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        pi = self.make(rng)
        obs = rng.normal(size=(5, 6))
        u, _, _ = pi.sample(obs, rng)
        coef = rng.normal(size=5)
        c_ent = 0.7

        def loss():
            return float(np.sum(coef * pi.log_prob(obs, u)) + c_ent * pi.entropy())

        _, _, state = pi.evaluate(obs, u)
        grads = pi.backward(state, coef, c_ent)
        assert_grads_close(grads, numeric_grad(loss, pi.params))

    @pytest.mark.parametrize("seed", SEEDS)
    @pytest.mark.parametrize("obs_dim", [12, 15])
    def test_gradients_on_training_shapes(self, seed, obs_dim):
        rng = np.random.default_rng(seed)
        pi = GaussianPolicy(obs_dim, self.LOW, self.HIGH, TrainConfig().hidden, rng)
        obs = rng.normal(size=(5, obs_dim))
        u, _, _ = pi.sample(obs, rng)
        coef = rng.normal(size=5)
        c_ent = 0.01

        def loss():
            return float(np.sum(coef * pi.log_prob(obs, u)) + c_ent * pi.entropy())

        _, _, state = pi.evaluate(obs, u)
        grads = pi.backward(state, coef, c_ent)
        assert_sampled_grads_close(grads, loss, pi.params, rng)

    def test_rejects_empty_action_range(self, rng):
        with pytest.raises(DomainError):
            GaussianPolicy(3, [1.0], [1.0], (4,), rng)


class TestBernoulliPolicy:
    def make(self, rng, n=3, require_any=True):
        return BernoulliPolicy(5, n, (8,), rng, require_any=require_any)

    @staticmethod
    def set_logits(pi, bias):
        pi.net.params[-2][...] = 0.0
        pi.net.params[-1][...] = np.asarray(bias, dtype=np.float64)

    def test_zero_logits_log_prob(self, rng):
        pi = self.make(rng)
        self.set_logits(pi, [0.0, 0.0, 0.0])
        bits = np.array([[1, 0, 1], [0, 1, 0]])
        assert pi.log_prob(np.zeros((2, 5)), bits) == pytest.approx([3 * math.log(0.5)] * 2)

    def test_saturated_logits(self, rng):
        pi = self.make(rng)
        self.set_logits(pi, [50.0, 50.0, 50.0])
        bits, logp = pi.sample(np.zeros((10, 5)), rng)
        assert np.all(bits == 1)
        assert np.all(np.abs(logp) < 1e-12)

    def test_sample_frequencies(self, rng):
        pi = self.make(rng, require_any=False)
        self.set_logits(pi, [2.0, -2.0, 0.0])
        bits, _ = pi.sample(np.zeros((20000, 5)), rng)
        expected = 1.0 / (1.0 + np.exp(-np.array([2.0, -2.0, 0.0])))
        assert bits.mean(axis=0) == pytest.approx(expected, abs=0.02)

    def test_require_any_forces_most_likely_bit(self, rng):
        pi = self.make(rng)
        self.set_logits(pi, [-50.0, -40.0, -50.0])
        bits, logp = pi.sample(np.zeros((4, 5)), rng)
        assert bits.tolist() == [[0, 1, 0]] * 4
        assert logp == pytest.approx(pi.log_prob(np.zeros((4, 5)), bits))
        det, _ = pi.sample(np.zeros((1, 5)), rng, deterministic=True)
        assert det.tolist() == [[0, 1, 0]]

    def test_all_zero_allowed_without_requirement(self, rng):
        pi = self.make(rng, require_any=False)
        self.set_logits(pi, [-50.0, -50.0, -50.0])
        bits, _ = pi.sample(np.zeros((3, 5)), rng)
        assert not bits.any()

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        pi = self.make(rng)
        obs = rng.normal(size=(6, 5))
        bits = (rng.random((6, 3)) < 0.5).astype(np.int64)
        coef = rng.normal(size=6)
        c_ent = -0.4

        def loss():
            logp, ent, _ = pi.evaluate(obs, bits)
            return float(np.sum(coef * logp) + c_ent * ent)

        _, _, state = pi.evaluate(obs, bits)
        grads = pi.backward(state, coef, c_ent)
        assert_grads_close(grads, numeric_grad(loss, pi.params))

    @pytest.mark.parametrize("seed", SEEDS)
    def test_gradients_on_training_shapes(self, seed):
        rng = np.random.default_rng(seed)
        n = 5
        pi = BernoulliPolicy(4 * n, n, TrainConfig().hidden, rng)
        obs = rng.normal(size=(6, 4 * n))
        bits = (rng.random((6, n)) < 0.5).astype(np.int64)
        coef = rng.normal(size=6)
        c_ent = 0.01

        def loss():
            logp, ent, _ = pi.evaluate(obs, bits)
            return float(np.sum(coef * logp) + c_ent * ent)

        _, _, state = pi.evaluate(obs, bits)
        grads = pi.backward(state, coef, c_ent)
        assert_sampled_grads_close(grads, loss, pi.params, rng)


@pytest.mark.parametrize("seed", SEEDS)
def test_value_net_gradients(seed):
    rng = np.random.default_rng(seed)
    v = ValueNet(4, (6,), rng)
    obs = rng.normal(size=(8, 4))
    returns = rng.normal(size=8)

    def loss():
        return v.loss_and_grads(obs, returns)[0]

    value, grads = v.loss_and_grads(obs, returns)
    assert value == pytest.approx(0.5 * np.mean((v(obs) - returns) ** 2))
    assert v(obs).shape == (8,)
    assert_grads_close(grads, numeric_grad(loss, v.params))


@pytest.mark.parametrize("seed", SEEDS)
def test_value_net_gradients_on_critic_input(seed):
    rng = np.random.default_rng(seed)
    dim = training_critic_dim()
    v = ValueNet(dim, TrainConfig().hidden, rng)
    obs = rng.normal(size=(8, dim))
    returns = rng.normal(size=8)

    def loss():
        return v.loss_and_grads(obs, returns)[0]

    _, grads = v.loss_and_grads(obs, returns)
    assert_sampled_grads_close(grads, loss, v.params, rng)
