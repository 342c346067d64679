import math

import numpy as np
import pytest

from navrl import neural as nn
from navrl.worldsim import InvalidSpec, V_MAX, V_MIN, W_MAX, W_MIN


def fd_param_grad(f, params, coords, h=1e-6):
    """Central differences of scalar f() under in-place param perturbation."""
    out = {}
    for c in coords:
        keep = params[c]
        params[c] = keep + h
        hi = f()
        params[c] = keep - h
        lo = f()
        params[c] = keep
        out[c] = (hi - lo) / (2 * h)
    return out


def rel_err(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-8)


class TestActorForward:
    def test_zero_params_drive_straight(self):
        net = nn.ActorNet(10, (16, 16, 16))
        a = net.forward(np.zeros(10))
        assert a[0] == pytest.approx((V_MIN + V_MAX) / 2) and a[1] == 0.0
        v, w = net.act(np.ones(10))
        assert (v, w) == ((V_MIN + V_MAX) / 2, 0.0)

    def test_outputs_respect_bounds(self):
        net = nn.ActorNet.create(8, (16, 16, 16), seed=1)
        net.params[:] *= 100  # drive tanh into saturation
        obs = np.random.default_rng(0).normal(size=(50, 8))
        a = net.forward(obs)
        assert np.all(a[:, 0] >= V_MIN) and np.all(a[:, 0] <= V_MAX)
        assert np.all(a[:, 1] >= W_MIN) and np.all(a[:, 1] <= W_MAX)

    def test_batch_matches_single(self):
        net = nn.ActorNet.create(6, (16, 16, 16), seed=2)
        obs = np.random.default_rng(1).normal(size=(4, 6))
        batch = net.forward(obs)
        # matmul kernels differ by shape, so only near-equality holds
        for i in range(4):
            assert np.allclose(batch[i], net.forward(obs[i]),
                               rtol=1e-12, atol=1e-14)

    def test_width_bounds_enforced(self):
        with pytest.raises(InvalidSpec):
            nn.ActorNet(4, (8, 16, 16))
        with pytest.raises(InvalidSpec):
            nn.ActorNet(4, (16, 600, 16))
        with pytest.raises(InvalidSpec):
            nn.ActorNet(4, (16, 16))
        with pytest.raises(InvalidSpec):
            nn.CriticNet(4, 2, embed=(16, 15))


class TestGradients:
    def test_actor_param_grad_vs_fd(self):
        rng = np.random.default_rng(3)
        for trial in range(5):
            net = nn.ActorNet.create(7, (16, 16, 16), seed=trial)
            obs = rng.normal(size=(3, 7))
            weights = rng.normal(size=(3, 2))

            def loss():
                return float((net.forward(obs) * weights).sum())

            _, cache = net.forward(obs, cache=True)
            grad = net.backward(cache, weights)
            coords = rng.integers(0, net.n_params, size=25)
            for c, fd in fd_param_grad(loss, net.params, coords).items():
                assert rel_err(grad[c], fd) < 1e-5

    def test_critic_param_grad_vs_fd(self):
        rng = np.random.default_rng(4)
        for trial in range(5):
            net = nn.CriticNet.create(7, 2, seed=trial,
                                      embed=(16, 16), joint=(16, 16))
            obs = rng.normal(size=(3, 7))
            act = rng.normal(size=(3, 2))
            weights = rng.normal(size=3)

            def loss():
                return float((net.forward(obs, act) * weights).sum())

            _, cache = net.forward(obs, act, cache=True)
            grad, _ = net.backward(cache, weights)
            coords = rng.integers(0, net.n_params, size=25)
            for c, fd in fd_param_grad(loss, net.params, coords).items():
                assert rel_err(grad[c], fd) < 1e-5

    def test_critic_action_grad_vs_fd(self):
        rng = np.random.default_rng(5)
        net = nn.CriticNet.create(6, 2, seed=9, embed=(16, 16),
                                  joint=(16, 16))
        obs = rng.normal(size=6)
        act = rng.normal(size=2)
        _, cache = net.forward(obs, act, cache=True)
        _, d_act = net.backward(cache, 1.0)
        h = 1e-6
        for k in range(2):
            bump = act.copy()
            bump[k] += h
            hi = net.forward(obs, bump)
            bump[k] -= 2 * h
            lo = net.forward(obs, bump)
            assert rel_err(d_act[k], (hi - lo) / (2 * h)) < 1e-5

    def test_grad_batch_is_sum_of_singles(self):
        rng = np.random.default_rng(6)
        net = nn.ActorNet.create(5, (16, 16, 16), seed=0)
        obs = rng.normal(size=(3, 5))
        w = rng.normal(size=(3, 2))
        _, cache = net.forward(obs, cache=True)
        whole = net.backward(cache, w)
        parts = np.zeros_like(whole)
        for i in range(3):
            _, c1 = net.forward(obs[i], cache=True)
            parts += net.backward(c1, w[i])
        assert np.allclose(whole, parts, atol=1e-12)


class TestAdam:
    def test_first_step_is_lr_sized(self):
        # bias correction makes the first update lr * sign(grad)
        params = np.zeros(4)
        opt = nn.Adam(4, lr=0.01)
        opt.step(params, np.array([1.0, -2.0, 0.5, 0.0]))
        assert np.allclose(params[:3],
                           [-0.01, 0.01, -0.01], atol=1e-6)
        assert params[3] == 0.0

    def test_converges_on_quadratic(self):
        params = np.array([3.0, -2.0])
        opt = nn.Adam(2, lr=0.05)
        for _ in range(2000):
            opt.step(params, 2 * params)
        assert np.all(np.abs(params) < 1e-3)


class TestSoftUpdate:
    def test_polyak(self):
        t = np.ones(3)
        o = np.full(3, 2.0)
        nn.soft_update(t, o, 0.25)
        assert np.allclose(t, 1.25)
        nn.soft_update(t, o, 1.0)
        assert np.allclose(t, 2.0)


class TestSerialization:
    def test_actor_round_trip_bit_exact(self, tmp_path):
        net = nn.ActorNet.create(12, (16, 32, 16), seed=7)
        f = tmp_path / "actor.pol"
        nn.save_policy(net, f)
        back = nn.load_policy(f)
        assert isinstance(back, nn.ActorNet)
        assert back.hidden == (16, 32, 16) and back.obs_dim == 12
        assert back.v_bounds == net.v_bounds
        assert np.array_equal(back.params, net.params)
        obs = np.random.default_rng(0).normal(size=12)
        assert np.array_equal(back.forward(obs), net.forward(obs))

    def test_critic_round_trip(self, tmp_path):
        net = nn.CriticNet.create(9, 2, embed=(16, 24), joint=(32, 16),
                                  seed=8)
        f = tmp_path / "critic.pol"
        nn.save_policy(net, f)
        back = nn.load_policy(f)
        assert isinstance(back, nn.CriticNet)
        assert back.embed == (16, 24) and back.joint == (32, 16)
        assert np.array_equal(back.params, net.params)

    def test_corrupt_files_rejected(self, tmp_path):
        net = nn.ActorNet.create(4, (16, 16, 16))
        blob = nn.policy_to_bytes(net)
        with pytest.raises(nn.PolicyFormatError):
            nn.policy_from_bytes(b"WRONGMAG" + blob[8:])
        with pytest.raises(nn.PolicyFormatError):
            nn.policy_from_bytes(blob[:-4])
        with pytest.raises(nn.PolicyFormatError):
            nn.policy_from_bytes(blob + b"\x00")
        bad_version = blob[:8] + b"\x63" + blob[9:]
        with pytest.raises(nn.PolicyFormatError):
            nn.policy_from_bytes(bad_version)


class TestDeterminism:
    def test_create_deterministic(self):
        a = nn.ActorNet.create(5, (16, 16, 16), seed=3)
        b = nn.ActorNet.create(5, (16, 16, 16), seed=3)
        assert np.array_equal(a.params, b.params)

    def test_final_layer_small(self):
        net = nn.ActorNet.create(5, (64, 64, 64), seed=0)
        w, b = net._layer(3)
        assert np.abs(w).max() <= 3e-3 and np.all(b == 0.0)
