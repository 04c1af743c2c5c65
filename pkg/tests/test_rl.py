import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from optbench import nn
from optbench.bench.architectures import cartpole_net
from optbench.errors import ContractError
from optbench.losses import LossKind, mse_loss
from optbench.optimizers import Sgd, batch_loss, batch_loss_grad
from optbench.rl import (
    CartPoleEnv,
    DqnConfig,
    FlappyEnv,
    ReplayBuffer,
    Transition,
    dqn_train_episode,
    linear_epsilon,
    q_target,
    q_targets,
    select_action,
    training_batch,
    write_pgm,
)


def cartpole_oracle(state, action, steps):
    """Same dynamics written as a 2x2 linear solve for the accelerations."""
    g, mc, mp, l, f, tau = 9.8, 1.0, 0.1, 0.5, 10.0, 0.02
    out = []
    x, xd, th, thd = state
    for a in [action] * steps if np.isscalar(action) else action:
        force = f if a == 1 else -f
        c, s = math.cos(th), math.sin(th)
        # (mc+mp) xdd + mp l c thdd = F + mp l thd^2 s
        # c xdd + (4/3) l thdd = g s
        m = np.array([[mc + mp, mp * l * c], [c, 4.0 / 3.0 * l]])
        rhs = np.array([force + mp * l * thd**2 * s, g * s])
        xdd, thdd = np.linalg.solve(m, rhs)
        x, xd, th, thd = x + tau * xd, xd + tau * xdd, th + tau * thd, thd + tau * thdd
        out.append(np.array([x, xd, th, thd]))
    return out


def test_cartpole_reset_range():
    env = CartPoleEnv()
    for seed in range(50):
        s = env.reset(seed)
        assert s.shape == (4,) and np.all(np.abs(s) < 0.05)


def test_cartpole_push_right_signs():
    env = CartPoleEnv()
    env.reset(0)
    env.state = np.zeros(4)
    s, r, done = env.step(1)
    assert s[1] > 0 and s[3] < 0 and r == 1.0 and not done


def test_cartpole_matches_oracle():
    env = CartPoleEnv()
    start = env.reset(3)
    actions = [1, 0, 0, 1, 1, 1, 0, 1, 0, 0]
    expected = cartpole_oracle(start, actions, 10)
    for a, want in zip(actions, expected):
        got, _, _ = env.step(a)
        np.testing.assert_allclose(got, want, atol=1e-12, rtol=0)


def test_cartpole_terminates_and_forbids_step_after_done():
    env = CartPoleEnv()
    env.reset(0)
    done, n = False, 0
    while not done:
        _, _, done = env.step(1)
        n += 1
    assert n < 500
    with pytest.raises(ContractError):
        env.step(0)


def test_flappy_falls_to_floor():
    env = FlappyEnv()
    env.reset(1)
    alt = [env.altitude]
    done = False
    while not done:
        _, r, done = env.step(0)
        alt.append(env.altitude)
    assert all(b < a for a, b in zip(alt, alt[1:]))
    assert r == -1.0
    with pytest.raises(ContractError):
        env.step(0)


def test_flappy_frame_and_sprite_size():
    env = FlappyEnv()
    frame = env.reset(2)
    assert frame.shape == (1, 84, 84) and set(np.unique(frame)) <= {0.0, 1.0}
    counts = []
    for a in [1, 0, 0, 1, 0, 0, 0]:
        env.step(a)
        top, bottom = env._bird_rows()
        counts.append(env.render()[0, top:bottom, env.bird_x:env.bird_x + env.bird_w].sum())
    assert set(counts) == {env.bird_w * env.bird_h}


def test_flappy_deterministic():
    def play(seed):
        env = FlappyEnv()
        frames = [env.reset(seed)]
        rng = np.random.default_rng(0)
        done = False
        while not done:
            f, _, done = env.step(int(rng.integers(2)))
            frames.append(f)
        return np.stack(frames)

    assert np.array_equal(play(5), play(5))


def test_flappy_random_policy_survival():
    env = FlappyEnv()
    rng = np.random.default_rng(0)
    lengths = []
    for seed in range(50):
        env.reset(seed)
        done, n = False, 0
        while not done:
            _, _, done = env.step(int(rng.integers(2)))
            n += 1
        lengths.append(n)
    assert 10 <= np.mean(lengths) <= 40


def test_flappy_can_pass_pipes():
    # a bang-bang controller steering toward the next gap earns pipe rewards
    env = FlappyEnv()
    env.reset(4)
    total, done = 0.0, False
    while not done and env.steps < 300:
        nxt = min((p for p in env.pipes if p[0] + env.pipe_w > env.bird_x), key=lambda p: p[0])
        target = nxt[1] + 3
        action = 1 if env.y + env.bird_h / 2 > target and env.velocity >= 0 else 0
        _, r, done = env.step(action)
        total += r
    assert total > 3.0


def test_write_pgm(tmp_path):
    frame = np.zeros((1, 3, 2))
    frame[0, 1, 1] = 1.0
    write_pgm(tmp_path / "f.pgm", frame)
    raw = (tmp_path / "f.pgm").read_bytes()
    assert raw == b"P5\n2 3\n255\n" + bytes([0, 0, 0, 255, 0, 0])


def test_q_target_examples():
    assert q_target(-1.0, True, np.array([5.0, 9.0]), 0.99) == -1.0
    assert q_target(1.0, False, np.array([0.5, 2.0]), 0.99) == pytest.approx(2.98, abs=1e-15)
    assert q_target(0.7, False, np.array([100.0, -3.0]), 0.0) == 0.7
    with pytest.raises(ValueError):
        q_target(0.0, False, np.zeros(2), 1.5)


@settings(max_examples=50, deadline=None)
@given(r=st.floats(-1e6, 1e6), q=st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=5), gamma=st.floats(0, 1))
def test_terminal_target_is_reward(r, q, gamma):
    assert q_target(r, True, np.array(q), gamma) == r
    np.testing.assert_array_equal(q_targets(np.array([r]), np.array([True]), np.array([q]), gamma), [r])


def test_vectorised_targets_match_scalar(rng):
    r = rng.normal(size=6)
    done = np.array([True, False, False, True, False, False])
    q = rng.normal(size=(6, 2))
    vec = q_targets(r, done, q, 0.9)
    for i in range(6):
        assert vec[i] == q_target(r[i], done[i], q[i], 0.9)


def sample_batch(rng, n=8):
    s = rng.normal(size=(n, 4))
    a = rng.integers(0, 2, size=n)
    r = rng.normal(size=n)
    s2 = rng.normal(size=(n, 4))
    done = rng.random(n) < 0.3
    return s, a, r, s2, done


def test_only_chosen_action_gets_gradient(rng):
    model = nn.init_params(cartpole_net(), 0)
    sample = sample_batch(rng)
    batch = training_batch(model, sample, 0.99)
    out, _ = nn.forward(model, batch.inputs)
    _, dout = mse_loss(out, batch.targets)
    a = sample[1]
    mask = np.zeros_like(dout, dtype=bool)
    mask[np.arange(len(a)), a] = True
    assert np.all(dout[~mask] == 0.0)
    assert np.all(dout[mask] != 0.0)


def test_dqn_loss_gradient_finite_differences(rng):
    model = nn.init_params(cartpole_net(), 1)
    batch = training_batch(model, sample_batch(rng), 0.9)  # targets frozen for this batch
    _, grad = batch_loss_grad(model, batch, LossKind.MSE)
    eps = 1e-6
    for j in rng.choice(model.n_params, 25, replace=False):
        up, down = model.get_params(), model.get_params()
        up[j] += eps
        down[j] -= eps
        num = (batch_loss(model.with_params(up), batch, LossKind.MSE) - batch_loss(model.with_params(down), batch, LossKind.MSE)) / (2 * eps)
        assert abs(num - grad[j]) <= 1e-5 * max(1.0, abs(num))


def test_epsilon_one_is_uniform():
    rng = np.random.default_rng(7)
    q = np.array([10.0, -10.0])
    counts = np.bincount([select_action(q, 1.0, rng) for _ in range(1000)], minlength=2)
    assert stats.chisquare(counts).pvalue > 0.01


def test_epsilon_zero_is_greedy_and_stream_independent():
    a, b = np.random.default_rng(1), np.random.default_rng(1)
    q = np.array([0.1, 0.3])
    assert [select_action(q, 0.0, a) for _ in range(20)] == [1] * 20
    for _ in range(20):
        select_action(q, 0.7, b)
    assert a.random() == b.random()


def test_linear_epsilon_schedule():
    assert linear_epsilon(0, 200) == 1.0
    assert linear_epsilon(50, 200) == pytest.approx(0.525)
    assert linear_epsilon(100, 200) == pytest.approx(0.05)
    assert linear_epsilon(199, 200) == pytest.approx(0.05)


def test_replay_capacity_and_eviction():
    buf = ReplayBuffer(3, seed=0)
    for k in range(5):
        buf.push(Transition(np.full(2, k), k % 2, float(k), np.full(2, k + 1), False))
    assert len(buf) == 3
    assert [buf[i].r for i in range(3)] == [2.0, 3.0, 4.0]
    s, a, r, s2, done = buf.sample(10)
    assert s.shape == (10, 2) and set(r) <= {2.0, 3.0, 4.0}
    with pytest.raises(IndexError):
        buf[3]


def test_replay_sampling_is_seeded():
    def fill(seed):
        buf = ReplayBuffer(10, seed=seed)
        for k in range(10):
            buf.push(Transition(np.array([k]), 0, float(k), np.array([k]), False))
        return buf.sample(6)[2]

    assert np.array_equal(fill(3), fill(3))
    with pytest.raises(ValueError):
        ReplayBuffer(5, seed=0).sample(1)


def test_training_run_is_reproducible():
    def run():
        model = nn.init_params(cartpole_net(), 0)
        buf = ReplayBuffer(500, seed=1)
        rng = np.random.default_rng(2)
        cfg = DqnConfig(0.99, 0.5, 8, 1e-3, 8)
        returns, losses = [], []
        state = None
        for ep in range(4):
            model, state, m = dqn_train_episode(CartPoleEnv(), model, Sgd(), state, buf, cfg, rng, ep)
            returns.append(m.episode_return)
            losses.extend(m.losses_after)
            assert not m.failed
        return model.params, returns, losses

    p1, r1, l1 = run()
    p2, r2, l2 = run()
    assert np.array_equal(p1, p2) and r1 == r2 and l1 == l2 and len(l1) > 0
