import numpy as np
import pytest

from nodelambda import cube, env
from nodelambda.cube import Move
from nodelambda.env import ConfigError, EnvConfig, RewardScheme

from conftest import check_trajectory


def random_policy(s, rng):
    return cube.MOVES[int(rng.integers(12))]


def test_config_validation():
    EnvConfig()
    for bad in (dict(scramble_depth_min=0, scramble_depth_max=0), dict(scramble_depth_min=5, scramble_depth_max=4),
                dict(max_steps=0)):
        with pytest.raises(ConfigError):
            EnvConfig(**bad)


def test_splitmix64_known_values():
    # first outputs of the reference splitmix64 generator seeded with 0
    assert env.splitmix64(0) == 0xE220A8397B1DCDAF
    assert env.splitmix64(0x9E3779B97F4A7C15) == 0x6E789E6AA1B965F4


def test_reset(table):
    cfg = EnvConfig(scramble_depth_min=1, scramble_depth_max=1)
    for i in range(30):
        assert table.distance(env.reset(cfg, np.random.default_rng(i))) == 1
    cfg = EnvConfig()
    a = env.reset(cfg, env.episode_rng(7, 3))
    b = env.reset(cfg, env.episode_rng(7, 3))
    assert a == b
    assert not cube.is_solved(a)


def test_step_rewards():
    s = cube.apply_move(cube.solved(), Move.R)
    t, trunc = env.step(s, Move.R_PRIME, 0, EnvConfig())
    assert t.reward == 1.0 and t.is_done and not trunc
    t, trunc = env.step(s, Move.U, 0, EnvConfig())
    assert t.reward == 0.0 and not t.is_done
    t, _ = env.step(s, Move.U, 0, EnvConfig(reward_scheme=RewardScheme.STEP_PENALTY))
    assert t.reward == -1.0
    t, _ = env.step(s, Move.R_PRIME, 0, EnvConfig(reward_scheme=RewardScheme.STEP_PENALTY))
    assert t.reward == 0.0 and t.is_done


def test_step_truncation():
    cfg = EnvConfig(max_steps=3)
    s = cube.apply_move(cube.solved(), Move.R)
    _, trunc = env.step(s, Move.U, 2, cfg)
    assert trunc
    t, trunc = env.step(s, Move.R_PRIME, 2, cfg)
    assert t.is_done and not trunc
    with pytest.raises(ValueError):
        env.step(s, Move.U, 3, cfg)


def test_backward_rollouts(rng):
    for k in range(1, 15):
        cfg = EnvConfig(scramble_depth_min=k, scramble_depth_max=k)
        traj = env.generate_rollout(random_policy, 1.0, cfg, rng)
        assert traj.backward and traj.solved
        assert 1 <= len(traj) <= k
        assert cube.is_solved(check_trajectory(traj))
        through_goal = any(cube.is_solved(t.s) for t in traj.transitions)
        assert not through_goal


def test_backward_depth_one_is_single_terminal(rng):
    cfg = EnvConfig(scramble_depth_min=1, scramble_depth_max=1)
    traj = env.backward_rollout(cfg, rng)
    assert len(traj) == 1
    assert traj.transitions[0].is_done and traj.transitions[0].reward == 1.0


def test_backward_cut_at_last_goal_visit():
    # the reversed path ends at the first goal state it meets, which is the
    # last scramble prefix that is solved up to orientation
    cfg = EnvConfig(scramble_depth_min=8, scramble_depth_max=8)
    for seed in range(200):
        traj = env.backward_rollout(cfg, np.random.default_rng(seed))
        rng = np.random.default_rng(seed)
        while True:
            rng.integers(8, 9)
            end, moves = cube.scramble(8, rng)
            if not cube.is_solved(end):
                break
        prefix = [cube.apply_moves(cube.solved(), moves[:j]) for j in range(8)]
        last = max(j for j in range(8) if cube.is_solved(prefix[j]))
        assert len(traj) == 8 - last
        assert traj.transitions[0].s == end


def test_forward_random_rarely_solves(table, rng):
    cfg = EnvConfig(scramble_depth_min=10, scramble_depth_max=10, max_steps=50)
    solved = 0
    for _ in range(400):
        traj = env.generate_rollout(random_policy, 0.0, cfg, rng)
        assert not traj.backward
        end = check_trajectory(traj)
        assert cube.is_solved(end) == traj.solved == (table.distance(end) == 0)
        if traj.solved:
            solved += 1
        else:
            assert len(traj) == 50 and traj.truncated
    assert solved / 400 < 0.05


def test_rollout_determinism():
    cfg = EnvConfig(seed=11)

    def run(i):
        rng = env.episode_rng(cfg.seed, i)
        return env.generate_rollout(random_policy, 0.5, cfg, rng)

    for i in range(20):
        a, b = run(i), run(i)
        assert a.transitions == b.transitions and a.backward == b.backward


def test_b_out_of_range(rng):
    with pytest.raises(ValueError):
        env.generate_rollout(random_policy, 1.5, EnvConfig(), rng)


def test_b_is_a_frequency():
    cfg = EnvConfig(scramble_depth_max=3)
    n = 2000
    back = sum(env.generate_rollout(random_policy, 0.3, cfg, env.episode_rng(0, i)).backward for i in range(n))
    assert abs(back / n - 0.3) < 0.04
