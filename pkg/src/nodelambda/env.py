"""Deterministic, reversible, goal-based cube environment and rollout generation."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from . import cube
from .cube import CubeState, Move

MASK64 = (1 << 64) - 1


class ConfigError(ValueError):
    """Invalid configuration value or key."""


class RewardScheme(str, Enum):
    SPARSE_GOAL = "SparseGoal"
    STEP_PENALTY = "StepPenalty"


@dataclass(frozen=True)
class EnvConfig:
    max_steps: int = 50
    scramble_depth_min: int = 1
    scramble_depth_max: int = 14
    reward_scheme: RewardScheme = RewardScheme.SPARSE_GOAL
    seed: int = 0

    def __post_init__(self):
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        if not 1 <= self.scramble_depth_min <= self.scramble_depth_max:
            raise ConfigError(
                f"need 1 <= scramble_depth_min <= scramble_depth_max, got "
                f"[{self.scramble_depth_min}, {self.scramble_depth_max}]"
            )
        object.__setattr__(self, "reward_scheme", RewardScheme(self.reward_scheme))


@dataclass(frozen=True)
class Transition:
    s: CubeState
    a: Move
    s_next: CubeState
    reward: float
    is_done: bool


@dataclass
class Trajectory:
    transitions: list[Transition] = field(default_factory=list)
    truncated: bool = False
    backward: bool = False

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def solved(self) -> bool:
        return bool(self.transitions) and self.transitions[-1].is_done


# policy(state, rng) -> move, exploration included
Policy = Callable[[CubeState, np.random.Generator], Move]


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def episode_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent stream for one episode: splitmix64(master xor index)."""
    return np.random.default_rng(splitmix64((master_seed ^ index) & MASK64))


def reward_for(solved_next: bool, scheme: RewardScheme) -> float:
    if scheme is RewardScheme.SPARSE_GOAL:
        return 1.0 if solved_next else 0.0
    return 0.0 if solved_next else -1.0


def _draw_depth(config: EnvConfig, rng: np.random.Generator) -> int:
    return int(rng.integers(config.scramble_depth_min, config.scramble_depth_max + 1))


def reset(config: EnvConfig, rng: np.random.Generator) -> CubeState:
    """Scrambled start state; never already solved."""
    while True:
        s, _ = cube.scramble(_draw_depth(config, rng), rng)
        if not cube.is_solved(s):
            return s


def step(s: CubeState, a: Move, steps_taken: int, config: EnvConfig) -> tuple[Transition, bool]:
    if steps_taken >= config.max_steps:
        raise ValueError(f"episode already used its {config.max_steps} steps")
    s_next = cube.apply_move(s, a)
    done = cube.is_solved(s_next)
    t = Transition(s, a, s_next, reward_for(done, config.reward_scheme), done)
    return t, (steps_taken + 1 == config.max_steps and not done)


def backward_rollout(config: EnvConfig, rng: np.random.Generator) -> Trajectory:
    """Scramble from solved and return the reversed (solving) path.

    Stops at the first solved state along the reversed path, so ``is_done`` is
    only ever set on the last transition.
    """
    while True:
        end, moves = cube.scramble(_draw_depth(config, rng), rng)
        if not cube.is_solved(end):
            break
    states = [cube.solved()]
    for m in moves:
        states.append(cube.apply_move(states[-1], m))
    traj = Trajectory(backward=True)
    for i in range(len(moves), 0, -1):
        t, _ = step(states[i], cube.inverse(moves[i - 1]), 0, config)
        traj.transitions.append(t)
        if t.is_done:
            break
    return traj


def forward_rollout(policy: Policy, config: EnvConfig, rng: np.random.Generator) -> Trajectory:
    s = reset(config, rng)
    traj = Trajectory()
    for n in range(config.max_steps):
        t, truncated = step(s, policy(s, rng), n, config)
        traj.transitions.append(t)
        if t.is_done:
            break
        traj.truncated = truncated
        s = t.s_next
    return traj


def generate_rollout(policy: Policy, b: float, config: EnvConfig, rng: np.random.Generator) -> Trajectory:
    """Backward rollout with probability ``b``, otherwise a forward rollout under ``policy``.

    ``b`` is a per-rollout Bernoulli probability (same long-run frequency as
    "every 1/b rollouts").
    """
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"b must be in [0, 1], got {b}")
    if rng.random() < b:
        return backward_rollout(config, rng)
    return forward_rollout(policy, config, rng)
