from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, ClassVar

import numpy as np

from ..cube import MOVES, CubeState, Move
from ..env import splitmix64


@dataclass
class EpsilonSchedule:
    """Linear decay from ``start`` to ``end`` over ``decay_steps`` timesteps."""

    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 1

    def __call__(self, t: int) -> float:
        frac = t / max(self.decay_steps, 1)
        if frac >= 1.0:
            return self.end
        return self.start + frac * (self.end - self.start)


@dataclass
class EpisodeRecord:
    episode: int
    timestep: int
    backward: bool
    length: int
    solved: bool
    loss: float = float("nan")
    loss_ns: float = float("nan")


@dataclass
class TrainLog:
    episodes: list[EpisodeRecord] = field(default_factory=list)
    # (episode, transition index) in the order transitions were consumed for updates
    trace: list[tuple[int, int]] | None = None

    def rows(self) -> list[dict]:
        return [asdict(e) for e in self.episodes]


# called with the timestep count each time a checkpoint boundary is crossed
CheckpointHook = Callable[[int], None]


class Agent:
    kind: ClassVar[str]

    def act(self, s: CubeState, rng: np.random.Generator | None = None) -> Move:
        raise NotImplementedError

    def explore_act(self, s: CubeState, epsilon: float, rng: np.random.Generator) -> Move:
        if rng.random() < epsilon:
            return random_act(rng)
        return self.act(s, rng)

    def hyperparams(self) -> dict:
        return {}

    def digest(self) -> str:
        raise NotImplementedError

    def save(self, path: str | Path) -> None:
        raise NotImplementedError

    def write_sidecar(self, path: str | Path, **extra) -> None:
        meta = {"agent": self.kind, "params": self.hyperparams(), **extra}
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def random_act(rng: np.random.Generator) -> Move:
    return MOVES[int(rng.integers(len(MOVES)))]


def learner_rng(seed: int) -> np.random.Generator:
    """Stream for learner-side randomness (minibatch sampling, pre-training), apart from rollouts."""
    return np.random.default_rng(splitmix64(seed ^ 0x1EA2CE5))


def checkpoint_due(prev: int, now: int, every: int | None) -> bool:
    return bool(every) and now // every > prev // every
