from __future__ import annotations

import numpy as np

from ..cube import CubeState, Move
from .base import Agent, random_act


class RandomAgent(Agent):
    """Uniform over the 12 quarter turns; needs the caller's generator."""

    kind = "random"

    def act(self, s: CubeState, rng: np.random.Generator | None = None) -> Move:
        if rng is None:
            raise ValueError("the random agent needs a generator")
        return random_act(rng)

    def digest(self) -> str:
        return "random"
