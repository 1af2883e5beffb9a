"""Experiment configuration: one TOML document, strict schema."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..env import ConfigError, EnvConfig

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

AgentKind = Literal["random", "tabular", "dqn", "nodelambda"]
MAX_TIMESTEPS = 10_000_000
U64_MAX = (1 << 64) - 1


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class _DepthRange(_Strict):
    @model_validator(mode="after")
    def _check_depths(self):
        lo, hi = self._depths()
        if lo is not None and hi is not None and not 1 <= lo <= hi:
            raise ValueError(f"depth range must satisfy 1 <= min <= max, got [{lo}, {hi}]")
        return self

    def _depths(self):
        return None, None


class EnvSection(_DepthRange):
    max_steps: int = Field(50, ge=1)
    scramble_depth_min: int = 1
    scramble_depth_max: int = 14
    reward_scheme: Literal["SparseGoal", "StepPenalty"] = "SparseGoal"

    def _depths(self):
        return self.scramble_depth_min, self.scramble_depth_max


class EvalSection(_DepthRange):
    cubes: int = Field(1000, ge=1)
    max_steps: int = Field(50, ge=1)
    depth_min: int = 1
    depth_max: int = 14
    workers: int = Field(1, ge=1)

    def _depths(self):
        return self.depth_min, self.depth_max


class _AgentSection(_DepthRange):
    """Per-agent overrides shared by every kind."""

    total_timesteps: Optional[int] = Field(None, ge=1, le=MAX_TIMESTEPS)
    depth_min: Optional[int] = None
    depth_max: Optional[int] = None

    def _depths(self):
        return self.depth_min, self.depth_max

    def agent_params(self) -> dict:
        return self.model_dump(exclude={"total_timesteps", "depth_min", "depth_max"})


class RandomSection(_AgentSection):
    pass


class TabularSection(_AgentSection):
    alpha: float = Field(0.1, gt=0, le=1)
    gamma: float = Field(0.9, gt=0, le=1)
    b: float = Field(0.9, ge=0, le=1)
    eps_start: float = Field(1.0, ge=0, le=1)
    eps_end: float = Field(0.05, ge=0, le=1)
    eps_decay_frac: float = Field(0.5, gt=0, le=1)
    reverse_backward: bool = True


class DQNSection(_AgentSection):
    hidden: list[int] = [256, 256]
    lr: float = Field(5e-4, gt=0)
    gamma: float = Field(0.9, gt=0, le=1)
    b: float = Field(0.9, ge=0, le=1)
    replay_capacity: int = Field(100_000, ge=1)
    batch_size: int = Field(64, ge=1)
    sync_period: int = Field(1000, ge=1)
    train_freq: int = Field(4, ge=1)
    eps_start: float = Field(1.0, ge=0, le=1)
    eps_end: float = Field(0.05, ge=0, le=1)
    eps_decay_frac: float = Field(0.5, gt=0, le=1)


class NodeLambdaSection(_AgentSection):
    lam: int = Field(1, ge=0)
    b: float = Field(0.9, ge=0, le=1)
    max_episodes: Optional[int] = Field(None, ge=0)
    ns_hidden: list[int] = [256]
    d_hidden: list[int] = [256, 256]
    lr_ns: float = Field(1e-3, gt=0)
    lr_d: float = Field(3e-4, gt=0)
    huber_delta: float = Field(1.0, gt=0)
    eps_start: float = Field(1.0, ge=0, le=1)
    eps_end: float = Field(0.05, ge=0, le=1)
    eps_decay_frac: float = Field(0.5, gt=0, le=1)
    lam_act: Optional[int] = Field(None, ge=0)
    recursion_cap: int = Field(1000, ge=1)
    pretrain_ns: int = Field(0, ge=0)


class AgentsSection(_Strict):
    random: RandomSection = RandomSection()
    tabular: TabularSection = TabularSection()
    dqn: DQNSection = DQNSection()
    nodelambda: NodeLambdaSection = NodeLambdaSection()


class ExperimentConfig(_Strict):
    agent: AgentKind = "tabular"
    seed: int = Field(0, ge=0, le=U64_MAX)
    total_timesteps: int = Field(100_000, ge=1, le=MAX_TIMESTEPS)
    checkpoint_every: int = Field(0, ge=0)
    early_stop: bool = False
    early_stop_cubes: int = Field(200, ge=1)
    env: EnvSection = EnvSection()
    eval: EvalSection = EvalSection()
    agents: AgentsSection = AgentsSection()

    def section(self, kind: str | None = None) -> _AgentSection:
        return getattr(self.agents, kind or self.agent)

    def timesteps_for(self, kind: str | None = None) -> int:
        override = self.section(kind).total_timesteps
        return self.total_timesteps if override is None else override

    def train_env(self, kind: str | None = None, seed: int | None = None) -> EnvConfig:
        sec = self.section(kind)
        return EnvConfig(
            max_steps=self.env.max_steps,
            scramble_depth_min=sec.depth_min if sec.depth_min is not None else self.env.scramble_depth_min,
            scramble_depth_max=sec.depth_max if sec.depth_max is not None else self.env.scramble_depth_max,
            reward_scheme=self.env.reward_scheme,
            seed=self.seed if seed is None else seed,
        )

    def eval_env(self, seed: int) -> EnvConfig:
        return EnvConfig(
            max_steps=self.eval.max_steps,
            scramble_depth_min=self.eval.depth_min,
            scramble_depth_max=self.eval.depth_max,
            reward_scheme=self.env.reward_scheme,
            seed=seed,
        )

    def digest(self) -> str:
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _format_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        if err["type"] == "extra_forbidden":
            parts.append(f"unknown config key '{loc}'")
        else:
            parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def from_dict(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return from_dict(data)


def with_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Apply CLI-style overrides (``None`` means "not given")."""
    data = config.model_dump()
    for key, value in overrides.items():
        if value is None:
            continue
        node = data
        *path, leaf = key.split(".")
        for part in path:
            node = node[part]
        node[leaf] = value
    return from_dict(data)
