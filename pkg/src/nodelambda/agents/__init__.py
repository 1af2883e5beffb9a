from .base import Agent, EpisodeRecord, EpsilonSchedule, TrainLog, random_act
from .dqn import DQNAgent, ReplayBuffer
from .node_lambda import NodeLambda
from .random_agent import RandomAgent
from .tabular import TabularQ

AGENT_KINDS = {
    "random": RandomAgent,
    "tabular": TabularQ,
    "dqn": DQNAgent,
    "nodelambda": NodeLambda,
}

__all__ = [
    "AGENT_KINDS",
    "Agent",
    "DQNAgent",
    "EpisodeRecord",
    "EpsilonSchedule",
    "NodeLambda",
    "RandomAgent",
    "ReplayBuffer",
    "TabularQ",
    "TrainLog",
    "random_act",
]
