"""2x2x2 cube reinforcement-learning lab: exact cube engine, BFS oracle, and
random / tabular Q / DQN / Node(lambda) agents."""

__version__ = "0.1.0"
