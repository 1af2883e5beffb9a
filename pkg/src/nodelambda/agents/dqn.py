from __future__ import annotations

import numpy as np

from .. import cube, env, nn
from ..cube import CubeState, Move
from ..env import EnvConfig
from .base import Agent, EpisodeRecord, EpsilonSchedule, TrainLog, checkpoint_due, learner_rng, random_act


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions stored as sticker bytes."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, cube.NUM_STICKERS), dtype=np.uint8)
        self.s_next = np.zeros((capacity, cube.NUM_STICKERS), dtype=np.uint8)
        self.a = np.zeros(capacity, dtype=np.int64)
        self.r = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, t: env.Transition) -> None:
        i = self.pos
        self.s[i] = t.s.array()
        self.s_next[i] = t.s_next.array()
        self.a[i] = t.a
        self.r[i] = t.reward
        self.done[i] = t.is_done
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(self.size, size=n)
        return self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.done[idx]


class DQNAgent(Agent):
    kind = "dqn"

    def __init__(self, hidden=(256, 256), lr=5e-4, gamma=0.9, b=0.9, replay_capacity=100_000, batch_size=64,
                 sync_period=1000, train_freq=4, eps_start=1.0, eps_end=0.05, eps_decay_frac=0.5, seed=0):
        self.hidden = tuple(int(h) for h in hidden)
        self.lr = lr
        self.gamma = gamma
        self.b = b
        self.replay_capacity = replay_capacity
        self.batch_size = batch_size
        self.sync_period = sync_period
        self.train_freq = train_freq
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_decay_frac = eps_decay_frac
        self.seed = seed
        dims = [cube.OBS_SIZE, *self.hidden, 12]
        self.online = nn.he_init(dims, np.random.default_rng(seed))
        self.target = self.online.copy()
        self.opt = nn.AdamState.for_net(self.online, lr=lr)
        self.replay = ReplayBuffer(replay_capacity)
        self.train_calls = 0

    def hyperparams(self) -> dict:
        return dict(hidden=list(self.hidden), lr=self.lr, gamma=self.gamma, b=self.b,
                    replay_capacity=self.replay_capacity, batch_size=self.batch_size,
                    sync_period=self.sync_period, train_freq=self.train_freq, eps_start=self.eps_start,
                    eps_end=self.eps_end, eps_decay_frac=self.eps_decay_frac, seed=self.seed)

    def q_values(self, s: CubeState) -> np.ndarray:
        return self.online(cube.encode(s))

    def act(self, s: CubeState, rng=None) -> Move:
        return cube.MOVES[int(self.q_values(s).argmax())]

    def train_step(self, rng: np.random.Generator) -> float | None:
        """One minibatch update; ``None`` while the replay holds fewer than a batch."""
        if len(self.replay) < self.batch_size:
            return None
        s, a, r, s_next, done = self.replay.sample(self.batch_size, rng)
        q_next = self.target(cube.encode_batch(s_next)).max(axis=1)
        y = r + self.gamma * (~done) * q_next
        target = np.zeros((self.batch_size, 12))
        target[np.arange(self.batch_size), a] = y
        mask = np.zeros_like(target)
        mask[np.arange(self.batch_size), a] = 1.0
        loss = nn.train_step(self.online, self.opt, cube.encode_batch(s), target, nn.Loss.mse(), mask)
        self.train_calls += 1
        if self.train_calls % self.sync_period == 0:
            self.sync_target()
        return loss

    def sync_target(self) -> None:
        self.target.copy_from(self.online)

    def train(self, config: EnvConfig, timesteps: int, log: TrainLog | None = None,
              checkpoint=None, checkpoint_every: int | None = None) -> TrainLog:
        log = log or TrainLog()
        eps = EpsilonSchedule(self.eps_start, self.eps_end, int(self.eps_decay_frac * timesteps))
        t = 0
        episode = 0
        learn = learner_rng(config.seed)

        def observe(tr, losses):
            nonlocal t
            self.replay.add(tr)
            t += 1
            if t % self.train_freq == 0:
                loss = self.train_step(learn)
                if loss is not None:
                    losses.append(loss)

        while t < timesteps:
            start = t
            rng = env.episode_rng(config.seed, episode)
            losses: list[float] = []
            if rng.random() < self.b:
                traj = env.backward_rollout(config, rng).transitions[: timesteps - t]
                for tr in traj:
                    observe(tr, losses)
                backward, length, solved = True, len(traj), traj[-1].is_done
            else:
                s = env.reset(config, rng)
                solved = False
                length = 0
                while length < config.max_steps and t < timesteps:
                    a = random_act(rng) if rng.random() < eps(t) else self.act(s)
                    tr, _ = env.step(s, a, length, config)
                    observe(tr, losses)
                    length += 1
                    if tr.is_done:
                        solved = True
                        break
                    s = tr.s_next
                backward = False
            mean_loss = float(np.mean(losses)) if losses else float("nan")
            log.episodes.append(EpisodeRecord(episode, t, backward, length, solved, loss=mean_loss))
            episode += 1
            if checkpoint is not None and checkpoint_due(start, t, checkpoint_every):
                checkpoint(t)
        return log

    def networks(self) -> list[nn.MLP]:
        return [self.online, self.target]

    def digest(self) -> str:
        return nn.param_digest(self.networks())

    def save(self, path) -> None:
        nn.save_networks(path, self.networks())

    @classmethod
    def load(cls, path, params: dict | None = None) -> "DQNAgent":
        nets = nn.load_networks(path)
        if len(nets) != 2 or nets[0].dims[0] != cube.OBS_SIZE or nets[0].dims[-1] != 12:
            raise ValueError(f"{path}: not a DQN model (expected online and target 144->...->12 networks)")
        params = dict(params or {})
        params["hidden"] = nets[0].dims[1:-1]
        agent = cls(**params)
        agent.online, agent.target = nets
        agent.opt = nn.AdamState.for_net(agent.online, lr=agent.lr)
        return agent
