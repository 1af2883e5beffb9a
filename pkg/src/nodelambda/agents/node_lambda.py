"""Node(lambda): learned per-action next-state models plus a distance-to-goal network.

Targets come from a lambda-step greedy lookahead through the learned models:
the lookahead follows only the successor with the smallest predicted distance,
so one call costs lambda * (12 next-state + 12 distance) evaluations plus one.
"""
from __future__ import annotations

import numpy as np

from .. import cube, env, nn
from ..cube import CubeState, Move
from ..env import EnvConfig
from .base import Agent, EpisodeRecord, EpsilonSchedule, TrainLog, checkpoint_due, learner_rng, random_act


class NextStateModels:
    """Twelve same-shaped MLPs whose parameters are slices of stacked arrays."""

    def __init__(self, dims, rng: np.random.Generator):
        nets = [nn.he_init(dims, rng) for _ in range(12)]
        self.weights = [np.stack([n.weights[i] for n in nets]) for i in range(len(dims) - 1)]
        self.biases = [np.stack([n.biases[i] for n in nets]) for i in range(len(dims) - 1)]
        self.nets = [nn.MLP([w[a] for w in self.weights], [b[a] for b in self.biases]) for a in range(12)]

    @classmethod
    def from_nets(cls, nets: list[nn.MLP]) -> "NextStateModels":
        self = cls.__new__(cls)
        self.weights = [np.stack([n.weights[i] for n in nets]) for i in range(len(nets[0].weights))]
        self.biases = [np.stack([n.biases[i] for n in nets]) for i in range(len(nets[0].biases))]
        self.nets = [nn.MLP([w[a] for w in self.weights], [b[a] for b in self.biases]) for a in range(12)]
        return self

    def logits_all(self, x: np.ndarray) -> np.ndarray:
        """Logits of every model on every row of ``x``: shape ``(12, N, 144)``."""
        h = np.asarray(x, dtype=np.float64).T  # (in, N), shared by all models
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = np.matmul(w, h) + b[:, :, None]
            if i < last:
                np.maximum(h, 0.0, out=h)
        return h.transpose(0, 2, 1)


def random_states(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform over all reachable states in all 24 orientations."""
    arr = cube.unrank_batch(rng.integers(cube.NUM_STATES, size=n))
    return np.take_along_axis(arr, cube.ROTATIONS[rng.integers(24, size=n)], axis=1)


def train_next_state(net: nn.MLP, move: Move, n_samples: int, rng: np.random.Generator,
                     opt: nn.AdamState | None = None, batch_size: int = 128, epochs: int = 1,
                     lr: float = 1e-3) -> list[float]:
    """Supervised fit of one next-state model on ``n_samples`` random (s, s') pairs."""
    opt = opt or nn.AdamState.for_net(net, lr=lr)
    states = random_states(n_samples, rng)
    x = cube.encode_batch(states)
    y = cube.encode_batch(cube.apply_move_batch(states, move))
    loss = nn.Loss.grouped_ce()
    losses = []
    for _ in range(epochs):
        order = rng.permutation(n_samples)
        for lo in range(0, n_samples, batch_size):
            idx = order[lo : lo + batch_size]
            losses.append(nn.train_step(net, opt, x[idx], y[idx], loss))
    return losses


def next_state_accuracy(net: nn.MLP, move: Move, states: np.ndarray) -> float:
    pred, _ = cube.snap_batch(net(cube.encode_batch(states)))
    truth = cube.apply_move_batch(states, move)
    return float((pred == truth).all(axis=1).mean())


class NodeLambda(Agent):
    kind = "nodelambda"

    def __init__(self, lam=1, b=0.9, max_episodes=None, ns_hidden=(256,), d_hidden=(256, 256), lr_ns=1e-3,
                 lr_d=3e-4, huber_delta=1.0, eps_start=1.0, eps_end=0.05, eps_decay_frac=0.5, lam_act=None,
                 recursion_cap=1000, pretrain_ns=0, seed=0):
        if lam < 0:
            raise ValueError("lambda must be >= 0")
        if 24 * lam + 1 > recursion_cap:
            raise ValueError(f"lambda={lam} needs {24 * lam + 1} evaluations per lookahead, cap is {recursion_cap}")
        self.lam = int(lam)
        self.b = b
        self.max_episodes = max_episodes
        self.ns_hidden = tuple(int(h) for h in ns_hidden)
        self.d_hidden = tuple(int(h) for h in d_hidden)
        self.lr_ns = lr_ns
        self.lr_d = lr_d
        self.huber_delta = huber_delta
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_decay_frac = eps_decay_frac
        self.lam_act = min(self.lam, 1) if lam_act is None else int(lam_act)
        self.recursion_cap = recursion_cap
        self.pretrain_ns = int(pretrain_ns)
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.theta_d = nn.he_init([cube.OBS_SIZE, *self.d_hidden, 1], rng, output="softplus")
        self.ns = NextStateModels([cube.OBS_SIZE, *self.ns_hidden, cube.OBS_SIZE], rng)
        self._reset_optimizers()
        self.invalid_snaps = 0

    def _reset_optimizers(self) -> None:
        self.d_opt = nn.AdamState.for_net(self.theta_d, lr=self.lr_d)
        self.ns_opt = [nn.AdamState.for_net(net, lr=self.lr_ns) for net in self.ns.nets]

    def hyperparams(self) -> dict:
        return dict(lam=self.lam, b=self.b, max_episodes=self.max_episodes, ns_hidden=list(self.ns_hidden),
                    d_hidden=list(self.d_hidden), lr_ns=self.lr_ns, lr_d=self.lr_d, huber_delta=self.huber_delta,
                    eps_start=self.eps_start, eps_end=self.eps_end, eps_decay_frac=self.eps_decay_frac,
                    lam_act=self.lam_act, recursion_cap=self.recursion_cap, pretrain_ns=self.pretrain_ns,
                    seed=self.seed)

    # --- model queries ----------------------------------------------------

    def distance_estimate(self, arr: np.ndarray) -> np.ndarray:
        """Raw distance-network output for each row of sticker arrays."""
        return self.theta_d(cube.encode_batch(arr))[:, 0]

    def predict_successors(self, arr: np.ndarray) -> np.ndarray:
        """Snapped predicted successors under every move: shape ``(12, N, 24)``."""
        logits = self.ns.logits_all(cube.encode_batch(arr))
        snapped, valid = cube.snap_batch(logits.reshape(-1, cube.OBS_SIZE))
        self.invalid_snaps += int((~valid).sum())
        return snapped.reshape(12, len(arr), cube.NUM_STICKERS)

    def _score(self, succ: np.ndarray) -> np.ndarray:
        # solved successors score 0, everything else gets the distance network
        flat = succ.reshape(-1, cube.NUM_STICKERS)
        d = np.zeros(len(flat))
        live = ~cube.is_solved_batch(flat)
        if live.any():
            d[live] = self.distance_estimate(flat[live])
        return d.reshape(succ.shape[:2])

    def distance_to_goal_batch(self, lam: int, arr: np.ndarray) -> np.ndarray:
        arr = np.asarray(arr, dtype=np.uint8)
        out = np.zeros(len(arr))
        live = ~cube.is_solved_batch(arr)
        if not live.any():
            return out
        sub = arr[live]
        if lam == 0:
            out[live] = self.distance_estimate(sub)
            return out
        succ = self.predict_successors(sub)
        best = self._score(succ).argmin(axis=0)
        s_min = succ[best, np.arange(len(sub))]
        out[live] = 1.0 + self.distance_to_goal_batch(lam - 1, s_min)
        return out

    def distance_to_goal(self, lam: int, s: CubeState) -> float:
        return float(self.distance_to_goal_batch(lam, s.array()[None])[0])

    def act(self, s: CubeState, rng=None) -> Move:
        succ = self.predict_successors(s.array()[None])[:, 0]
        solved = cube.is_solved_batch(succ)
        if solved.any():
            return cube.MOVES[int(np.flatnonzero(solved)[0])]
        return cube.MOVES[int(self.distance_to_goal_batch(self.lam_act, succ).argmin())]

    # --- training ---------------------------------------------------------

    def pretrain(self, n_samples: int, rng: np.random.Generator) -> None:
        for m in cube.MOVES:
            train_next_state(self.ns.nets[m], m, n_samples, rng, opt=self.ns_opt[m])

    def learn_transition(self, tr: env.Transition) -> tuple[float, float]:
        """One Alg.-style update pair for a single transition; returns (L_NS, L_D)."""
        x = cube.encode(tr.s)
        if tr.is_done:
            target = 1.0
        else:
            target = 1.0 + self.distance_to_goal(self.lam, tr.s_next)
        a = int(tr.a)
        loss_ns = nn.train_step(self.ns.nets[a], self.ns_opt[a], x, cube.encode(tr.s_next), nn.Loss.grouped_ce())
        loss_d = nn.train_step(self.theta_d, self.d_opt, x, [target], nn.Loss.huber(self.huber_delta))
        return loss_ns, loss_d

    def train(self, config: EnvConfig, timesteps: int, log: TrainLog | None = None,
              checkpoint=None, checkpoint_every: int | None = None, record_trace: bool = False) -> TrainLog:
        log = log or TrainLog()
        if record_trace and log.trace is None:
            log.trace = []
        if self.pretrain_ns:
            self.pretrain(self.pretrain_ns, learner_rng(config.seed))
        eps = EpsilonSchedule(self.eps_start, self.eps_end, int(self.eps_decay_frac * timesteps))
        t = 0
        episode = 0
        clock = [0]

        def policy(s: CubeState, r: np.random.Generator) -> Move:
            e = eps(clock[0])
            clock[0] += 1
            return random_act(r) if r.random() < e else self.act(s)

        while t < timesteps and (self.max_episodes is None or episode < self.max_episodes):
            start = t
            rng = env.episode_rng(config.seed, episode)
            clock[0] = t
            traj = env.generate_rollout(policy, self.b, config, rng)
            transitions = traj.transitions[: timesteps - t]
            ns_losses, d_losses = [], []
            for i in range(len(transitions) - 1, -1, -1):
                if log.trace is not None:
                    log.trace.append((episode, i))
                loss_ns, loss_d = self.learn_transition(transitions[i])
                ns_losses.append(loss_ns)
                d_losses.append(loss_d)
            t += len(transitions)
            solved = bool(transitions) and transitions[-1].is_done
            log.episodes.append(EpisodeRecord(episode, t, traj.backward, len(transitions), solved,
                                              loss=float(np.mean(d_losses)), loss_ns=float(np.mean(ns_losses))))
            episode += 1
            if checkpoint is not None and checkpoint_due(start, t, checkpoint_every):
                checkpoint(t)
        return log

    # --- persistence ------------------------------------------------------

    def networks(self) -> list[nn.MLP]:
        return [self.theta_d, *self.ns.nets]

    def digest(self) -> str:
        return nn.param_digest(self.networks())

    def save(self, path) -> None:
        nn.save_networks(path, self.networks())

    @classmethod
    def load(cls, path, params: dict | None = None) -> "NodeLambda":
        nets = nn.load_networks(path)
        if len(nets) != 13 or nets[0].dims[-1] != 1:
            raise ValueError(f"{path}: not a Node(lambda) model (expected 1 distance + 12 next-state networks)")
        params = dict(params or {})
        params["d_hidden"] = nets[0].dims[1:-1]
        params["ns_hidden"] = nets[1].dims[1:-1]
        agent = cls(**params)
        agent.theta_d = nets[0]
        agent.theta_d.output = "softplus"
        agent.ns = NextStateModels.from_nets(nets[1:])
        agent._reset_optimizers()
        return agent
