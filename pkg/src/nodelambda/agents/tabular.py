from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .. import cube, env
from ..cube import CubeState, Move
from ..env import EnvConfig, Transition
from .base import Agent, EpisodeRecord, EpsilonSchedule, TrainLog, checkpoint_due, random_act

MAGIC = b"NLTQ"
VERSION = 1


def state_keys(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Canonical indices and the rotation index that canonicalizes each row."""
    arr = np.asarray(arr, dtype=np.uint8)
    rots = cube.canonical_rotation_batch(arr)
    canon = np.take_along_axis(arr, cube.ROTATIONS[rots], axis=1)
    return cube.rank_batch(canon), rots


def state_key(s: CubeState) -> tuple[int, int]:
    keys, rots = state_keys(s.array()[None])
    return int(keys[0]), int(rots[0])


class TabularQ(Agent):
    """Q-learning over canonical state indices; unseen states read as all zeros.

    Table actions live in the canonical frame: a physical move ``a`` taken in a
    state whose canonicalizing rotation is ``r`` is stored as ``MOVE_CONJ[r, a]``.
    """

    kind = "tabular"

    def __init__(self, alpha=0.1, gamma=0.9, b=0.9, eps_start=1.0, eps_end=0.05, eps_decay_frac=0.5,
                 reverse_backward=True):
        self.alpha = alpha
        self.gamma = gamma
        self.b = b
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_decay_frac = eps_decay_frac
        self.reverse_backward = reverse_backward
        self.q: dict[int, np.ndarray] = {}

    def hyperparams(self) -> dict:
        return dict(alpha=self.alpha, gamma=self.gamma, b=self.b, eps_start=self.eps_start,
                    eps_end=self.eps_end, eps_decay_frac=self.eps_decay_frac,
                    reverse_backward=self.reverse_backward)

    def values(self, key: int) -> np.ndarray:
        q = self.q.get(key)
        return np.zeros(12) if q is None else q

    def greedy(self, key: int, rot: int) -> Move:
        q = self.q.get(key)
        if q is None:
            return cube.MOVES[0]
        return cube.MOVES[cube.MOVE_CONJ_INV[rot, int(q.argmax())]]

    def act(self, s: CubeState, rng=None) -> Move:
        return self.greedy(*state_key(s))

    def _update(self, key: int, a: int, reward: float, next_key: int, done: bool) -> None:
        q = self.q.get(key)
        if q is None:
            q = self.q[key] = np.zeros(12)
        target = reward
        if not done:
            nq = self.q.get(next_key)
            if nq is not None:
                target += self.gamma * nq.max()
        q[a] += self.alpha * (target - q[a])

    def update(self, t: Transition) -> None:
        key, rot = state_key(t.s)
        self._update(key, int(cube.MOVE_CONJ[rot, t.a]), t.reward, state_key(t.s_next)[0], t.is_done)

    def train(self, config: EnvConfig, timesteps: int, log: TrainLog | None = None,
              checkpoint=None, checkpoint_every: int | None = None) -> TrainLog:
        log = log or TrainLog()
        eps = EpsilonSchedule(self.eps_start, self.eps_end, int(self.eps_decay_frac * timesteps))
        t = 0
        episode = 0
        while t < timesteps:
            start = t
            rng = env.episode_rng(config.seed, episode)
            if rng.random() < self.b:
                traj = env.backward_rollout(config, rng).transitions[: timesteps - t]
                states = np.array([tr.s.array() for tr in traj] + [traj[-1].s_next.array()])
                keys, rots = state_keys(states)
                order = range(len(traj) - 1, -1, -1) if self.reverse_backward else range(len(traj))
                for i in order:
                    tr = traj[i]
                    a = int(cube.MOVE_CONJ[rots[i], tr.a])
                    self._update(int(keys[i]), a, tr.reward, int(keys[i + 1]), tr.is_done)
                backward, length, solved = True, len(traj), traj[-1].is_done
            else:
                s = env.reset(config, rng)
                key, rot = state_key(s)
                solved = False
                length = 0
                while length < config.max_steps and t + length < timesteps:
                    a = random_act(rng) if rng.random() < eps(t + length) else self.greedy(key, rot)
                    tr, _ = env.step(s, a, length, config)
                    next_key, next_rot = state_key(tr.s_next)
                    self._update(key, int(cube.MOVE_CONJ[rot, a]), tr.reward, next_key, tr.is_done)
                    length += 1
                    if tr.is_done:
                        solved = True
                        break
                    s, key, rot = tr.s_next, next_key, next_rot
                backward = False
            t += length
            log.episodes.append(EpisodeRecord(episode, t, backward, length, solved))
            episode += 1
            if checkpoint is not None and checkpoint_due(start, t, checkpoint_every):
                checkpoint(t)
        return log

    def train_exhaustive(self, max_depth: int, sweeps: int = 1, scheme=env.RewardScheme.SPARSE_GOAL) -> int:
        """Backward-rollout updates over every scramble of length <= ``max_depth``.

        Each scramble is replayed as its reversed solving path, goal end first,
        cut at the first solved state. Returns the number of updates performed.
        """
        tree = ScrambleTree(max_depth)
        r_done = env.reward_for(True, scheme)
        r_step = env.reward_for(False, scheme)
        count = 0
        for _ in range(sweeps):
            for depth in range(1, max_depth + 1):
                for node in range(len(tree.keys[depth])):
                    if tree.solved[depth][node]:
                        continue
                    path = []
                    d, n = depth, node
                    while d > 0:
                        parent = int(tree.parents[d][n])
                        done = d == 1 or bool(tree.solved[d - 1][parent])
                        next_key = tree.keys[d - 1][parent] if d > 1 else tree.keys[0][0]
                        a = int(cube.MOVE_CONJ[tree.rots[d][n], int(tree.moves[d][n]) ^ 1])
                        path.append((int(tree.keys[d][n]), a, int(next_key), done))
                        if done:
                            break
                        d, n = d - 1, parent
                    for key, a, next_key, done in reversed(path):
                        self._update(key, a, r_done if done else r_step, next_key, done)
                        count += 1
        return count

    def digest(self) -> str:
        h = hashlib.sha256()
        for k in sorted(self.q):
            h.update(struct.pack("<I", k))
            h.update(self.q[k].tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        """NLTQ v1: magic, u32 version, u32 count, then sorted (u32 index, 12 x f32) records."""
        keys = sorted(self.q)
        rec = np.zeros(len(keys), dtype=[("index", "<u4"), ("q", "<f4", (12,))])
        rec["index"] = keys
        if keys:
            rec["q"] = np.stack([self.q[k] for k in keys])
        Path(path).write_bytes(MAGIC + struct.pack("<II", VERSION, len(keys)) + rec.tobytes())

    @classmethod
    def load(cls, path, params: dict | None = None) -> "TabularQ":
        raw = Path(path).read_bytes()
        if raw[:4] != MAGIC:
            raise ValueError(f"{path}: not a tabular Q file")
        if len(raw) < 12:
            raise ValueError(f"{path}: truncated tabular Q header")
        version, count = struct.unpack_from("<II", raw, 4)
        if version != VERSION:
            raise ValueError(f"{path}: unsupported tabular format version {version}")
        dtype = np.dtype([("index", "<u4"), ("q", "<f4", (12,))])
        if len(raw) != 12 + count * dtype.itemsize:
            raise ValueError(f"{path}: truncated tabular Q file")
        rec = np.frombuffer(raw, dtype=dtype, offset=12)
        agent = cls(**(params or {}))
        agent.q = {int(i): q.astype(np.float64) for i, q in zip(rec["index"], rec["q"])}
        return agent


class ScrambleTree:
    """Every scramble of length <= ``max_depth`` without consecutive same-face turns.

    Level ``d`` holds one node per length-``d`` sequence: its canonical key,
    canonicalizing rotation, last move, parent index at level ``d - 1`` and
    whether it is solved.
    """

    def __init__(self, max_depth: int):
        states = cube.solved().array()[None]
        faces = np.array([-1])
        keys, rots = state_keys(states)
        self.keys = [keys]
        self.rots = [rots]
        self.moves = [np.array([-1])]
        self.parents = [np.array([-1])]
        self.solved = [np.array([True])]
        for _ in range(max_depth):
            parent, move = np.nonzero(np.arange(12)[None, :] // 2 != faces[:, None])
            states = cube.apply_move_batch(states[parent], move)
            faces = move // 2
            keys, rots = state_keys(states)
            self.keys.append(keys)
            self.rots.append(rots)
            self.moves.append(move)
            self.parents.append(parent)
            self.solved.append(cube.is_solved_batch(states))
