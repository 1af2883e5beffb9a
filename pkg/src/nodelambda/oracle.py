"""Exact goal distances for every canonical 2x2x2 state.

Verification only: nothing on a training path takes a DistanceTable.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cube
from .cube import MOVES, NUM_STATES, CubeState, Move

MAGIC = b"NLOR"
VERSION = 1
UNVISITED = 255
_N_PERM = 5040
_N_ORI = 729


def coordinate_move_tables() -> tuple[np.ndarray, np.ndarray]:
    """Per-move tables on the permutation (5040) and twist (729) coordinates.

    On canonical states the two coordinates transform independently: moves that
    touch the fixed cubie act as the opposite-face turn after re-canonicalization.
    """
    perm_table = np.empty((_N_PERM, 12), dtype=np.int64)
    ori_table = np.empty((_N_ORI, 12), dtype=np.int64)
    by_perm = cube.unrank_batch(np.arange(_N_PERM) * _N_ORI)
    by_ori = cube.unrank_batch(np.arange(_N_ORI))
    for m in MOVES:
        nxt = cube.canonicalize_batch(cube.apply_move_batch(by_perm, m))
        perm_table[:, m] = cube.rank_batch(nxt) // _N_ORI
        nxt = cube.canonicalize_batch(cube.apply_move_batch(by_ori, m))
        ori_table[:, m] = cube.rank_batch(nxt) % _N_ORI
    return perm_table, ori_table


@dataclass
class DistanceTable:
    distances: np.ndarray = field(default_factory=lambda: np.full(NUM_STATES, UNVISITED, dtype=np.uint8))
    built: bool = False

    def _require_built(self) -> None:
        if not self.built:
            raise RuntimeError("distance table has not been built")

    def distance(self, s: CubeState) -> int:
        self._require_built()
        return int(self.distances[cube.rank(cube.canonicalize(s))])

    def distance_batch(self, arr: np.ndarray) -> np.ndarray:
        self._require_built()
        return self.distances[cube.rank_batch(cube.canonicalize_batch(arr))].astype(np.int64)

    def histogram(self) -> np.ndarray:
        self._require_built()
        return np.bincount(self.distances, minlength=int(self.distances.max()) + 1)

    @property
    def max_distance(self) -> int:
        self._require_built()
        return int(self.distances.max())

    def checksum(self) -> int:
        return int(self.distances.sum(dtype=np.uint64))

    def save(self, path: str | Path) -> None:
        self._require_built()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", VERSION))
            fh.write(self.distances.tobytes())
            fh.write(struct.pack("<Q", self.checksum()))

    @classmethod
    def load(cls, path: str | Path) -> "DistanceTable":
        raw = Path(path).read_bytes()
        if raw[:4] != MAGIC:
            raise ValueError(f"{path}: not an oracle file")
        if len(raw) < 8:
            raise ValueError(f"{path}: truncated oracle file")
        (version,) = struct.unpack_from("<I", raw, 4)
        if version != VERSION:
            raise ValueError(f"{path}: unsupported oracle version {version}")
        if len(raw) != 8 + NUM_STATES + 8:
            raise ValueError(f"{path}: truncated oracle file")
        table = cls(np.frombuffer(raw, dtype=np.uint8, count=NUM_STATES, offset=8).copy(), built=True)
        (checksum,) = struct.unpack_from("<Q", raw, 8 + NUM_STATES)
        if checksum != table.checksum():
            raise ValueError(f"{path}: checksum mismatch")
        return table


def build() -> DistanceTable:
    """Level-synchronous BFS from the solved state over canonical indices."""
    perm_table, ori_table = coordinate_move_tables()
    dist = np.full(NUM_STATES, UNVISITED, dtype=np.uint8)
    start = cube.rank(cube.solved())
    dist[start] = 0
    frontier = np.array([start], dtype=np.int64)
    depth = 0
    while len(frontier):
        p, o = np.divmod(frontier, _N_ORI)
        found = []
        for m in MOVES:
            nb = perm_table[p, m] * _N_ORI + ori_table[o, m]
            nb = nb[dist[nb] == UNVISITED]
            dist[nb] = depth + 1
            found.append(nb)
        frontier = np.unique(np.concatenate(found))
        depth += 1
    table = DistanceTable(dist, built=True)
    if (dist == UNVISITED).any():
        raise RuntimeError("BFS left unvisited canonical states")
    return table


def optimal_distance(table: DistanceTable, s: CubeState) -> int:
    return table.distance(s)


def optimal_move(table: DistanceTable, s: CubeState) -> Move:
    """Lowest-ordinal move that reduces the exact distance by one."""
    d = table.distance(s)
    if d == 0:
        raise ValueError("state is already solved")
    succ = cube.successors_batch(s.array()[None])[0]
    dists = table.distance_batch(succ)
    return MOVES[int(np.flatnonzero(dists == d - 1)[0])]


def solve(table: DistanceTable, s: CubeState) -> list[Move]:
    """Greedy descent on the table; length equals the optimal distance."""
    path = []
    while not cube.is_solved(s):
        m = optimal_move(table, s)
        path.append(m)
        s = cube.apply_move(s, m)
    return path
