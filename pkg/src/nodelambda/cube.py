"""2x2x2 cube group engine.

Sticker layout (index = face * 4 + row * 2 + col), faces ordered U, D, F, B, L, R.
Each face is viewed from outside the cube; "top" of the view is:

    face  top of view   right of view
    U     B             R
    D     F             R
    F     U             R
    B     U             L
    L     U             F
    R     U             B

Unfolded net::

              ┌──┬──┐
              │ 0│ 1│
              ├──┼──┤
              │ 2│ 3│
        ┌──┬──┼──┼──┼──┬──┬──┬──┐
        │16│17│ 8│ 9│20│21│12│13│
        ├──┼──┼──┼──┼──┼──┼──┼──┤
        │18│19│10│11│22│23│14│15│
        └──┴──┼──┼──┼──┴──┴──┴──┘
              │ 4│ 5│
              ├──┼──┤
              │ 6│ 7│
              └──┴──┘

A move is a gather permutation: ``new[i] = old[perm[i]]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from operator import itemgetter
from typing import Sequence

import numpy as np

NUM_STICKERS = 24
NUM_COLORS = 6
OBS_SIZE = NUM_STICKERS * NUM_COLORS
NUM_STATES = math.factorial(7) * 3**6  # 3_674_160


class Color(IntEnum):
    CU = 0
    CD = 1
    CF = 2
    CB = 3
    CL = 4
    CR = 5


class Move(IntEnum):
    U = 0
    U_PRIME = 1
    D = 2
    D_PRIME = 3
    F = 4
    F_PRIME = 5
    B = 6
    B_PRIME = 7
    L = 8
    L_PRIME = 9
    R = 10
    R_PRIME = 11

    @property
    def face(self) -> int:
        return self.value >> 1

    @property
    def notation(self) -> str:
        return "UDFBLR"[self.face] + ("'" if self.value & 1 else "")

    @classmethod
    def parse(cls, text: str) -> "Move":
        for m in cls:
            if m.notation == text:
                return m
        raise ValueError(f"unknown move {text!r}")

    def __str__(self) -> str:
        return self.notation


MOVES = tuple(Move)

# Clockwise quarter turns (viewed from outside the face) and their inverses, in Move order.
MOVE_PERMS = np.array(
    [
        (2, 0, 3, 1, 4, 5, 6, 7, 20, 21, 10, 11, 16, 17, 14, 15, 8, 9, 18, 19, 12, 13, 22, 23),  # U
        (1, 3, 0, 2, 4, 5, 6, 7, 16, 17, 10, 11, 20, 21, 14, 15, 12, 13, 18, 19, 8, 9, 22, 23),  # U'
        (0, 1, 2, 3, 6, 4, 7, 5, 8, 9, 18, 19, 12, 13, 22, 23, 16, 17, 14, 15, 20, 21, 10, 11),  # D
        (0, 1, 2, 3, 5, 7, 4, 6, 8, 9, 22, 23, 12, 13, 18, 19, 16, 17, 10, 11, 20, 21, 14, 15),  # D'
        (0, 1, 19, 17, 22, 20, 6, 7, 10, 8, 11, 9, 12, 13, 14, 15, 16, 4, 18, 5, 2, 21, 3, 23),  # F
        (0, 1, 20, 22, 17, 19, 6, 7, 9, 11, 8, 10, 12, 13, 14, 15, 16, 3, 18, 2, 5, 21, 4, 23),  # F'
        (21, 23, 2, 3, 4, 5, 16, 18, 8, 9, 10, 11, 14, 12, 15, 13, 1, 17, 0, 19, 20, 7, 22, 6),  # B
        (18, 16, 2, 3, 4, 5, 23, 21, 8, 9, 10, 11, 13, 15, 12, 14, 6, 17, 7, 19, 20, 0, 22, 1),  # B'
        (15, 1, 13, 3, 8, 5, 10, 7, 0, 9, 2, 11, 12, 6, 14, 4, 18, 16, 19, 17, 20, 21, 22, 23),  # L
        (8, 1, 10, 3, 15, 5, 13, 7, 4, 9, 6, 11, 12, 2, 14, 0, 17, 19, 16, 18, 20, 21, 22, 23),  # L'
        (0, 9, 2, 11, 4, 14, 6, 12, 8, 5, 10, 7, 3, 13, 1, 15, 16, 17, 18, 19, 22, 20, 23, 21),  # R
        (0, 14, 2, 12, 4, 9, 6, 11, 8, 1, 10, 3, 7, 13, 5, 15, 16, 17, 18, 19, 21, 23, 20, 22),  # R'
    ],
    dtype=np.intp,
)

# Corner slots as sticker triples: U/D facelet first, then clockwise seen from outside.
# The first seven are the free slots used for ranking; DBL holds the fixed cubie.
CORNER_SLOTS = np.array(
    [
        (3, 20, 9),  # URF
        (2, 8, 17),  # UFL
        (0, 16, 13),  # ULB
        (1, 12, 21),  # UBR
        (5, 11, 22),  # DFR
        (4, 19, 10),  # DLF
        (7, 23, 14),  # DRB
        (6, 15, 18),  # DBL
    ],
    dtype=np.intp,
)
FIXED_SLOT = 7

_MOVE_GETTERS = tuple(itemgetter(*p) for p in MOVE_PERMS.tolist())
_SOLVED_BYTES = bytes(f for f in range(NUM_COLORS) for _ in range(4))


@dataclass(frozen=True, slots=True)
class CubeState:
    """Immutable 24-sticker color assignment (one color ordinal per byte)."""

    stickers: bytes

    @classmethod
    def from_bytes(cls, data: bytes | Sequence[int]) -> "CubeState":
        """Validated deserialization of a 24-byte color-ordinal array."""
        state = cls(bytes(data))
        if not is_valid(state):
            raise ValueError("not a reachable 2x2x2 cube state")
        return state

    def to_bytes(self) -> bytes:
        return self.stickers

    def array(self) -> np.ndarray:
        return np.frombuffer(self.stickers, dtype=np.uint8)

    def __repr__(self) -> str:
        return f"CubeState({self.stickers.hex()})"


def solved() -> CubeState:
    return CubeState(_SOLVED_BYTES)


def apply_move(s: CubeState, m: Move) -> CubeState:
    return CubeState(bytes(_MOVE_GETTERS[m](s.stickers)))


def apply_moves(s: CubeState, moves: Sequence[Move]) -> CubeState:
    for m in moves:
        s = apply_move(s, m)
    return s


def inverse(m: Move) -> Move:
    return Move(m ^ 1)


def is_solved(s: CubeState) -> bool:
    st = s.stickers
    return all(st[i] == st[i + 1] == st[i + 2] == st[i + 3] for i in range(0, NUM_STICKERS, 4))


# --- whole-cube rotations -------------------------------------------------

def _compose(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Gather permutation for applying ``p`` then ``q``."""
    return p[q]


def _rotation_group() -> np.ndarray:
    x = _compose(MOVE_PERMS[Move.R], MOVE_PERMS[Move.L_PRIME])
    y = _compose(MOVE_PERMS[Move.U], MOVE_PERMS[Move.D_PRIME])
    identity = np.arange(NUM_STICKERS)
    found = {tuple(identity): identity}
    frontier = [identity]
    while frontier:
        nxt = []
        for p in frontier:
            for g in (x, y):
                r = _compose(p, g)
                if tuple(r) not in found:
                    found[tuple(r)] = r
                    nxt.append(r)
        frontier = nxt
    return np.array(sorted(found.values(), key=tuple))


ROTATIONS = _rotation_group()
assert len(ROTATIONS) == 24

_SOLVED_ARR = np.frombuffer(_SOLVED_BYTES, dtype=np.uint8)
_FIXED_COLORS = tuple(int(c) for c in _SOLVED_ARR[CORNER_SLOTS[FIXED_SLOT]])  # (CD, CB, CL)
_FIXED_MASK = sum(1 << c for c in _FIXED_COLORS)


def _locate_fixed_cubie(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Slot and twist of the fixed cubie for a batch ``(N, 24)``."""
    tri = arr[:, CORNER_SLOTS].astype(np.int64)  # (N, 8, 3)
    mask = (1 << tri).sum(axis=2)
    hit = mask == _FIXED_MASK
    slot = hit.argmax(axis=1)
    rows = np.arange(len(arr))
    twist = (tri[rows, slot] == _FIXED_COLORS[0]).argmax(axis=1)
    return slot, twist


def _canon_table() -> np.ndarray:
    # table[slot, twist] -> rotation moving the fixed cubie home with zero twist
    table = np.full((8, 3), -1, dtype=np.intp)
    rotated = _SOLVED_ARR[ROTATIONS]
    slot, twist = _locate_fixed_cubie(rotated)
    for r, (k, t) in enumerate(zip(slot, twist)):
        inv = np.argsort(ROTATIONS[r])
        table[k, t] = int(np.flatnonzero((ROTATIONS == inv).all(axis=1))[0])
    assert (table >= 0).all()
    return table


_CANON_ROT = _canon_table()


def _move_conjugation() -> np.ndarray:
    # conj[r, m] = m' with rotate_r(apply(s, m)) == apply(rotate_r(s), m')
    labels = np.arange(NUM_STICKERS)
    conj = np.empty((len(ROTATIONS), 12), dtype=np.intp)
    for r, rot in enumerate(ROTATIONS):
        for m in range(12):
            lhs = labels[MOVE_PERMS[m]][rot]
            conj[r, m] = int(np.flatnonzero((labels[rot][MOVE_PERMS] == lhs).all(axis=1))[0])
    return conj


MOVE_CONJ = _move_conjugation()
# MOVE_CONJ_INV[r, m'] = physical move that acts as m' in the rotated frame
MOVE_CONJ_INV = np.argsort(MOVE_CONJ, axis=1)


def canonical_rotation_batch(arr: np.ndarray) -> np.ndarray:
    """Index into ROTATIONS of the rotation that canonicalizes each row."""
    slot, twist = _locate_fixed_cubie(np.asarray(arr, dtype=np.uint8))
    return _CANON_ROT[slot, twist]


def canonicalize_batch(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.uint8)
    perms = ROTATIONS[canonical_rotation_batch(arr)]
    return np.take_along_axis(arr, perms, axis=1)


def canonicalize(s: CubeState) -> CubeState:
    return CubeState(canonicalize_batch(s.array()[None])[0].tobytes())


# --- ranking ---------------------------------------------------------------

_FACT = [math.factorial(i) for i in range(8)]
_POW3 = [3**i for i in range(7)]
_FREE = CORNER_SLOTS[:FIXED_SLOT]
# cubie id -> color triple read from its home slot (U/D color first, clockwise)
CUBIE_COLORS = [tuple(int(c) for c in _SOLVED_ARR[slot]) for slot in CORNER_SLOTS]
# color triple rotated to start at its U/D color -> cubie id
_CUBIE_LOOKUP = np.full(6 * 36 + 6 * 6 + 6, -1, dtype=np.int64)
for _cid, (_a, _b, _c) in enumerate(CUBIE_COLORS):
    _CUBIE_LOOKUP[_a * 36 + _b * 6 + _c] = _cid


def _corner_coords(arr: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cubie ids and twists for the free slots, shape ``(N, 7)`` each; -1 marks garbage."""
    tri = arr[:, _FREE].astype(np.int64)  # (N, 7, 3)
    ud = tri <= Color.CD
    ori = ud.argmax(axis=2)
    ok = ud.sum(axis=2) == 1
    idx = (ori[..., None] + np.arange(3)) % 3
    rolled = np.take_along_axis(tri, idx, axis=2)
    cubie = _CUBIE_LOOKUP[rolled[..., 0] * 36 + rolled[..., 1] * 6 + rolled[..., 2]]
    cubie = np.where(ok, cubie, -1)
    return cubie, ori


def _lehmer(perm: np.ndarray) -> np.ndarray:
    n = perm.shape[1]
    code = np.zeros(len(perm), dtype=np.int64)
    for i in range(n):
        smaller = (perm[:, i + 1 :] < perm[:, i : i + 1]).sum(axis=1)
        code += smaller * _FACT[n - 1 - i]
    return code


def _is_canonical(arr: np.ndarray) -> np.ndarray:
    return (arr[:, CORNER_SLOTS[FIXED_SLOT]] == np.array(_FIXED_COLORS)).all(axis=1)


def rank_batch(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.uint8)
    if not _is_canonical(arr).all():
        raise ValueError("rank requires canonicalized states")
    cubie, ori = _corner_coords(arr)
    if (cubie < 0).any():
        raise ValueError("state has malformed corners")
    ori_code = (ori[:, :6] * np.array(_POW3[5::-1])).sum(axis=1)
    return _lehmer(cubie) * 729 + ori_code


def rank(s: CubeState) -> int:
    return int(rank_batch(s.array()[None])[0])


def unrank_batch(idx: np.ndarray) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    if ((idx < 0) | (idx >= NUM_STATES)).any():
        raise IndexError(f"canonical index out of range [0, {NUM_STATES})")
    n = len(idx)
    perm_code, ori_code = np.divmod(idx, 729)
    ori = np.zeros((n, 7), dtype=np.int64)
    rem = ori_code.copy()
    for i in range(6):
        ori[:, i], rem = np.divmod(rem, _POW3[5 - i])
    ori[:, 6] = (-ori[:, :6].sum(axis=1)) % 3
    # Lehmer digits -> permutation of cubie ids 0..6
    avail = np.tile(np.arange(7), (n, 1))
    perm = np.zeros((n, 7), dtype=np.int64)
    rem = perm_code.copy()
    rows = np.arange(n)
    for i in range(7):
        digit, rem = np.divmod(rem, _FACT[6 - i])
        perm[:, i] = avail[rows, digit]
        keep = np.ones_like(avail, dtype=bool)
        keep[rows, digit] = False
        avail = avail[keep].reshape(n, 6 - i)
    colors = np.array(CUBIE_COLORS, dtype=np.uint8)[perm]  # (n, 7, 3), U/D color first
    place = (np.arange(3) - ori[..., None]) % 3
    placed = np.take_along_axis(colors, place, axis=2)
    out = np.tile(_SOLVED_ARR, (n, 1))
    out[:, _FREE.reshape(-1)] = placed.reshape(n, 21)
    return out


def unrank(i: int) -> CubeState:
    return CubeState(unrank_batch(np.array([i]))[0].tobytes())


def is_valid(s: CubeState) -> bool:
    """Full reachability check: 24 stickers, 8 distinct corners, twist sum 0 mod 3."""
    if len(s.stickers) != NUM_STICKERS:
        return False
    arr = s.array()
    if arr.max() >= NUM_COLORS or (np.bincount(arr, minlength=NUM_COLORS) != 4).any():
        return False
    tri = arr[CORNER_SLOTS].astype(np.int64)
    if ((1 << tri).sum(axis=1) == _FIXED_MASK).sum() != 1:
        return False
    canon = canonicalize_batch(arr[None])
    cubie, ori = _corner_coords(canon)
    return bool((cubie >= 0).all() and len(set(cubie[0].tolist())) == 7 and ori.sum() % 3 == 0)


# --- observations ---------------------------------------------------------

_ONE_HOT_OFFSETS = np.arange(NUM_STICKERS) * NUM_COLORS


def encode_batch(arr: np.ndarray) -> np.ndarray:
    arr = np.asarray(arr)
    out = np.zeros((len(arr), OBS_SIZE))
    np.put_along_axis(out, _ONE_HOT_OFFSETS + arr.astype(np.intp), 1.0, axis=1)
    return out


def encode(s: CubeState) -> np.ndarray:
    return encode_batch(s.array()[None])[0]


def snap_batch(logits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    logits = np.asarray(logits)
    if logits.ndim != 2 or logits.shape[1] != OBS_SIZE:
        raise ValueError(f"expected logits of shape (N, {OBS_SIZE}), got {logits.shape}")
    arr = logits.reshape(len(logits), NUM_STICKERS, NUM_COLORS).argmax(axis=2).astype(np.uint8)
    counts = (arr[:, :, None] == np.arange(NUM_COLORS)).sum(axis=1)
    return arr, (counts == 4).all(axis=1)


def snap(logits) -> tuple[CubeState, bool]:
    """Per-sticker argmax of a 144-vector of logits (ties go to the lowest color)."""
    logits = np.asarray(logits, dtype=float)
    if logits.shape != (OBS_SIZE,):
        raise ValueError(f"expected {OBS_SIZE} logits, got shape {logits.shape}")
    arr, valid = snap_batch(logits[None])
    return CubeState(arr[0].tobytes()), bool(valid[0])


# --- batch helpers --------------------------------------------------------

def apply_move_batch(arr: np.ndarray, moves) -> np.ndarray:
    """Apply one move per row (``moves`` scalar or length-N)."""
    arr = np.asarray(arr)
    perms = MOVE_PERMS[np.broadcast_to(np.asarray(moves), (len(arr),))]
    return np.take_along_axis(arr, perms, axis=1)


def is_solved_batch(arr: np.ndarray) -> np.ndarray:
    faces = np.asarray(arr).reshape(-1, 6, 4)
    return (faces == faces[:, :, :1]).all(axis=(1, 2))


def successors_batch(arr: np.ndarray) -> np.ndarray:
    """All 12 successors of each row, shape ``(N, 12, 24)``."""
    return np.asarray(arr)[:, MOVE_PERMS]


def scramble(depth: int, rng: np.random.Generator) -> tuple[CubeState, list[Move]]:
    """Random walk from solved that never turns the same face twice in a row."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    s = solved()
    moves: list[Move] = []
    prev_face = -1
    for _ in range(depth):
        if prev_face < 0:
            m = MOVES[int(rng.integers(12))]
        else:
            k = int(rng.integers(10))
            # skip the two moves on the previous face
            m = MOVES[k if k < 2 * prev_face else k + 2]
        s = apply_move(s, m)
        moves.append(m)
        prev_face = m.face
    return s, moves
