import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nodelambda import cube
from nodelambda.cube import Color, CubeState, Move

from conftest import random_states

moves_st = st.lists(st.sampled_from(cube.MOVES), max_size=40)


def state_of(moves):
    return cube.apply_moves(cube.solved(), moves)


def test_solved_layout():
    arr = cube.solved().array()
    assert list(arr[0:4]) == [Color.CU] * 4
    assert list(arr[4:8]) == [Color.CD] * 4
    for f in range(6):
        assert set(arr[4 * f : 4 * f + 4]) == {f}
    assert cube.is_solved(cube.solved())


def test_quarter_turn_changes_eight_stickers():
    s = cube.apply_move(cube.solved(), Move.U)
    diff = s.array() != cube.solved().array()
    assert diff.sum() == 8
    assert len(set(s.array()[0:4])) == 1
    assert not diff[0:4].any()


@pytest.mark.parametrize("m", cube.MOVES)
def test_every_move_changes_eight_stickers(m):
    assert (cube.apply_move(cube.solved(), m).array() != cube.solved().array()).sum() == 8


def test_inverse():
    assert cube.inverse(Move.U) is Move.U_PRIME
    assert cube.inverse(Move.R_PRIME) is Move.R
    for m in cube.MOVES:
        assert cube.inverse(cube.inverse(m)) is m
        assert cube.inverse(m).face == m.face and cube.inverse(m) is not m


def test_move_perms_are_permutations():
    for p in cube.MOVE_PERMS:
        assert sorted(p) == list(range(24))


def test_group_laws_on_many_states(rng):
    arr = random_states(1000, rng)
    for m in cube.MOVES:
        col = np.full(len(arr), int(m))
        once = cube.apply_move_batch(arr, col)
        back = cube.apply_move_batch(once, np.full(len(arr), int(cube.inverse(m))))
        assert (back == arr).all()
        four = arr
        for _ in range(4):
            four = cube.apply_move_batch(four, col)
        assert (four == arr).all()
        assert (np.sort(once, axis=1) == np.sort(arr, axis=1)).all()


@pytest.mark.parametrize("a,b", [(Move.U, Move.D), (Move.F, Move.B_PRIME), (Move.L, Move.R)])
def test_opposite_faces_commute(a, b, rng):
    arr = random_states(200, rng)
    ab = cube.apply_move_batch(cube.apply_move_batch(arr, int(a)), int(b))
    ba = cube.apply_move_batch(cube.apply_move_batch(arr, int(b)), int(a))
    assert (ab == ba).all()


def test_adjacent_faces_do_not_commute():
    s = cube.solved()
    fu = cube.apply_moves(s, [Move.F, Move.U])
    uf = cube.apply_moves(s, [Move.U, Move.F])
    assert fu != uf


@settings(max_examples=200, deadline=None)
@given(moves_st, st.sampled_from(cube.MOVES))
def test_round_trip_property(moves, m):
    s = state_of(moves)
    assert cube.apply_move(cube.apply_move(s, m), cube.inverse(m)) == s
    assert (np.bincount(s.array(), minlength=6) == 4).all()


def test_scalar_and_batch_moves_agree(rng):
    arr = random_states(50, rng)
    ms = rng.integers(12, size=50)
    batch = cube.apply_move_batch(arr, ms)
    for row, m, out in zip(arr, ms, batch):
        assert cube.apply_move(CubeState.from_bytes(row), Move(m)).array().tolist() == out.tolist()


def test_is_solved_accepts_whole_cube_rotations():
    # U D' turns the whole cube about the vertical axis
    s = cube.apply_moves(cube.solved(), [Move.U, Move.D_PRIME])
    assert s != cube.solved()
    assert cube.is_solved(s)
    assert not cube.is_solved(cube.apply_move(cube.solved(), Move.F))
    for r in cube.ROTATIONS:
        assert cube.is_solved(CubeState.from_bytes(cube.solved().array()[r]))


def test_is_solved_matches_oracle(table, rng):
    arr = random_states(10_000, rng, depth=int(rng.integers(0, 6)))
    arr = np.concatenate([arr, random_states(2000, rng, depth=2)])
    d = table.distance_batch(arr)
    assert ((d == 0) == cube.is_solved_batch(arr)).all()


def test_rotations_form_a_group():
    rots = {tuple(r) for r in cube.ROTATIONS}
    assert len(rots) == 24
    for a in cube.ROTATIONS[:6]:
        for b in cube.ROTATIONS:
            assert tuple(a[b]) in rots


def test_canonicalize(rng):
    assert cube.canonicalize(cube.solved()) == cube.solved()
    arr = random_states(500, rng)
    canon = cube.canonicalize_batch(arr)
    assert (cube.canonicalize_batch(canon) == canon).all()
    # every orientation of a state lands on the same representative
    rotated = np.take_along_axis(arr, cube.ROTATIONS[rng.integers(24, size=len(arr))], axis=1)
    assert (cube.canonicalize_batch(rotated) == canon).all()


def test_move_conjugation(rng):
    arr = random_states(100, rng)
    for r in range(24):
        rot = cube.ROTATIONS[r]
        for m in range(12):
            lhs = cube.apply_move_batch(arr, m)[:, rot]
            rhs = cube.apply_move_batch(arr[:, rot], int(cube.MOVE_CONJ[r, m]))
            assert (lhs == rhs).all()


def test_rank_unrank(rng):
    assert cube.rank(cube.solved()) == 0
    assert cube.unrank(0) == cube.solved()
    arr = cube.canonicalize_batch(random_states(10_000, rng))
    assert (cube.unrank_batch(cube.rank_batch(arr)) == arr).all()
    idx = rng.integers(cube.NUM_STATES, size=10_000)
    assert (cube.rank_batch(cube.unrank_batch(idx)) == idx).all()


def test_rank_rejects_non_canonical():
    s = cube.apply_moves(cube.solved(), [Move.U, Move.D_PRIME])
    with pytest.raises(ValueError):
        cube.rank(s)
    with pytest.raises(IndexError):
        cube.unrank(cube.NUM_STATES)
    with pytest.raises(IndexError):
        cube.unrank(-1)


def test_unrank_states_are_valid(rng):
    for i in rng.integers(cube.NUM_STATES, size=200):
        s = cube.unrank(int(i))
        assert cube.is_valid(s)
        assert cube.canonicalize(s) == s


def test_is_valid_rejects_bad_stickers():
    arr = cube.solved().array().copy()
    arr[0], arr[4] = arr[4], arr[0]  # colour counts still 4 each, but no real cubie
    assert not cube.is_valid(CubeState(bytes(arr)))
    with pytest.raises(ValueError):
        CubeState.from_bytes(arr)
    # a single twisted corner is not reachable
    s = cube.solved().array().copy()
    slot = cube.CORNER_SLOTS[0]
    s[slot] = s[np.roll(slot, 1)]
    assert not cube.is_valid(CubeState(bytes(s)))
    with pytest.raises(ValueError):
        CubeState.from_bytes(bytes(23))
    with pytest.raises(ValueError):
        CubeState.from_bytes(bytes([7] * 24))


def test_encode():
    x = cube.encode(cube.solved())
    assert x.shape == (144,)
    assert x.sum() == 24
    ones = np.flatnonzero(x)
    assert list(ones) == [6 * i + i // 4 for i in range(24)]


def test_encode_snap_round_trip(rng):
    arr = random_states(300, rng)
    x = cube.encode_batch(arr)
    assert (x.sum(axis=1) == 24).all()
    assert len({row.tobytes() for row in x}) == len({row.tobytes() for row in arr})
    snapped, valid = cube.snap_batch(x)
    assert (snapped == arr).all() and valid.all()
    noisy = x + rng.uniform(-0.4, 0.4, size=x.shape)
    snapped, valid = cube.snap_batch(noisy)
    assert (snapped == arr).all() and valid.all()


def test_snap_zeros_is_invalid():
    s, valid = cube.snap(np.zeros(144))
    assert s.array().tolist() == [0] * 24
    assert not valid
    with pytest.raises(ValueError):
        cube.snap(np.zeros(143))


def test_move_notation():
    assert str(Move.U_PRIME) == "U'"
    for m in cube.MOVES:
        assert Move.parse(m.notation) is m


def test_scramble(rng, table):
    s, moves = cube.scramble(0, rng)
    assert s == cube.solved() and moves == []
    for _ in range(50):
        s, moves = cube.scramble(1, rng)
        assert table.distance(s) == 1
    for k in range(2, 12):
        s, moves = cube.scramble(k, rng)
        assert len(moves) == k
        assert table.distance(s) <= k
        assert all(a.face != b.face for a, b in zip(moves, moves[1:]))
        assert cube.apply_moves(cube.solved(), moves) == s


def test_scramble_is_seeded():
    a = cube.scramble(10, np.random.default_rng(5))
    b = cube.scramble(10, np.random.default_rng(5))
    assert a == b


def test_successors_batch(rng):
    arr = random_states(5, rng)
    succ = cube.successors_batch(arr)
    assert succ.shape == (5, 12, 24)
    for m in range(12):
        assert (succ[:, m] == cube.apply_move_batch(arr, m)).all()
