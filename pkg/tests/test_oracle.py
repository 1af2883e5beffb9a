import numpy as np
import pytest

from nodelambda import cube, oracle
from nodelambda.cube import CubeState, Move

from conftest import dfs_histogram, random_states

# quarter-turn distance distribution of the 2x2x2 modulo whole-cube rotations
QTM_HISTOGRAM = [1, 6, 27, 120, 534, 2256, 8969, 33058, 114149, 360508, 930588, 1350852, 782536, 90280, 276]


def test_histogram_matches_dfs(table):
    assert dfs_histogram(5).tolist() == table.histogram()[:6].tolist()


def test_full_table(table):
    hist = table.histogram()
    assert hist.sum() == cube.NUM_STATES == 5040 * 729
    assert table.max_distance == 14
    assert hist.tolist() == QTM_HISTOGRAM
    assert (table.distances != 255).all()


def test_basic_distances(table):
    assert table.distance(cube.solved()) == 0
    assert oracle.optimal_distance(table, cube.solved()) == 0
    for m in cube.MOVES:
        assert table.distance(cube.apply_move(cube.solved(), m)) == 1


def test_rotation_invariant(table, rng):
    arr = random_states(200, rng)
    rotated = np.take_along_axis(arr, cube.ROTATIONS[rng.integers(24, size=200)], axis=1)
    assert (table.distance_batch(arr) == table.distance_batch(rotated)).all()


def test_lipschitz(table, rng):
    arr = cube.unrank_batch(rng.integers(cube.NUM_STATES, size=100_000))
    nxt = cube.apply_move_batch(arr, rng.integers(12, size=len(arr)))
    d0 = table.distance_batch(arr).astype(int)
    d1 = table.distance_batch(nxt).astype(int)
    assert np.abs(d0 - d1).max() <= 1


def test_descent_completeness(table, rng):
    arr = cube.unrank_batch(rng.integers(1, cube.NUM_STATES, size=100_000))
    d = table.distance_batch(arr).astype(int)
    succ = cube.successors_batch(arr).reshape(-1, 24)
    ds = table.distance_batch(succ).reshape(-1, 12).astype(int)
    assert (d > 0).all()
    assert (ds.min(axis=1) == d - 1).all()


def test_scramble_inverse_symmetry(table, rng):
    for _ in range(100):
        s, moves = cube.scramble(int(rng.integers(1, 15)), rng)
        back = cube.apply_moves(cube.solved(), [cube.inverse(m) for m in reversed(moves)])
        assert table.distance(s) == table.distance(back)


def test_optimal_move_and_solve(table, rng):
    s = cube.apply_move(cube.solved(), Move.F)
    assert oracle.optimal_move(table, s) is Move.F_PRIME
    for _ in range(100):
        s, _ = cube.scramble(int(rng.integers(1, 15)), rng)
        d = table.distance(s)
        path = oracle.solve(table, s)
        assert len(path) == d
        assert cube.is_solved(cube.apply_moves(s, path))
        if d:
            m = oracle.optimal_move(table, s)
            lower = [k for k in cube.MOVES if table.distance(cube.apply_move(s, k)) == d - 1]
            assert m is lower[0]
    with pytest.raises(ValueError):
        oracle.optimal_move(table, cube.solved())


def test_save_load(table, tmp_path):
    path = tmp_path / "oracle.bin"
    table.save(path)
    raw = path.read_bytes()
    assert raw[:4] == b"NLOR"
    assert len(raw) == 4 + 4 + cube.NUM_STATES + 8
    assert int.from_bytes(raw[-8:], "little") == int(table.distances.sum())
    again = oracle.DistanceTable.load(path)
    assert (again.distances == table.distances).all()

    bad = bytearray(raw)
    bad[100] ^= 1
    path.write_bytes(bytes(bad))
    with pytest.raises(ValueError, match="checksum"):
        oracle.DistanceTable.load(path)
    bad = bytearray(raw)
    bad[4] = 9
    path.write_bytes(bytes(bad))
    with pytest.raises(ValueError, match="version"):
        oracle.DistanceTable.load(path)
    path.write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError):
        oracle.DistanceTable.load(path)


def test_unbuilt_table_raises():
    t = oracle.DistanceTable(np.full(cube.NUM_STATES, 255, dtype=np.uint8), built=False)
    with pytest.raises(RuntimeError):
        t.distance(cube.solved())
