import numpy as np
import pytest

from nodelambda import cube, oracle


@pytest.fixture(scope="session")
def table():
    return oracle.build()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_states(n, rng, depth=30):
    """Sticker arrays reached by ``depth`` uniformly random quarter turns."""
    arr = np.tile(cube.solved().array(), (n, 1))
    for _ in range(depth):
        arr = cube.apply_move_batch(arr, rng.integers(12, size=n))
    return arr


def check_trajectory(traj):
    """Chaining, reversibility and single-terminal invariants; returns the replayed end state."""
    ts = traj.transitions
    assert ts, "empty trajectory"
    for prev, nxt in zip(ts, ts[1:]):
        assert prev.s_next == nxt.s
    for i, t in enumerate(ts):
        assert t.s_next == cube.apply_move(t.s, t.a)
        assert cube.apply_move(t.s_next, cube.inverse(t.a)) == t.s
        assert t.is_done == cube.is_solved(t.s_next)
        assert not t.is_done or i == len(ts) - 1
    return cube.apply_moves(ts[0].s, [t.a for t in ts])


def dfs_histogram(limit):
    """Independent count: depth-limited DFS over raw sticker tuples, rotations
    quotiented by taking the lexicographic minimum over all 24 orientations."""
    perms = [list(p) for p in cube.MOVE_PERMS]
    rots = [list(r) for r in cube.ROTATIONS]
    best = {}

    def key(s):
        return min(tuple(s[i] for i in r) for r in rots)

    def visit(s, depth):
        k = key(s)
        if best.get(k, limit + 1) <= depth:
            return
        best[k] = depth
        if depth == limit:
            return
        for p in perms:
            visit([s[i] for i in p], depth + 1)

    visit(list(cube.solved().array()), 0)
    return np.bincount(list(best.values()), minlength=limit + 1)
