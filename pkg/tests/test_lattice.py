import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from walklab.lattice import (
    BLOCK, ConfigurationError, LatticePoint, StepEvent, WalkConfig, direction_of_step,
    first_hit_time, generate_walk, hit_time_of_path, positions_from_directions,
    unit_sphere, walk_directions,
)

import oracles


def test_config_rejects_recurrent_dimensions():
    for d in (1, 2):
        with pytest.raises(ConfigurationError):
            WalkConfig(d, 10)


@pytest.mark.parametrize("bad", [dict(horizon=0), dict(seed=-1), dict(seed=2**64), dict(stream_id=-3)])
def test_config_rejects_bad_fields(bad):
    kw = dict(dimension=3, horizon=10) | bad
    with pytest.raises(ConfigurationError):
        WalkConfig(**kw)


def test_unit_vectors_and_sphere():
    assert LatticePoint.unit(3, 1) == (1, 0, 0)
    assert LatticePoint.unit(3, 5) == (0, -1, 0)
    with pytest.raises(ValueError):
        LatticePoint.unit(3, 7)
    sphere = unit_sphere(4)
    assert len(sphere) == 8 and all(p.l1() == 1 for p in sphere)
    assert LatticePoint.origin(3).shift((1, 2, 3)) == (1, 2, 3)


def test_same_seed_same_walk_and_streams_differ():
    a = walk_directions(WalkConfig(3, 5000, seed=11, stream_id=2))
    b = walk_directions(WalkConfig(3, 5000, seed=11, stream_id=2))
    c = walk_directions(WalkConfig(3, 5000, seed=11, stream_id=3))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


@given(st.integers(1, 3 * BLOCK), st.integers(0, 2**63), st.integers(3, 6))
@settings(max_examples=30, deadline=None)
def test_shorter_horizon_is_a_prefix(n, seed, d):
    long = walk_directions(WalkConfig(d, 3 * BLOCK + 7, seed))
    short = walk_directions(WalkConfig(d, n, seed))
    assert np.array_equal(short, long[:n])


def test_directions_are_uniform():
    dirs = walk_directions(WalkConfig(3, 600_000, seed=5))
    freq = np.bincount(dirs, minlength=6) / dirs.size
    assert np.all(np.abs(freq - 1 / 6) < 5 * np.sqrt(1 / 6 * 5 / 6 / dirs.size))


def test_positions_are_nearest_neighbour_steps():
    cfg = WalkConfig(4, 300, seed=9)
    pos = positions_from_directions(walk_directions(cfg), 4)
    steps = np.diff(np.vstack([np.zeros((1, 4), dtype=pos.dtype), pos]), axis=0)
    assert np.all(np.abs(steps).sum(axis=1) == 1)
    assert [tuple(p) for p in pos.tolist()] == oracles.path(walk_directions(cfg), 4)


def test_generate_walk_events():
    cfg = WalkConfig(3, 50, seed=1)
    events = list(generate_walk(cfg))
    assert [e.time for e in events] == list(range(1, 51))
    prev = (0, 0, 0)
    for e in events:
        assert isinstance(e, StepEvent)
        assert direction_of_step(prev, e.position) == e.direction_index
        prev = e.position


def test_direction_of_step():
    assert direction_of_step((0, 0, 0), (0, 0, 1)) == 3
    assert direction_of_step((0, 0, 0), (-1, 0, 0)) == 4
    with pytest.raises(ValueError):
        direction_of_step((0, 0, 0), (1, 1, 0))
    with pytest.raises(ValueError):
        direction_of_step((0, 0, 0), (0, 0, 0))


def test_first_hit_time_matches_path_scan():
    cfg = WalkConfig(3, 2000, seed=4)
    dirs = walk_directions(cfg)
    target = [(0, 0, 0)]
    assert first_hit_time(cfg, target) == oracles.first_return(dirs, 3, (0, 0, 0))
    assert hit_time_of_path(dirs, 3, [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)],
                            cap=2000) == 1


def test_first_hit_time_errors_and_miss():
    cfg = WalkConfig(3, 10, seed=0)
    with pytest.raises(ValueError):
        first_hit_time(cfg, [])
    with pytest.raises(ConfigurationError):
        first_hit_time(cfg, [(0, 0, 0)], cap=11)
    assert first_hit_time(cfg, [(100, 0, 0)]) is None
