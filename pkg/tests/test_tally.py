import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from walklab import tally
from walklab.lattice import StepEvent, WalkConfig, unit_sphere, walk_directions
from walklab.tally import TallyBoard

walks = st.tuples(st.integers(3, 5), st.integers(1, 3000), st.integers(0, 2**32))


def board_and_dirs(d, n, seed, **kw):
    dirs = walk_directions(WalkConfig(d, n, seed))
    return TallyBoard(d, expected_sites=16, **kw).ingest_directions(dirs), dirs


@given(walks)
@settings(max_examples=40, deadline=None)
def test_local_times_match_brute_force(w):
    board, dirs = board_and_dirs(*w)
    ref = oracles.local_times(dirs, w[0])
    got = {tuple(s): int(c) for s, c in zip(board.sites.tolist(), board.site_counts)}
    assert got == dict(ref)
    assert board.site_counts.sum() == w[1]
    assert board.n_sites == len(ref)
    assert board.local_time((10**6,) + (0,) * (w[0] - 1)) == 0


@given(walks)
@settings(max_examples=40, deadline=None)
def test_new_point_counters_match_definitions(w):
    board, dirs = board_and_dirs(*w)
    npc = board.new_point_counters()
    assert (npc.zeta, npc.nu) == oracles.new_point_counts(dirs, w[0])


@given(st.tuples(st.integers(3, 4), st.integers(1, 600), st.integers(0, 2**32)))
@settings(max_examples=25, deadline=None)
def test_max_occupation_over_translates_matches_brute_force(w):
    d = w[0]
    board, dirs = board_and_dirs(*w)
    ref = oracles.local_times(dirs, d)
    sphere = unit_sphere(d)
    assert board.max_occupation_over_translates(sphere) == oracles.max_translate(ref, sphere, d)
    pair = [(0,) * d, (1,) + (0,) * (d - 1)]
    assert board.max_occupation_over_translates(pair) == oracles.max_translate(ref, pair, d)


@given(walks)
@settings(max_examples=30, deadline=None)
def test_neighbour_and_sphere_tables(w):
    d = w[0]
    board, dirs = board_and_dirs(*w)
    ref = oracles.local_times(dirs, d)
    nbr = board.neighbour_counts()
    es = oracles.units(d)
    for row, site in zip(nbr, board.sites.tolist()):
        assert row.tolist() == [ref.get(oracles.add(tuple(site), e), 0) for e in es]
    unvisited = {oracles.add(s, e) for s in ref for e in es} - set(ref)
    want = sorted(oracles.sphere_occupation(ref, z, d) for z in unvisited)
    assert sorted(board.unvisited_sphere_occupations().tolist()) == want
    z = tuple(board.sites[0].tolist())
    assert board.sphere_occupation(z) == oracles.sphere_occupation(ref, z, d)


@given(walks)
@settings(max_examples=30, deadline=None)
def test_level_counts_conserve_steps(w):
    board, _ = board_and_dirs(*w)
    lc = board.level_counts()
    assert lc.weighted_total() == w[1]
    assert sum(lc.q.values()) == board.n_sites


def test_cap_board_level_counts_and_eta():
    d, n, cap = 3, 2000, 8000
    dirs = walk_directions(WalkConfig(d, cap, 3))
    short = TallyBoard(d).ingest_directions(dirs[:n])
    long = short.copy().ingest_directions(dirs[n:])
    assert short.steps_consumed == n and long.steps_consumed == cap
    full = oracles.local_times(dirs, d)
    early = oracles.local_times(dirs[:n], d)
    lc = short.level_counts(long)
    expected_u = {}
    for z in early:
        expected_u[full[z]] = expected_u.get(full[z], 0) + 1
    assert lc.u == expected_u
    assert short.eta_statistic(long) == max(full[z] for z in early)
    with pytest.raises(ValueError):
        long.eta_statistic(short)


def test_occupation_time_of_shifted_shape():
    board, dirs = board_and_dirs(3, 500, 21)
    ref = oracles.local_times(dirs, 3)
    shape = [(0, 0, 0), (1, 0, 0), (0, 1, 0)]
    shift = (1, -1, 2)
    assert board.occupation_time(shape, shift) == sum(ref.get(oracles.add(a, shift), 0) for a in shape)


def test_event_ingestion_matches_bulk_and_validates():
    cfg = WalkConfig(3, 300, seed=2)
    from walklab.lattice import generate_walk
    stepwise = TallyBoard(3)
    for ev in generate_walk(cfg):
        stepwise.ingest(ev)
    bulk = TallyBoard.from_walk(cfg)
    assert stepwise.to_dict() == bulk.to_dict()
    with pytest.raises(ValueError):
        stepwise.ingest(StepEvent(5, (0, 0, 0), 1))
    with pytest.raises(ValueError):
        stepwise.ingest(StepEvent(301, (99, 99, 99), 1))
    with pytest.raises(ValueError):
        TallyBoard(3).ingest_directions(np.array([6], dtype=np.int8))


def test_ingest_path_explicit():
    board = TallyBoard(3).ingest_path([(1, 0, 0), (0, 0, 0), (1, 0, 0), (1, 1, 0)])
    assert board.local_time((1, 0, 0)) == 2
    assert board.local_time((0, 0, 0)) == 1
    assert board.visit_order[0] == (1, (1, 0, 0))
    assert board.new_point_counters().zeta == 2  # S_1 and S_4


def test_untracked_board_refuses_counters():
    board = TallyBoard.from_walk(WalkConfig(3, 100, 0), track_new_points=False)
    with pytest.raises(RuntimeError):
        board.new_point_counters()


def test_growth_across_many_sites():
    board = TallyBoard.from_walk(WalkConfig(3, 200_000, 8), expected_sites=16)
    ref = TallyBoard.from_walk(WalkConfig(3, 200_000, 8))
    assert board.n_sites == ref.n_sites
    assert np.array_equal(board.site_counts, ref.site_counts)


def test_json_round_trip():
    board = TallyBoard.from_walk(WalkConfig(4, 3000, 5))
    text = board.to_json()
    back = TallyBoard.from_json(text)
    assert back.to_dict() == board.to_dict()
    assert back.local_time(tuple(board.sites[7].tolist())) == board.site_counts[7]
    doc = json.loads(text)
    assert doc["schema"] == "walklab.board/1"
    doc["sites"][0]["count"] += 1
    with pytest.raises(ValueError):
        TallyBoard.from_dict(doc)
    with pytest.raises(ValueError):
        TallyBoard.from_dict({**doc, "schema": "other"})


def test_summary_merge_is_associative_reduction():
    boards = [TallyBoard.from_walk(WalkConfig(3, 4000, 1, r)) for r in range(4)]
    summaries = [b.summary() for b in boards]
    left = summaries[0].merge(summaries[1]).merge(summaries[2].merge(summaries[3]))
    right = summaries[0]
    for s in summaries[1:]:
        right = right.merge(s)
    assert left == right
    assert left.steps == 16000
    assert left.levels.weighted_total() == 16000
    assert left.zeta == sum(b.new_point_counters().zeta for b in boards)
    assert left.max_local_time == max(b.max_local_time() for b in boards)


def test_functional_aliases():
    board = TallyBoard.from_walk(WalkConfig(3, 500, 0))
    assert tally.level_counts(board) == board.level_counts()
    assert tally.new_point_counters(board) == board.new_point_counters()
    assert tally.occupation_time(board, [(0, 0, 0)]) == board.local_time((0, 0, 0))
    assert tally.max_occupation_over_translates(board, [(0, 0, 0)]) == board.max_local_time()
