"""Local times, occupation times, level counts and new-point counters of one walk."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _sitetable as st
from .lattice import (LatticePoint, StepEvent, WalkConfig, direction_blocks,
                      direction_of_step, unit_sphere)

SNAPSHOT_SCHEMA = "walklab.board/1"


@dataclass
class NewPointCounters:
    zeta: int  # Upsilon-new points, Upsilon = {0, e_1}
    nu: int  # Gamma-new points, Gamma = e_1 + S(1)


@dataclass
class LevelCounts:
    """Histograms over visited sites.

    ``q[k]`` counts sites with local time exactly ``k`` at the analysis
    horizon; ``u[k]`` counts sites visited by the analysis horizon whose
    local time at the cap horizon is ``k`` (empty when no cap board was given).
    """

    q: dict[int, int]
    u: dict[int, int] = field(default_factory=dict)

    def merge(self, other: "LevelCounts") -> "LevelCounts":
        q = dict(self.q)
        for k, v in other.q.items():
            q[k] = q.get(k, 0) + v
        u = dict(self.u)
        for k, v in other.u.items():
            u[k] = u.get(k, 0) + v
        return LevelCounts(dict(sorted(q.items())), dict(sorted(u.items())))

    def weighted_total(self) -> int:
        return sum(k * v for k, v in self.q.items())


def _histogram(values: np.ndarray) -> dict[int, int]:
    if values.size == 0:
        return {}
    h = np.bincount(values)
    nz = np.flatnonzero(h)
    return {int(k): int(h[k]) for k in nz if k > 0}


class TallyBoard:
    """Per-walk accounting of local times on Z^d.

    Local times count visits at times ``1..n``; the starting point ``S_0`` is
    not counted.  Sites are stored once, in first-visit order, so
    ``visit_order`` is the list of ``(first visit time, site)`` pairs.
    """

    def __init__(self, dimension: int, *, track_new_points: bool = True,
                 expected_sites: int = 1024):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension
        self.track_new_points = track_new_points
        n = max(16, int(expected_sites))
        self._slots = np.full(_pow2_at_least(int(n / st.MAX_LOAD) + 1), st.EMPTY, dtype=np.int64)
        self._keys = np.empty((n, dimension), dtype=np.int64)
        self._counts = np.empty(n, dtype=np.int64)
        self._first = np.empty(n, dtype=np.int64)
        self._state = np.zeros(4, dtype=np.int64)
        self._pos = np.zeros(dimension, dtype=np.int64)

    # -- ingestion -----------------------------------------------------------

    @property
    def steps_consumed(self) -> int:
        return int(self._state[1])

    @property
    def n_sites(self) -> int:
        return int(self._state[0])

    @property
    def position(self) -> LatticePoint:
        return LatticePoint(self._pos.tolist())

    def _grow(self):
        n_entries = self.n_sites
        if n_entries >= self._keys.shape[0]:
            cap = 2 * self._keys.shape[0]
            keys = np.empty((cap, self.dimension), dtype=np.int64)
            keys[:n_entries] = self._keys[:n_entries]
            counts = np.empty(cap, dtype=np.int64)
            counts[:n_entries] = self._counts[:n_entries]
            first = np.empty(cap, dtype=np.int64)
            first[:n_entries] = self._first[:n_entries]
            self._keys, self._counts, self._first = keys, counts, first
        if n_entries >= int(self._slots.size * st.MAX_LOAD):
            slots = np.full(2 * self._slots.size, st.EMPTY, dtype=np.int64)
            st.rehash(slots, self._keys, n_entries, self.dimension)
            self._slots = slots

    def ingest_directions(self, directions: np.ndarray) -> "TallyBoard":
        """Continue the walk by the given 0-based direction indices."""
        dirs = np.ascontiguousarray(directions, dtype=np.int8)
        if dirs.size and (dirs.min() < 0 or dirs.max() >= 2 * self.dimension):
            raise ValueError("direction index out of range")
        i = 0
        while i < dirs.size:
            i = st.ingest(dirs, i, self.dimension, self._pos, self._slots, self._keys,
                          self._counts, self._first, self._state, self.track_new_points)
            if i < dirs.size:
                self._grow()
        return self

    def ingest(self, event: StepEvent) -> "TallyBoard":
        """Consume one step event; events must arrive in time order from adjacent sites."""
        if event.time != self.steps_consumed + 1:
            raise ValueError(
                f"out-of-order event: expected time {self.steps_consumed + 1}, got {event.time}")
        j = direction_of_step(self._pos.tolist(), event.position)
        return self.ingest_directions(np.array([j - 1], dtype=np.int8))

    def ingest_path(self, positions: Iterable[Sequence[int]]) -> "TallyBoard":
        """Consume the positions ``S_{t+1}, S_{t+2}, ...`` of an explicit nearest-neighbour path."""
        prev = self._pos.tolist()
        dirs = []
        for p in positions:
            dirs.append(direction_of_step(prev, p) - 1)
            prev = list(p)
        return self.ingest_directions(np.array(dirs, dtype=np.int8))

    @classmethod
    def from_walk(cls, config: WalkConfig, **kwargs) -> "TallyBoard":
        kwargs.setdefault("expected_sites", min(config.horizon, 1 << 22))
        board = cls(config.dimension, **kwargs)
        for block in direction_blocks(config):
            board.ingest_directions(block)
        return board

    def copy(self) -> "TallyBoard":
        other = object.__new__(TallyBoard)
        other.dimension = self.dimension
        other.track_new_points = self.track_new_points
        for name in ("_slots", "_keys", "_counts", "_first", "_state", "_pos"):
            setattr(other, name, getattr(self, name).copy())
        return other

    # -- raw views -------------------------------------------------------------

    @property
    def sites(self) -> np.ndarray:
        """Coordinates of visited sites, shape ``(n_sites, d)``, in first-visit order."""
        return self._keys[:self.n_sites]

    @property
    def site_counts(self) -> np.ndarray:
        return self._counts[:self.n_sites]

    @property
    def first_visits(self) -> np.ndarray:
        return self._first[:self.n_sites]

    @property
    def visit_order(self) -> list[tuple[int, LatticePoint]]:
        return [(int(t), LatticePoint(c)) for t, c in zip(self.first_visits, self.sites.tolist())]

    # -- statistics ------------------------------------------------------------

    def local_time(self, z: Sequence[int]) -> int:
        vec = np.asarray(z, dtype=np.int64)
        if vec.shape != (self.dimension,):
            raise ValueError("dimension mismatch")
        return int(st.lookup_count(self._slots, self._keys, self._counts, vec, self.dimension))

    def local_times(self, points: np.ndarray) -> np.ndarray:
        pts = np.ascontiguousarray(points, dtype=np.int64).reshape(-1, self.dimension)
        return st.lookup_many(self._slots, self._keys, self._counts, pts, self.dimension)

    def max_local_time(self) -> int:
        return int(self.site_counts.max()) if self.n_sites else 0

    def occupation_time(self, shape: Iterable[Sequence[int]], shift: Sequence[int] | None = None) -> int:
        """Summed local time over ``shape + shift``."""
        pts = np.array([tuple(a) for a in shape], dtype=np.int64).reshape(-1, self.dimension)
        if shift is not None:
            pts = pts + np.asarray(shift, dtype=np.int64)
        return int(self.local_times(pts).sum())

    def sphere_occupation(self, z: Sequence[int]) -> int:
        """Occupation time of the unit sphere centred at ``z``."""
        return self.occupation_time(unit_sphere(self.dimension), z)

    def max_occupation_over_translates(self, shape: Iterable[Sequence[int]]) -> int:
        """Maximum over all translates ``shape + u`` of the occupation time.

        Only translates meeting the visited set can be nonzero, so the search
        runs over ``u = site - a`` for visited sites and points ``a`` of the shape.
        """
        pts = np.array([tuple(a) for a in shape], dtype=np.int64).reshape(-1, self.dimension)
        if pts.shape[0] == 0:
            return 0
        return int(st.max_translate_occupation(self._slots, self._keys, self._counts,
                                               self.n_sites, pts, self.dimension))

    def level_counts(self, cap_board: "TallyBoard | None" = None) -> LevelCounts:
        q = _histogram(self.site_counts)
        u: dict[int, int] = {}
        if cap_board is not None:
            _check_cap(self, cap_board)
            u = _histogram(cap_board.local_times(self.sites))
        return LevelCounts(q, u)

    def eta_statistic(self, cap_board: "TallyBoard") -> int:
        """Largest cap-horizon local time among sites visited by this board's horizon."""
        _check_cap(self, cap_board)
        if self.n_sites == 0:
            return 0
        return int(cap_board.local_times(self.sites).max())

    def new_point_counters(self) -> NewPointCounters:
        if not self.track_new_points:
            raise RuntimeError("board was created with track_new_points=False")
        return NewPointCounters(int(self._state[2]), int(self._state[3]))

    def neighbour_counts(self) -> np.ndarray:
        """``out[e, j]``: local time at ``sites[e] + e_{j+1}``, directions ordered as in the lattice module."""
        return st.neighbour_counts(self._slots, self._keys, self._counts, self.n_sites, self.dimension)

    def unvisited_sphere_occupations(self) -> np.ndarray:
        """Sphere occupation of each unvisited site adjacent to the path (each site once)."""
        return st.unvisited_sphere_occupation(self._slots, self._keys, self._counts,
                                              self.n_sites, self.dimension)

    def summary(self) -> "BoardSummary":
        counters = self.new_point_counters() if self.track_new_points else None
        return BoardSummary(
            steps=self.steps_consumed,
            levels=self.level_counts(),
            max_local_time=self.max_local_time(),
            max_sphere_occupation=self.max_occupation_over_translates(unit_sphere(self.dimension)),
            zeta=None if counters is None else counters.zeta,
            nu=None if counters is None else counters.nu,
        )

    # -- serialisation ---------------------------------------------------------

    def to_dict(self) -> dict:
        data = {
            "schema": SNAPSHOT_SCHEMA,
            "dimension": self.dimension,
            "steps": self.steps_consumed,
            "position": self._pos.tolist(),
            "track_new_points": self.track_new_points,
            "sites": [
                {"coords": c, "count": int(k), "first_visit": int(t)}
                for c, k, t in zip(self.sites.tolist(), self.site_counts, self.first_visits)
            ],
        }
        if self.track_new_points:
            data["zeta"] = int(self._state[2])
            data["nu"] = int(self._state[3])
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "TallyBoard":
        if data.get("schema") != SNAPSHOT_SCHEMA:
            raise ValueError(f"unsupported snapshot schema {data.get('schema')!r}")
        sites = data["sites"]
        board = cls(data["dimension"], track_new_points=data["track_new_points"],
                    expected_sites=max(len(sites), 16))
        n = len(sites)
        if n:
            board._keys[:n] = np.array([s["coords"] for s in sites], dtype=np.int64)
            board._counts[:n] = [s["count"] for s in sites]
            board._first[:n] = [s["first_visit"] for s in sites]
        board._state[:] = [n, data["steps"], data.get("zeta", 0), data.get("nu", 0)]
        board._pos[:] = data["position"]
        st.rehash(board._slots, board._keys, n, board.dimension)
        if int(board.site_counts.sum()) != board.steps_consumed:
            raise ValueError("snapshot local times do not sum to the step count")
        return board

    @classmethod
    def from_json(cls, text: str) -> "TallyBoard":
        return cls.from_dict(json.loads(text))


@dataclass
class BoardSummary:
    """Mergeable per-stream summary: histograms add, maxima take the max."""

    steps: int
    levels: LevelCounts
    max_local_time: int
    max_sphere_occupation: int
    zeta: int | None = None
    nu: int | None = None

    def merge(self, other: "BoardSummary") -> "BoardSummary":
        def add(a, b):
            return None if a is None or b is None else a + b
        return BoardSummary(
            steps=self.steps + other.steps,
            levels=self.levels.merge(other.levels),
            max_local_time=max(self.max_local_time, other.max_local_time),
            max_sphere_occupation=max(self.max_sphere_occupation, other.max_sphere_occupation),
            zeta=add(self.zeta, other.zeta),
            nu=add(self.nu, other.nu),
        )


def _check_cap(board: TallyBoard, cap_board: TallyBoard):
    if cap_board.dimension != board.dimension:
        raise ValueError("dimension mismatch between boards")
    if cap_board.steps_consumed < board.steps_consumed:
        raise ValueError("cap horizon is shorter than the analysis horizon")


def _pow2_at_least(n: int) -> int:
    p = 16
    while p < n:
        p *= 2
    return p


# Functional aliases matching the operation names used elsewhere.

def ingest(board: TallyBoard, event: StepEvent) -> TallyBoard:
    return board.ingest(event)


def occupation_time(board: TallyBoard, shape, shift=None) -> int:
    return board.occupation_time(shape, shift)


def max_occupation_over_translates(board: TallyBoard, shape) -> int:
    return board.max_occupation_over_translates(shape)


def level_counts(board: TallyBoard, cap_board: TallyBoard | None = None) -> LevelCounts:
    return board.level_counts(cap_board)


def eta_statistic(board: TallyBoard, cap_board: TallyBoard) -> int:
    return board.eta_statistic(cap_board)


def new_point_counters(board: TallyBoard) -> NewPointCounters:
    return board.new_point_counters()
