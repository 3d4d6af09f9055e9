"""Simple symmetric random walk on Z^d with reproducible, splittable streams.

Direction convention: index ``i`` in ``1..d`` steps along ``+e_i`` and index
``d + j`` steps along ``-e_j``.  Internally directions are stored 0-based as
``int8`` arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

# Every stream is drawn in blocks of this many steps, so a walk of horizon n
# is an exact prefix of the same stream at any longer horizon.
BLOCK = 4096

MIN_DIMENSION = 3
UINT64_MAX = 2**64 - 1


class ConfigurationError(ValueError):
    """Invalid walk or experiment configuration."""


class LatticePoint(tuple):
    """Point of Z^d.  Equality and hashing are those of the coordinate tuple."""

    __slots__ = ()

    def __new__(cls, coords: Iterable[int]):
        return super().__new__(cls, (int(c) for c in coords))

    @property
    def dim(self) -> int:
        return len(self)

    @classmethod
    def origin(cls, d: int) -> "LatticePoint":
        return cls((0,) * d)

    @classmethod
    def unit(cls, d: int, index: int) -> "LatticePoint":
        """Unit vector ``e_index`` for ``index`` in 1..2d (``e_{d+j} = -e_j``)."""
        if not 1 <= index <= 2 * d:
            raise ValueError(f"direction index must be in 1..{2 * d}, got {index}")
        coords = [0] * d
        if index <= d:
            coords[index - 1] = 1
        else:
            coords[index - d - 1] = -1
        return cls(coords)

    def shift(self, other: Sequence[int]) -> "LatticePoint":
        if len(other) != len(self):
            raise ValueError("dimension mismatch")
        return LatticePoint(a + b for a, b in zip(self, other))

    def l1(self) -> int:
        return sum(abs(c) for c in self)

    def __repr__(self) -> str:
        return f"LatticePoint({tuple(self)!r})"


def unit_sphere(d: int) -> list[LatticePoint]:
    """The 2d lattice points at Euclidean distance 1 from the origin, in direction order."""
    return [LatticePoint.unit(d, i) for i in range(1, 2 * d + 1)]


@dataclass(frozen=True)
class WalkConfig:
    dimension: int
    horizon: int
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if int(self.dimension) != self.dimension or self.dimension < MIN_DIMENSION:
            raise ConfigurationError(f"dimension must be an integer >= 3, got {self.dimension}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigurationError(f"horizon must be a positive integer, got {self.horizon}")
        for name in ("seed", "stream_id"):
            value = getattr(self, name)
            if int(value) != value or not 0 <= value <= UINT64_MAX:
                raise ConfigurationError(f"{name} must be an unsigned 64-bit integer, got {value}")


@dataclass(frozen=True)
class StepEvent:
    time: int
    position: LatticePoint
    direction_index: int


def stream_generator(seed: int, stream_id: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by ``(seed, stream_id)``.

    Streams with different ids are spawned children of the same seed sequence,
    so replications can be sharded across processes without coordination.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))


def direction_blocks(config: WalkConfig) -> Iterator[np.ndarray]:
    """Yield the 0-based direction indices of the walk, block by block.

    The final block is truncated so exactly ``config.horizon`` steps are produced.
    """
    rng = stream_generator(config.seed, config.stream_id)
    two_d = 2 * config.dimension
    remaining = config.horizon
    while remaining > 0:
        block = rng.integers(0, two_d, size=BLOCK, dtype=np.int8)
        if remaining < BLOCK:
            block = block[:remaining]
        remaining -= block.size
        yield block


def walk_directions(config: WalkConfig) -> np.ndarray:
    """All 0-based direction indices of the walk as one ``int8`` array."""
    return np.concatenate(list(direction_blocks(config)))


def positions_from_directions(directions: np.ndarray, d: int,
                              start: Sequence[int] | None = None) -> np.ndarray:
    """Positions ``S_1..S_n`` (shape ``(n, d)``, int64) reached by the given steps."""
    directions = np.asarray(directions)
    steps = np.zeros((directions.size, d), dtype=np.int64)
    rows = np.arange(directions.size)
    plus = directions < d
    steps[rows[plus], directions[plus]] = 1
    steps[rows[~plus], directions[~plus] - d] = -1
    out = np.cumsum(steps, axis=0)
    if start is not None:
        out += np.asarray(start, dtype=np.int64)
    return out


def generate_walk(config: WalkConfig) -> Iterator[StepEvent]:
    """Stream the walk one :class:`StepEvent` at a time (``S_0`` = origin is implicit)."""
    d = config.dimension
    pos = np.zeros(d, dtype=np.int64)
    t = 0
    for block in direction_blocks(config):
        for k in block.tolist():
            if k < d:
                pos[k] += 1
            else:
                pos[k - d] -= 1
            t += 1
            yield StepEvent(t, LatticePoint(pos.tolist()), k + 1)


def direction_of_step(prev: Sequence[int], new: Sequence[int]) -> int:
    """1-based direction index of a unit step, or raise if the points are not adjacent."""
    d = len(prev)
    diff = [b - a for a, b in zip(prev, new)]
    moved = [i for i, v in enumerate(diff) if v != 0]
    if len(moved) != 1 or abs(diff[moved[0]]) != 1:
        raise ValueError(f"{tuple(new)} is not a lattice neighbour of {tuple(prev)}")
    i = moved[0]
    return i + 1 if diff[i] > 0 else d + i + 1


def hit_time_of_path(directions: np.ndarray, d: int, target_set: Iterable[Sequence[int]],
                     cap: int) -> int | None:
    """First ``i >= 1`` with ``S_i`` in the target set and ``i <= cap``; ``None`` if not hit."""
    targets = np.array([tuple(t) for t in target_set], dtype=np.int64).reshape(-1, d)
    if targets.shape[0] == 0:
        raise ValueError("target set must be nonempty")
    directions = np.asarray(directions)[:cap]
    start = np.zeros(d, dtype=np.int64)
    for lo in range(0, directions.size, BLOCK):
        pos = positions_from_directions(directions[lo:lo + BLOCK], d, start)
        hit = (pos[:, None, :] == targets[None, :, :]).all(axis=2).any(axis=1)
        if hit.any():
            return lo + int(np.argmax(hit)) + 1
        start = pos[-1]
    return None


def first_hit_time(config: WalkConfig, target_set: Sequence[Sequence[int]],
                   cap: int | None = None) -> int | None:
    """First hitting time ``T_A`` of the target set, or ``None`` when not hit by ``cap``."""
    if not target_set:
        raise ValueError("target set must be nonempty")
    cap = config.horizon if cap is None else cap
    if cap > config.horizon:
        raise ConfigurationError("cap may not exceed the walk horizon")
    d = config.dimension
    targets = [tuple(t) for t in target_set]
    if any(len(t) != d for t in targets):
        raise ValueError("target dimension does not match the walk")
    capped = WalkConfig(d, cap, config.seed, config.stream_id)
    return hit_time_of_path(walk_directions(capped), d, targets, cap)
