"""Exact laws of total local times at the origin, a neighbour and the unit sphere.

All four laws are parametrised by :class:`DimensionConstants`.  Binomial
weights switch to log-gamma evaluation beyond ``LOG_SPACE_FROM`` so that
``alpha**(k + l)`` does not underflow for large arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from scipy.special import gammaln

from .constants import DimensionConstants

LOG_SPACE_FROM = 40

Kind = Literal["geometric_site", "joint_two_point", "ball_occupation", "joint_point_ball"]
KINDS: tuple[str, ...] = ("geometric_site", "joint_two_point", "ball_occupation", "joint_point_ball")


def _binom_weight(n: int, k: int, log_a: float, a_exp: int, log_b: float, b_exp: int) -> float:
    """``C(n, k) * a**a_exp * b**b_exp`` given logs of ``a`` and ``b``."""
    if n <= LOG_SPACE_FROM:
        return math.comb(n, k) * math.exp(a_exp * log_a) * math.exp(b_exp * log_b) if n else 1.0
    lw = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
          + a_exp * log_a + b_exp * log_b)
    return math.exp(lw)


def _check_nonneg(**values):
    for name, v in values.items():
        if int(v) != v or v < 0:
            raise ValueError(f"{name} must be a nonnegative integer, got {v}")


def geometric_site_pmf(c: DimensionConstants, k: int) -> float:
    """``P(total local time at the origin = k) = gamma (1 - gamma)^k``."""
    _check_nonneg(k=k)
    return c.gamma * (1.0 - c.gamma) ** k


def joint_two_point_pmf(c: DimensionConstants, k: int, l: int) -> float:
    """Joint law of the total local times at the origin and at a neighbour."""
    _check_nonneg(k=k, l=l)
    return (1.0 - 2.0 * c.alpha) * two_point_bound(c, k, l)


def ball_occupation_pmf(c: DimensionConstants, j: int) -> float:
    """Law of the total occupation time of the unit sphere; support starts at 1."""
    if int(j) != j or j < 1:
        raise ValueError(f"sphere occupation is at least 1 (first step lands on it), got j={j}")
    r = c.p + 1.0 / (2 * c.d)
    return c.escape_sphere * r ** (j - 1)


def joint_point_ball_pmf(c: DimensionConstants, k: int, l: int) -> float:
    """``P(local time at 0 = k, sphere occupation = l + 1)`` for ``0 <= k <= l``."""
    _check_nonneg(k=k, l=l)
    if k > l:
        raise ValueError(f"local time at the centre ({k}) cannot exceed the excursion count ({l})")
    return c.escape_sphere * point_ball_bound(c, k, l)


def two_point_bound(c: DimensionConstants, k: int, l: int) -> float:
    """``C(k+l, k) alpha^(k+l)``: bounds the two-point probability at every finite horizon."""
    _check_nonneg(k=k, l=l)
    la = math.log(c.alpha)
    return _binom_weight(k + l, k, la, k, la, l)


def point_ball_bound(c: DimensionConstants, k: int, l: int) -> float:
    """``C(l, k) p^(l-k) (2d)^(-k)``: bounds the point/sphere probability at every finite horizon."""
    _check_nonneg(k=k, l=l)
    if k > l:
        return 0.0
    return _binom_weight(l, k, math.log(c.p), l - k, -math.log(2 * c.d), k)


def truncated_upper_bounds(c: DimensionConstants, k: int, l: int) -> tuple[float, float]:
    return two_point_bound(c, k, l), point_ball_bound(c, k, l)


@dataclass(frozen=True)
class PmfSpec:
    kind: str
    constants: DimensionConstants

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown law {self.kind!r}; expected one of {KINDS}")

    @property
    def bivariate(self) -> bool:
        return self.kind in ("joint_two_point", "joint_point_ball")

    def pmf(self, k: int, l: int | None = None) -> float:
        c = self.constants
        if self.kind == "geometric_site":
            return geometric_site_pmf(c, k)
        if self.kind == "ball_occupation":
            return ball_occupation_pmf(c, k)
        if l is None:
            raise ValueError(f"{self.kind} needs two arguments")
        if self.kind == "joint_two_point":
            return joint_two_point_pmf(c, k, l)
        return joint_point_ball_pmf(c, k, l)

    def table(self, max_index: int) -> list[tuple[int, int | None, float]]:
        """Support points with first coordinate (or total, for joint laws) up to ``max_index``."""
        rows: list[tuple[int, int | None, float]] = []
        if self.kind == "geometric_site":
            rows = [(k, None, self.pmf(k)) for k in range(max_index + 1)]
        elif self.kind == "ball_occupation":
            rows = [(j, None, self.pmf(j)) for j in range(1, max_index + 1)]
        elif self.kind == "joint_two_point":
            rows = [(k, m - k, self.pmf(k, m - k)) for m in range(max_index + 1) for k in range(m + 1)]
        else:
            rows = [(k, l, self.pmf(k, l)) for l in range(max_index + 1) for k in range(l + 1)]
        return rows

    def ratio(self) -> float:
        """Common ratio of the geometric decay of the mass at level ``m``."""
        c = self.constants
        if self.kind == "geometric_site":
            return 1.0 - c.gamma
        if self.kind == "joint_two_point":
            return 2.0 * c.alpha
        return c.p + 1.0 / (2 * c.d)

    def total_mass(self, tail_tolerance: float = 1e-12) -> tuple[float, float]:
        """Truncated sum of the law and a certified bound on the omitted tail.

        Mass is summed level by level (``k``, ``k + l`` or ``l``); the mass at
        level ``m`` is ``prefactor * r**m`` for the ratio ``r``, so the tail past
        level ``M`` is at most ``r**(M+1) / (1 - r)``.
        """
        r = self.ratio()
        levels = math.ceil(math.log(tail_tolerance * (1 - r)) / math.log(r))
        offset = 1 if self.kind == "ball_occupation" else 0
        total = math.fsum(p for *_, p in self.table(levels + offset))
        tail = r ** (levels + 1) / (1 - r)
        return total, tail
