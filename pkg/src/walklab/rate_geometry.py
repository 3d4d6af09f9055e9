"""Rate functions g and f, their unit sublevel sets B and D, and boundary solvers.

``g(x, y)`` governs the joint local times of a pair of neighbours and
``f(x, y)`` the local time of a point together with the occupation time of
the unit sphere around it.  Both are 1-homogeneous and convex in ``y`` for
fixed ``x``, so for each ``x`` the set is an interval ``[y_low, y_high]``
found by bisection on the two monotone branches around the minimiser.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import xlogy

from .constants import DimensionConstants

# rounding guard for points exactly on the curve
MEMBERSHIP_SLACK = 1e-12
BOUNDARY_TOL = 1e-12
_MAX_BISECTIONS = 400


def _xlogx(v):
    return xlogy(v, v)


def rate_g(c: DimensionConstants, x, y):
    """Neighbour-pair rate function, with ``0 log 0 = 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("rate_g is defined for x, y >= 0")
    s = x + y
    out = -_xlogx(s) + _xlogx(x) + _xlogx(y) - s * math.log(c.alpha)
    return out[()] if out.ndim == 0 else out


def rate_f(c: DimensionConstants, x, y):
    """Point/sphere rate function on ``0 <= x <= y``, with ``0 log 0 = 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0):
        raise ValueError("rate_f is defined for x >= 0")
    if np.any(y < x):
        raise ValueError("rate_f is defined for y >= x")
    w = y - x
    out = (-_xlogx(y) + _xlogx(x) + _xlogx(w)
           + x * math.log(2 * c.d) - w * math.log(c.p))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundaryPoint:
    x: float
    y_low: float
    y_high: float


@dataclass(frozen=True)
class RateSetDescriptor:
    which: str
    constants: DimensionConstants

    def __post_init__(self):
        if self.which not in ("B", "D"):
            raise ValueError(f"set must be 'B' or 'D', got {self.which!r}")

    def rate(self, x, y):
        if self.which == "B":
            return rate_g(self.constants, x, y)
        return rate_f(self.constants, x, y)

    @property
    def x_max(self) -> float:
        return self.constants.lam

    @property
    def y_max(self) -> float:
        return self.constants.lam if self.which == "B" else self.constants.kappa

    def minimiser(self, x: float) -> float:
        """``argmin_y`` of the rate for fixed ``x``."""
        c = self.constants
        return x * (1.0 - c.gamma) if self.which == "B" else x / (1.0 - c.p)

    def y_floor(self, x: float) -> float:
        """Smallest admissible ``y`` at abscissa ``x``."""
        return 0.0 if self.which == "B" else x

    def lower_split(self) -> float:
        """Abscissa from which the lower boundary is a genuine second root."""
        return self.constants.x0_B if self.which == "B" else self.constants.x0_D


def _bisect(fun, lo: float, hi: float, tol: float) -> float:
    """Root of ``fun`` on ``[lo, hi]`` given a sign change; stops at ``|fun| <= tol``."""
    f_lo = fun(lo)
    if f_lo == 0:
        return lo
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = fun(mid)
        if abs(f_mid) <= tol:
            return mid
        if (f_mid > 0) == (f_lo > 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def solve_boundary(desc: RateSetDescriptor, x: float, tol: float = BOUNDARY_TOL) -> BoundaryPoint:
    """Interval ``[y_low, y_high]`` of the set at abscissa ``x``.

    ``y_high`` is the root above the minimiser.  ``y_low`` is the root below
    it when ``x`` is at least the lower split point, and otherwise the
    domain floor (0 for B, the diagonal for D).
    """
    x = float(x)
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x > desc.x_max * (1 + 1e-12):
        raise ValueError(f"x={x} exceeds x_max={desc.x_max}: the rate exceeds 1 for every y")
    x = min(x, desc.x_max)
    y_star = desc.minimiser(x)

    def excess(y):
        return float(desc.rate(x, y)) - 1.0

    if excess(y_star) >= -tol:
        return BoundaryPoint(x, y_star, y_star)
    y_top = desc.y_max * 1.05 + 1e-3
    y_high = _bisect(excess, y_star, y_top, tol)
    floor = desc.y_floor(x)
    if excess(floor) > 0:
        y_low = _bisect(excess, floor, y_star, tol)
    else:
        y_low = floor
    return BoundaryPoint(x, y_low, y_high)


def boundary_curve(desc: RateSetDescriptor, grid: int, tol: float = BOUNDARY_TOL) -> list[BoundaryPoint]:
    """Boundary on a uniform grid of ``grid`` abscissae spanning ``[0, x_max]``."""
    if grid < 2:
        raise ValueError("grid needs at least two points")
    return [solve_boundary(desc, x, tol) for x in np.linspace(0.0, desc.x_max, grid)]


def extremal_points(desc: RateSetDescriptor) -> list[tuple[str, float, float]]:
    """Closed-form points of the unit level curve, labelled."""
    c = desc.constants
    if desc.which == "B":
        y0 = 1.0 / math.log(1.0 / c.alpha)
        half = c.sum_max / 2.0
        s = math.sqrt(1.0 - 4.0 * c.alpha**2)
        return [
            ("x_axis", y0, 0.0),
            ("y_axis", 0.0, y0),
            ("x_max", c.lam, c.lam * (1.0 - c.gamma)),
            ("y_max", c.lam * (1.0 - c.gamma), c.lam),
            ("max_sum", half, half),
            ("max_difference", (1 + s) / (2 * s) * c.diff_max, (1 - s) / (2 * s) * c.diff_max),
        ]
    a = c.weight_A
    return [
        ("y_axis", 0.0, 1.0 / math.log(1.0 / c.p)),
        ("diagonal", c.x0_D, c.x0_D),
        ("y_max", c.kappa / (2 * c.d * c.p + 1), c.kappa),
        ("x_max", c.lam, c.lam / (1.0 - c.p)),
        ("max_weight", c.weight_C / (2 + a), c.weight_C * (1 + a) / (2 + a)),
    ]


def scaled_lattice_membership(desc: RateSetDescriptor, scale: float, k: int, l: int) -> bool:
    """Whether ``(k, l)`` lies in ``scale * set``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    if k < 0 or l < 0:
        return False
    if desc.which == "D" and l < k:
        return False
    return bool(desc.rate(k / scale, l / scale) <= 1.0 + MEMBERSHIP_SLACK)


def enumerate_scaled_lattice(desc: RateSetDescriptor, scale: float) -> list[tuple[int, int]]:
    """All integer pairs in ``scale * set``, ordered by ``k`` then ``l``."""
    if scale <= 0:
        raise ValueError("scale must be positive")
    if scale > 1e4:
        raise ValueError("scale above 1e4 makes the enumeration impractically large")
    out = []
    k_top = math.floor(scale * desc.x_max * (1 + 1e-12))
    for k in range(k_top + 1):
        x = min(k / scale, desc.x_max)
        bp = solve_boundary(desc, x)
        lo = max(0, math.ceil(scale * bp.y_low) - 1)
        hi = math.floor(scale * bp.y_high) + 1
        for l in range(lo, hi + 1):
            if scaled_lattice_membership(desc, scale, k, l):
                out.append((k, l))
    return out


def set_area(desc: RateSetDescriptor) -> float:
    def width(x):
        bp = solve_boundary(desc, x)
        return bp.y_high - bp.y_low

    pts = [desc.lower_split()]
    area, _ = integrate.quad(width, 0.0, desc.x_max, points=pts, limit=200, epsabs=1e-10)
    return area


def enclosing_area(desc: RateSetDescriptor) -> float:
    """Area of the square ``[0, lam]^2`` (for B) or the triangle-like region ``x <= y <= kappa`` (for D)."""
    c = desc.constants
    if desc.which == "B":
        return c.lam**2
    return c.kappa * c.lam - c.lam**2 / 2.0


def area_ratio(desc: RateSetDescriptor) -> float:
    """Fraction of the naive enclosing region actually covered by the set."""
    return set_area(desc) / enclosing_area(desc)
