"""Limit constants of the walk in dimension d, all derived from the escape probability.

The escape probability is ``1/G(0)`` where ``G(0)`` is the expected number of
visits to the origin (counting time 0).  Writing ``1/(1 - phi) = int e^{-t(1-phi)} dt``
and factorising the characteristic function gives the one-dimensional form

    G(0) = d * int_0^inf ive(0, s)**d ds,

with ``ive`` the exponentially scaled modified Bessel function.  The integrand
decays like ``s**(-d/2)``; the tail beyond ``SPLIT`` is mapped onto ``(0, 1]``
by ``s = SPLIT / u**2``, which leaves a bounded integrand for every ``d >= 3``.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .lattice import ConfigurationError

SPLIT = 64.0
DEFAULT_TOLERANCE = 1e-10


def _check_dimension(d: int):
    if int(d) != d or d < 3:
        raise ConfigurationError(f"the walk is recurrent for d < 3 (got d={d}); no escape probability")


def _bessel_power(s, d):
    return special.ive(0, s) ** d


def green_at_origin(d: int, tolerance: float = DEFAULT_TOLERANCE) -> tuple[float, float]:
    """``G(0)`` for the d-dimensional walk and an absolute error estimate."""
    _check_dimension(d)
    eps = min(tolerance, 1e-8) * 1e-3
    head, err_head = integrate.quad(_bessel_power, 0.0, SPLIT, args=(d,),
                                    epsabs=eps, epsrel=eps, limit=400)

    def tail(u):
        s = SPLIT / (u * u)
        return _bessel_power(s, d) * 2.0 * SPLIT / (u * u * u)

    rest, err_tail = integrate.quad(tail, 0.0, 1.0, epsabs=eps, epsrel=eps, limit=400)
    return d * (head + rest), d * (err_head + err_tail)


def compute_gamma(d: int, tolerance: float = DEFAULT_TOLERANCE) -> float:
    """Probability that the walk never returns to its start."""
    if tolerance < 1e-10:
        raise ValueError("tolerance below 1e-10 is not supported at double precision")
    g, err = green_at_origin(d, tolerance)
    # d(1/G) = dG / G^2
    if err / g**2 > tolerance:
        raise ArithmeticError(f"quadrature error {err / g**2:.2e} exceeds tolerance {tolerance:.0e}")
    return 1.0 / g


def gamma_error_bound(d: int, tolerance: float = DEFAULT_TOLERANCE) -> float:
    g, err = green_at_origin(d, tolerance)
    return err / g**2


@dataclass(frozen=True)
class DimensionConstants:
    d: int
    gamma: float
    alpha: float
    lam: float
    p: float
    kappa: float
    x0_B: float
    sum_max: float
    diff_max: float
    weight_C: float
    weight_A: float
    gamma_error: float = field(default=0.0, compare=False)

    @property
    def escape_sphere(self) -> float:
        """``1 - p - 1/(2d)``: probability that a walk started on the unit sphere never comes back to it."""
        return 1.0 - self.p - 1.0 / (2 * self.d)

    @property
    def x0_D(self) -> float:
        """Abscissa where the lower boundary of D leaves the diagonal."""
        return 1.0 / math.log(2 * self.d)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lam")
        return out


def derive_all(d: int, gamma: float, gamma_error: float = 0.0) -> DimensionConstants:
    """Every downstream constant from ``d`` and the escape probability."""
    _check_dimension(d)
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    alpha = (1.0 - gamma) / (2.0 - gamma)
    lam = -1.0 / math.log1p(-gamma)
    p = 1.0 - 1.0 / (2 * d * (1.0 - gamma))
    if p <= 0:
        raise ValueError(f"gamma={gamma} gives a nonpositive sphere return probability in d={d}")
    kappa = -1.0 / math.log(p + 1.0 / (2 * d))
    s = math.sqrt(1.0 - 4.0 * alpha * alpha)
    return DimensionConstants(
        d=d,
        gamma=gamma,
        alpha=alpha,
        lam=lam,
        p=p,
        kappa=kappa,
        x0_B=1.0 / math.log(1.0 / alpha),
        sum_max=1.0 / math.log(1.0 / (2.0 * alpha)),
        diff_max=1.0 / math.log((1.0 + s) / (2.0 * alpha)),
        weight_C=-1.0 / math.log(p / 2 + math.sqrt(p * p / 4 + 1.0 / (2 * d))),
        weight_A=d * p**2 + math.sqrt(d * d * p**4 + 2 * d * p**2),
        gamma_error=gamma_error,
    )


@lru_cache(maxsize=None)
def dimension_constants(d: int, tolerance: float = DEFAULT_TOLERANCE) -> DimensionConstants:
    """Cached :func:`derive_all` on the quadrature value of gamma."""
    g, err = green_at_origin(d, tolerance)
    return derive_all(d, 1.0 / g, gamma_error=err / g**2)


def truncation_bias_bound(d: int, cap: int) -> float:
    """Bound on ``P(cap < T < inf)`` for the first return time ``T``.

    Uses the local limit ``P(S_{2m} = 0) ~ 2 (d / (4 pi m))^{d/2}`` summed from
    ``cap`` on.  The first-return tail is asymptotically ``gamma**2`` times
    this sum, so dropping that factor leaves a margin for the pre-asymptotic range.
    """
    _check_dimension(d)
    if cap < 1:
        raise ValueError("cap must be positive")
    tail = (d / (2 * math.pi)) ** (d / 2) * cap ** (1 - d / 2) / (d / 2 - 1)
    return min(1.0, tail)


def gamma_n_profile(d: int, n_grid, replications: int, seed: int = 0,
                    workers: int = 1) -> list[tuple[int, float, float]]:
    """Monte Carlo ``gamma(n) = P(T >= n)`` with binomial standard errors.

    ``T >= 1`` trivially and ``T >= 2`` always (the first step leaves the
    origin), so ``gamma(1) = gamma(2) = 1`` exactly.
    """
    from .mc_lab import origin_statistics

    _check_dimension(d)
    if replications < 1:
        raise ValueError("replications must be positive")
    grid = sorted(int(n) for n in n_grid)
    if grid[0] < 1:
        raise ValueError("grid values must be positive")
    cap = max(grid[-1] - 1, 1)
    stats = origin_statistics(d, cap, replications, seed, workers=workers)
    t0 = stats["T0"]
    out = []
    for n in grid:
        # T0 == -1 encodes "no return by cap"; cap >= n - 1 so that is T >= n.
        survived = np.count_nonzero((t0 == -1) | (t0 >= n))
        est = survived / replications
        out.append((n, est, math.sqrt(max(est * (1 - est), 0.0) / replications)))
    return out
