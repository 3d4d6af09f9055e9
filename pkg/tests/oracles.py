"""Independent reference computations used only by the tests.

None of these share code with the package beyond the direction convention
(0-based index j < d means +e_{j+1}, j >= d means -e_{j-d+1}).
"""
import math
from collections import Counter

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn, gammaln


def watson_gamma_d3():
    """Escape probability for d=3 from the closed form of the Watson integral."""
    u = (math.sqrt(6) / (32 * math.pi**3)
         * gamma_fn(1 / 24) * gamma_fn(5 / 24) * gamma_fn(7 / 24) * gamma_fn(11 / 24))
    return 1.0 / u


def reduced_lattice_integral_gamma_d3():
    """Escape probability for d=3 from the lattice Green integral with one angle integrated out.

    G(0) = pi^-2 int int 3 / sqrt((3 - cos x - cos y)^2 - 1) over [0, pi]^2.
    The integrand is symmetric in x, y and behaves like 1/r at the origin, so
    it is integrated in polar coordinates over the triangle below the diagonal.
    """
    def integrand(r, theta):
        x, y = r * math.cos(theta), r * math.sin(theta)
        a_minus_1 = 2 * math.sin(x / 2) ** 2 + 2 * math.sin(y / 2) ** 2
        if a_minus_1 == 0.0:
            return 3.0  # a - 1 ~ r^2 / 2 near the origin
        return 3 * r / math.sqrt(a_minus_1 * (a_minus_1 + 2))

    g, _ = integrate.dblquad(integrand, 0, math.pi / 4, 0, lambda t: math.pi / math.cos(t),
                             epsabs=1e-13, epsrel=1e-13)
    return 1.0 / (2 * g / math.pi**2)


def return_series_gamma(d, n_terms=4000):
    """Escape probability as 1 / sum_n P(S_2n = 0), summing exact return probabilities.

    With h_n = P_d(S_2n = 0) / P_1(S_2n = 0), adding one coordinate gives
    h'_n = sum_m C(n, m)^2 k^(2(n-m)) / (k+1)^(2n) * h_{n-m}.  The tail past
    ``n_terms`` uses the local limit 2 (d / (4 pi n))^(d/2) and is only
    accurate for d >= 4.
    """
    n = np.arange(n_terms)
    h = np.ones(n_terms)
    log_fact = gammaln(np.arange(n_terms) + 1.0)
    for k in range(1, d):
        new = np.empty(n_terms)
        for nn in range(n_terms):
            m = np.arange(nn + 1)
            log_w = (2 * (log_fact[nn] - log_fact[m] - log_fact[nn - m])
                     + 2 * (nn - m) * math.log(k) - 2 * nn * math.log(k + 1))
            new[nn] = np.sum(np.exp(log_w) * h[nn - m])
        h = new
    p1 = np.exp(gammaln(2 * n + 1.0) - 2 * gammaln(n + 1.0) - 2 * n * math.log(2))
    head = float(np.sum(p1 * h))
    # Euler-Maclaurin for the tail of 2 (d/(4 pi))^(d/2) n^(-d/2) from n_terms on
    c = 2 * (d / (4 * math.pi)) ** (d / 2)
    s = d / 2
    big_n = n_terms
    tail = c * (big_n ** (1 - s) / (s - 1) + 0.5 * big_n ** (-s))
    return 1.0 / (head + tail)


def path(dirs, d):
    """Positions S_1..S_n as tuples."""
    steps = np.zeros((len(dirs), d), dtype=np.int64)
    idx = np.arange(len(dirs))
    dirs = np.asarray(dirs)
    plus = dirs < d
    steps[idx[plus], dirs[plus]] = 1
    steps[idx[~plus], dirs[~plus] - d] = -1
    return [tuple(p) for p in np.cumsum(steps, axis=0).tolist()]


def units(d):
    out = []
    for j in range(2 * d):
        e = [0] * d
        e[j % d] = 1 if j < d else -1
        out.append(tuple(e))
    return out


def add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def local_times(dirs, d):
    return Counter(path(dirs, d))


def sphere_occupation(counts, z, d):
    return sum(counts.get(add(z, e), 0) for e in units(d))


def max_translate(counts, shape, d):
    """Max over all translates touching the path of the occupation of ``shape``."""
    candidates = {tuple(x - y for x, y in zip(site, a)) for site in counts for a in shape}
    return max(sum(counts.get(add(z, a), 0) for a in shape) for z in candidates)


def new_point_counts(dirs, d):
    """(zeta, nu) straight from the definitions, by scanning the visited set."""
    pts = path(dirs, d)
    e1 = tuple([1] + [0] * (d - 1))
    gamma_shape = [add(e1, e) for e in units(d)]
    seen = set()
    zeta = nu = 0
    for p in pts:
        if p not in seen and add(p, e1) not in seen:
            zeta += 1
        if not any(add(p, a) in seen for a in gamma_shape):
            nu += 1
        seen.add(p)
    return zeta, nu


def first_return(dirs, d, target):
    for t, p in enumerate(path(dirs, d), start=1):
        if p == tuple(target):
            return t
    return None
