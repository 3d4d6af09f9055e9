"""Replicated Monte Carlo experiments against the exact laws and limit constants.

Every experiment is a pure function of its :class:`ExperimentPlan`: replication
``r`` always uses stream ``(plan.seed, r)``, and per-replication results are
reduced in replication order whatever the number of worker processes.

Verdicts come in two classes.  Exact laws, identities and the finite-horizon
tolerance checks get ``pass``/``fail``.  Almost-sure limit statements that
cannot be settled at desk-scale horizons get ``diagnostic``, with the
declared band recorded alongside.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import _walkstats
from .constants import DimensionConstants, dimension_constants, truncation_bias_bound
from .distributions import PmfSpec, point_ball_bound, two_point_bound
from .lattice import BLOCK, ConfigurationError, WalkConfig, direction_blocks
from .rate_geometry import RateSetDescriptor, enumerate_scaled_lattice, rate_f, rate_g
from .tally import TallyBoard

REPORT_SCHEMA = "walklab.report/1"
ORIGIN_BATCH = 512
MIN_EXPECTED = 5.0
RATE_SLACK = 1e-9


@dataclass(frozen=True)
class ExperimentPlan:
    name: str
    dimension: int = 3
    horizon: int = 10**6
    cap: int | None = None
    replications: int = 20
    seed: int = 0
    epsilon: float = 0.5
    significance: float = 0.01
    rel_tol: float | None = None
    max_level: int = 4
    cell_total: int = 6
    checkpoints: tuple[int, ...] = ()
    workers: int = 1

    def __post_init__(self):
        WalkConfig(self.dimension, self.horizon, self.seed)
        if self.cap is None:
            object.__setattr__(self, "cap", 4 * self.horizon)
        if self.cap < self.horizon:
            raise ConfigurationError("cap must be at least the horizon")
        if self.replications < 1:
            raise ConfigurationError("replications must be at least 1")
        if not 0.0 < self.significance < 1.0:
            raise ConfigurationError("significance must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")
        if self.workers < 1:
            raise ConfigurationError("workers must be at least 1")
        if any(c < 1 or c > self.horizon for c in self.checkpoints):
            raise ConfigurationError("checkpoints must lie in 1..horizon")

    @property
    def constants(self) -> DimensionConstants:
        return dimension_constants(self.dimension)


@dataclass
class Estimate:
    label: str
    value: float
    stderr: float | None = None
    # "referenced" when a Reference with the same label exists, else "diagnostic"
    role: str = "diagnostic"


@dataclass
class Reference:
    label: str
    value: float
    provenance: str


@dataclass
class Verdict:
    label: str
    status: str  # "pass", "fail" or "diagnostic"
    detail: str = ""
    in_band: bool | None = None


@dataclass
class ExperimentReport:
    plan: ExperimentPlan
    estimates: list[Estimate] = field(default_factory=list)
    references: list[Reference] = field(default_factory=list)
    verdicts: list[Verdict] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    wall_time: float = 0.0

    def estimate(self, label: str) -> Estimate:
        for e in self.estimates:
            if e.label == label:
                return e
        raise KeyError(label)

    def reference(self, label: str) -> Reference:
        for r in self.references:
            if r.label == label:
                return r
        raise KeyError(label)

    def verdict(self, label: str) -> Verdict:
        for v in self.verdicts:
            if v.label == label:
                return v
        raise KeyError(label)

    @property
    def hard_failures(self) -> list[Verdict]:
        return [v for v in self.verdicts if v.status == "fail"]

    @property
    def passed(self) -> bool:
        return not self.hard_failures

    @property
    def status(self) -> str:
        """``fail`` if any hard verdict failed, ``pass`` if at least one passed, else ``diagnostic``."""
        if self.hard_failures:
            return "fail"
        if any(v.status == "pass" for v in self.verdicts):
            return "pass"
        return "diagnostic"

    def add(self, label: str, value: float, stderr: float | None = None,
            reference: float | None = None, provenance: str = ""):
        role = "diagnostic" if reference is None else "referenced"
        self.estimates.append(Estimate(label, float(value), None if stderr is None else float(stderr), role))
        if reference is not None:
            self.references.append(Reference(label, float(reference), provenance))

    def judge(self, label: str, ok: bool, detail: str = ""):
        self.verdicts.append(Verdict(label, "pass" if ok else "fail", detail, bool(ok)))

    def diagnose(self, label: str, in_band: bool, detail: str = ""):
        self.verdicts.append(Verdict(label, "diagnostic", detail, bool(in_band)))

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "schema": REPORT_SCHEMA,
            "plan": asdict(self.plan),
            "estimates": [asdict(e) for e in self.estimates],
            "references": [asdict(r) for r in self.references],
            "verdicts": [asdict(v) for v in self.verdicts],
            "warnings": list(self.warnings),
            "extra": self.extra,
            "status": self.status,
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time
        return out


# -- workers -------------------------------------------------------------------

def _map(fn, tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def _origin_batch(task):
    d, cap, seed, lo, hi = task
    width = -(-cap // BLOCK) * BLOCK
    dirs = np.empty((hi - lo, width), dtype=np.int8)
    for row, r in enumerate(range(lo, hi)):
        blocks = list(direction_blocks(WalkConfig(d, width, seed, r)))
        dirs[row] = np.concatenate(blocks)
    out = np.empty((hi - lo, len(_walkstats.FIELDS)), dtype=np.int64)
    _walkstats.origin_kernel(dirs[:, :cap], d, out)
    return out


def origin_statistics(d: int, cap: int, replications: int, seed: int,
                      workers: int = 1) -> dict[str, np.ndarray]:
    """Statistics of walks ``(seed, r)``, ``r < replications``, near the origin up to ``cap``.

    See :func:`walklab._walkstats.origin_kernel` for the fields.
    """
    WalkConfig(d, cap, seed)
    tasks = [(d, cap, seed, lo, min(lo + ORIGIN_BATCH, replications))
             for lo in range(0, replications, ORIGIN_BATCH)]
    mat = np.concatenate(_map(_origin_batch, tasks, workers))
    return {name: mat[:, i] for i, name in enumerate(_walkstats.FIELDS)}


def _board_for(d: int, horizon: int, seed: int, r: int, track_new: bool) -> TallyBoard:
    return TallyBoard.from_walk(WalkConfig(d, horizon, seed, r), track_new_points=track_new)


def _stderr(values) -> float:
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        return float("nan")
    return float(values.std(ddof=1) / math.sqrt(values.size))


def _binomial_stderr(p: float, n: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def _fmt(x: float) -> str:
    return f"{x:.6g}"


# -- exact laws ----------------------------------------------------------------

def _law_cells(law: PmfSpec, data: dict, cell_total: int):
    """Observed per-walk cell indices, the cell list and exact cell probabilities."""
    if law.kind == "geometric_site":
        cells = [(k,) for k in range(cell_total + 1)]
        obs = [(int(k),) for k in data["xi0"]]
        probs = [law.pmf(k) for (k,) in cells]
    elif law.kind == "ball_occupation":
        cells = [(j,) for j in range(1, cell_total + 2)]
        obs = [(int(j),) for j in data["Xi0"]]
        probs = [law.pmf(j) for (j,) in cells]
    elif law.kind == "joint_two_point":
        cells = [(k, m - k) for m in range(cell_total + 1) for k in range(m + 1)]
        obs = list(zip(data["xi0"].tolist(), data["xi_e1"].tolist()))
        probs = [law.pmf(k, l) for k, l in cells]
    else:
        cells = [(k, l) for l in range(cell_total + 1) for k in range(l + 1)]
        obs = list(zip(data["xi0"].tolist(), (data["Xi0"] - 1).tolist()))
        probs = [law.pmf(k, l) for k, l in cells]
    return cells, obs, probs


def _chi_square(counts: np.ndarray, probs: np.ndarray, total: int):
    """Pearson test over cells with expected count >= 5, the rest pooled with the remainder."""
    expected = probs * total
    keep = expected >= MIN_EXPECTED
    obs = list(counts[keep])
    exp = list(expected[keep])
    rest_obs = total - sum(obs)
    rest_exp = total - sum(exp)
    if rest_exp >= MIN_EXPECTED:
        obs.append(rest_obs)
        exp.append(rest_exp)
    elif obs:
        obs[-1] += rest_obs
        exp[-1] += rest_exp
    if len(obs) < 2:
        return float("nan"), 0, float("nan")
    stat, pval = stats.chisquare(obs, exp)
    return float(stat), len(obs) - 1, float(pval)


def run_distribution_check(plan: ExperimentPlan, law: PmfSpec | str,
                           data: dict[str, np.ndarray] | None = None) -> ExperimentReport:
    """Compare cap-horizon frequencies of walks from the origin with an exact law.

    Walks run for ``plan.cap`` steps as a surrogate for the infinite horizon;
    the horizon field of the plan is not used.  ``data`` may carry the output
    of :func:`origin_statistics` for this plan, to share one simulation
    between several laws.
    """
    start = time.perf_counter()
    c = plan.constants
    if isinstance(law, str):
        law = PmfSpec(law, c)
    report = ExperimentReport(plan)
    d, cap, n = plan.dimension, plan.cap, plan.replications
    bias = truncation_bias_bound(d, cap)
    report.extra["law"] = law.kind
    report.extra["truncation_bias_bound"] = bias
    if cap < 2 * (plan.cell_total + 1):
        report.warnings.append(
            f"cap={cap} is too small to reach cells of total {plan.cell_total}")
    if data is None:
        data = origin_statistics(d, cap, n, plan.seed, plan.workers)
    elif data["T0"].size != n:
        raise ConfigurationError("precomputed data does not match the plan's replications")
    degenerate = n < 2

    # escape frequency
    escaped = float(np.mean(data["T0"] == -1))
    se = _binomial_stderr(escaped, n)
    report.add("escape_frequency", escaped, se, c.gamma, "quadrature gamma")
    if not degenerate:
        band = 3 * se + bias
        report.judge("escape_frequency", abs(escaped - c.gamma) <= band,
                     f"|{_fmt(escaped)} - {_fmt(c.gamma)}| <= 3se + bias = {_fmt(band)}")

    # cells
    cells, obs, probs = _law_cells(law, data, plan.cell_total)
    index = {cell: i for i, cell in enumerate(cells)}
    counts = np.zeros(len(cells), dtype=np.int64)
    for o in obs:
        i = index.get(o)
        if i is not None:
            counts[i] += 1
    sites = {"geometric_site": 1, "joint_two_point": 2}.get(law.kind, 2 * d)
    for cell, cnt, prob in zip(cells, counts, probs):
        label = "P(" + ",".join(str(v) for v in cell) + ")"
        freq = cnt / n
        se = _binomial_stderr(prob, n)
        report.add(label, freq, se, prob, f"exact {law.kind} law")
        if not degenerate:
            band = 3 * se + sites * bias
            report.diagnose(label, abs(freq - prob) <= band, f"band {_fmt(band)}")
    if not degenerate:
        stat, dof, pval = _chi_square(counts, np.array(probs), n)
        report.extra["chi_square"] = {"statistic": stat, "dof": dof, "p_value": pval}
        report.judge("chi_square", pval >= plan.significance,
                     f"p = {_fmt(pval)} vs significance {plan.significance}")

    if law.kind == "joint_two_point":
        _two_point_extras(report, data, c, bias, degenerate)
    if law.kind == "joint_point_ball":
        _point_ball_extras(report, data, c, bias, degenerate)
    if degenerate:
        report.warnings.append("a single replication supports no verdicts")
    report.wall_time = time.perf_counter() - start
    return report


def _two_point_extras(report, data, c, bias, degenerate):
    n = data["T0"].size
    t0, t1 = data["T0"], data["Te1"]
    before_return = (t0 > 0) & ((t1 < 0) | (t0 < t1))
    before_hit = (t1 > 0) & ((t0 < 0) | (t1 < t0))
    q = float(before_return.mean())
    s = float(before_hit.mean())
    for label, v in (("P(T<T_e1)", q), ("P(T_e1<T)", s)):
        se = _binomial_stderr(v, n)
        report.add(label, v, se, c.alpha, "alpha from quadrature gamma")
        if not degenerate:
            band = 3 * se + bias
            report.judge(label, abs(v - c.alpha) <= band, f"band {_fmt(band)}")
    if not degenerate:
        diff_se = math.sqrt(max(q + s - (q - s) ** 2, 0.0) / n)
        report.add("P(T<T_e1)-P(T_e1<T)", q - s, diff_se, 0.0, "symmetry")
        report.judge("P(T<T_e1)-P(T_e1<T)", abs(q - s) <= 3 * diff_se,
                     f"band {_fmt(3 * diff_se)}")
        # finite-horizon bound holds cell by cell
        worst = -np.inf
        for m in range(1, 11):
            for k in range(m + 1):
                l = m - k
                freq = float(np.mean((data["xi0"] == k) & (data["xi_e1"] == l)))
                bound = two_point_bound(c, k, l)
                worst = max(worst, freq - bound - 3 * _binomial_stderr(bound, n) if bound < 1 else -1)
        report.add("two_point_bound_excess", worst)
        report.judge("two_point_bound_excess", worst <= 0,
                     "max over k+l<=10 of freq - bound - 3se")
        # monotone truncation of q(n), s(n), p(n)
        grid = _truncation_grid(data)
        q_n = [float(np.mean((t0 > 0) & (t0 < m) & ((t1 < 0) | (t0 < t1)))) for m in grid]
        s_n = [float(np.mean((t1 > 0) & (t1 < m) & ((t0 < 0) | (t1 < t0)))) for m in grid]
        r = data["R"]
        p_n = [float(np.mean((r > 0) & (r < m))) for m in grid]
        report.extra["truncation_profile"] = {"n": grid, "q": q_n, "s": s_n, "p": p_n}
        mono = all(np.all(np.diff(v) >= 0) for v in (q_n, s_n, p_n))
        below = (q_n[-1] <= c.alpha + 3 * _binomial_stderr(c.alpha, n)
                 and s_n[-1] <= c.alpha + 3 * _binomial_stderr(c.alpha, n)
                 and p_n[-1] <= c.p + 3 * _binomial_stderr(c.p, n))
        report.diagnose("truncation_monotone", mono and below,
                        "q(n), s(n), p(n) nondecreasing and below their limits")


def _point_ball_extras(report, data, c, bias, degenerate):
    n = data["T0"].size
    if degenerate:
        return
    worst = -np.inf
    for l in range(1, 11):
        for k in range(l + 1):
            freq = float(np.mean((data["xi_e1"] == k) & (data["Xi_e1"] == l)))
            bound = point_ball_bound(c, k, l)
            worst = max(worst, freq - bound - 3 * _binomial_stderr(min(bound, 1.0), n))
    report.add("point_ball_bound_excess", worst)
    report.judge("point_ball_bound_excess", worst <= 0,
                 "max over l<=10 of freq - bound - 3se")
    r = data["R"]
    p_hat = float(np.mean(r > 0))
    se = _binomial_stderr(p_hat, n)
    report.add("p", p_hat, se, c.p, "p = 1 - 1/(2d(1-gamma))")
    report.judge("p", abs(p_hat - c.p) <= 3 * se + 2 * c.d * bias,
                 f"band {_fmt(3 * se + 2 * c.d * bias)}")


def _truncation_grid(data) -> list[int]:
    cap = int(max(data["T0"].max(), data["Te1"].max(), data["R"].max(), 2))
    grid = sorted({int(v) for v in np.unique(np.geomspace(2, cap + 1, 12).astype(int))})
    return grid


# -- level counts and new points ----------------------------------------------

def _level_task(task):
    d, horizon, seed, r, max_level = task
    board = _board_for(d, horizon, seed, r, track_new=False)
    lc = board.level_counts()
    return {
        "q": [lc.q.get(k, 0) for k in range(1, max_level + 2)],
        "weighted": lc.weighted_total(),
        "sites": board.n_sites,
        "q_total": sum(lc.q.values()),
    }


def run_level_count_check(plan: ExperimentPlan) -> ExperimentReport:
    """Level counts ``Q(k, n) / n`` against ``gamma^2 (1 - gamma)^(k-1)``."""
    start = time.perf_counter()
    c = plan.constants
    rel_tol = 0.05 if plan.rel_tol is None else plan.rel_tol
    report = ExperimentReport(plan)
    n = plan.horizon
    tasks = [(plan.dimension, n, plan.seed, r, plan.max_level) for r in range(plan.replications)]
    results = _map(_level_task, tasks, plan.workers)
    q = np.array([res["q"] for res in results], dtype=float)
    report.judge("conservation", all(res["weighted"] == n for res in results),
                 "sum_k k Q(k,n) = n on every replication")
    report.judge("distinct_sites", all(res["sites"] == res["q_total"] for res in results),
                 "sum_k Q(k,n) = number of distinct sites")
    for k in range(1, plan.max_level + 1):
        vals = q[:, k - 1] / n
        ref = c.gamma**2 * (1 - c.gamma) ** (k - 1)
        label = f"Q({k},n)/n"
        report.add(label, vals.mean(), _stderr(vals), ref, "gamma^2 (1-gamma)^(k-1)")
        report.judge(label, abs(vals.mean() / ref - 1) <= rel_tol, f"relative tolerance {rel_tol}")
    for k in range(1, min(plan.max_level, 3) + 1):
        vals = q[:, k - 1] / q[:, k]
        label = f"Q({k},n)/Q({k + 1},n)"
        ref = 1 / (1 - c.gamma)
        report.add(label, vals.mean(), _stderr(vals), ref, "1/(1-gamma)")
        report.judge(label, abs(vals.mean() / ref - 1) <= 0.10, "relative tolerance 0.1")
    report.wall_time = time.perf_counter() - start
    return report


def _newpoint_task(task):
    d, horizon, seed, r = task
    board = _board_for(d, horizon, seed, r, track_new=True)
    npc = board.new_point_counters()
    return npc.zeta, npc.nu


def run_newpoint_check(plan: ExperimentPlan) -> ExperimentReport:
    """Densities of Upsilon-new and Gamma-new points against ``1 - 2 alpha`` and ``1 - p - 1/(2d)``."""
    start = time.perf_counter()
    c = plan.constants
    rel_tol = 0.01 if plan.rel_tol is None else plan.rel_tol
    report = ExperimentReport(plan)
    n = plan.horizon
    tasks = [(plan.dimension, n, plan.seed, r) for r in range(plan.replications)]
    results = np.array(_map(_newpoint_task, tasks, plan.workers), dtype=float)
    for label, col, ref, prov in (("zeta_n/n", 0, 1 - 2 * c.alpha, "1 - 2 alpha"),
                                  ("nu_n/n", 1, c.escape_sphere, "1 - p - 1/(2d)")):
        vals = results[:, col] / n
        report.add(label, vals.mean(), _stderr(vals), ref, prov)
        if n == 1:
            report.judge(label + " at n=1", bool(np.all(results[:, col] == 1)), "first point is new")
        else:
            report.judge(label, abs(vals.mean() / ref - 1) <= rel_tol, f"relative tolerance {rel_tol}")
    report.wall_time = time.perf_counter() - start
    return report


# -- containment and fill-in ---------------------------------------------------

def _pair_data(board: TallyBoard):
    """Neighbour pairs and (local time, sphere occupation) pairs over all relevant sites."""
    counts = board.site_counts.copy()
    nbr = board.neighbour_counts()
    sphere_visited = nbr.sum(axis=1)
    sphere_unvisited = board.unvisited_sphere_occupations()
    return counts, nbr, sphere_visited, sphere_unvisited


def _containment_task(task):
    d, horizon, cap, seed, r, eps = task
    c = dimension_constants(d)
    board = _board_for(d, horizon, seed, r, track_new=False)
    log_n = math.log(horizon)
    counts, nbr, sph_v, sph_u = _pair_data(board)
    # B: every (site, direction) with the site visited; pairs with an unvisited
    # first site are mirror images of these and B is symmetric.
    gk = np.repeat(counts, nbr.shape[1]).astype(float)
    gl = nbr.ravel().astype(float)
    g_vals = rate_g(c, gk, gl)
    # D: visited sites and their unvisited neighbours (local time 0)
    xk = np.concatenate([counts, np.zeros(sph_u.size, dtype=np.int64)]).astype(float)
    xl = np.concatenate([sph_v, sph_u]).astype(float)
    on_domain = xl >= xk
    f_vals = rate_f(c, xk[on_domain], xl[on_domain])
    limit = (1 + eps) * log_n * (1 + RATE_SLACK)
    bad_b = g_vals > limit
    bad_d = f_vals > limit
    out = {
        "max_rate_B": float(g_vals.max()) / log_n,
        "max_rate_D": float(f_vals.max()) / log_n,
        "violations_B": int(bad_b.sum()),
        "violations_D": int(bad_d.sum()),
        "off_domain_D": int((~on_domain).sum()),
        "examples": [],
        "max_local_time": int(counts.max()),
        "max_sphere": int(max(sph_v.max(), sph_u.max() if sph_u.size else 0)),
        "eta": None,
    }
    for idx in np.flatnonzero(bad_b)[:5]:
        out["examples"].append(["B", int(gk[idx]), int(gl[idx])])
    pairs_d = np.stack([xk[on_domain], xl[on_domain]], axis=1)
    for idx in np.flatnonzero(bad_d)[:5]:
        out["examples"].append(["D", int(pairs_d[idx, 0]), int(pairs_d[idx, 1])])
    if cap > horizon:
        extended = board.copy()
        cfg = WalkConfig(d, cap, seed, r)
        done = 0
        for block in direction_blocks(cfg):
            lo = max(0, horizon - done)
            if lo < block.size:
                extended.ingest_directions(block[lo:])
            done += block.size
        out["eta"] = board.eta_statistic(extended)
    return out


def run_containment_check(plan: ExperimentPlan) -> ExperimentReport:
    """Observed joint values inside ``(1 + eps) log n`` times B and D.

    The underlying statements are almost-sure limits, so every verdict here
    is diagnostic.
    """
    start = time.perf_counter()
    c = plan.constants
    eps = plan.epsilon
    report = ExperimentReport(plan)
    n = plan.horizon
    if n < 3:
        raise ConfigurationError("containment needs horizon >= 3 (log n must be positive)")
    log_n = math.log(n)
    tasks = [(plan.dimension, n, plan.cap, plan.seed, r, eps) for r in range(plan.replications)]
    res = _map(_containment_task, tasks, plan.workers)
    for which in ("B", "D"):
        worst = max(x[f"max_rate_{which}"] for x in res)
        viol = sum(x[f"violations_{which}"] for x in res)
        report.add(f"max_rate_{which}", worst, None, 1 + eps, "containment level 1+eps")
        report.add(f"violations_{which}", viol)
        report.diagnose(f"containment_{which}", viol == 0,
                        f"{viol} pairs outside ((1+eps) log n){which}; max rate/log n = {_fmt(worst)}")
    report.add("off_domain_D", sum(x["off_domain_D"] for x in res))
    report.extra["violation_examples"] = [e for x in res for e in x["examples"]][:20]

    xi = np.array([x["max_local_time"] for x in res]) / log_n
    report.add("xi(n)/log n", xi.mean(), _stderr(xi), c.lam, "lambda")
    report.diagnose("xi(n)/log n", bool(xi.max() <= (1 + eps) * c.lam),
                    f"band [0, {_fmt((1 + eps) * c.lam)}]")
    big = np.array([x["max_sphere"] for x in res]) / log_n
    report.add("Xi*(S(1),n)/log n", big.mean(), _stderr(big), c.kappa, "kappa")
    report.diagnose("Xi*(S(1),n)/log n", bool(big.min() >= 1 and big.max() <= 1.6 * c.kappa),
                    f"band [1, {_fmt(1.6 * c.kappa)}]")
    if plan.cap > n:
        eta = np.array([x["eta"] for x in res]) / log_n
        report.add("eta(n)/log n", eta.mean(), _stderr(eta), c.lam, "lambda")
        report.diagnose("eta(n)/log n", bool(eta.min() >= 0.5 * c.lam and eta.max() <= 1.5 * c.lam),
                        f"band [{_fmt(0.5 * c.lam)}, {_fmt(1.5 * c.lam)}], cap {plan.cap}")
    report.wall_time = time.perf_counter() - start
    return report


def _realized(board: TallyBoard):
    """Realised pairs for the two fill-in statements, encoded as Python sets."""
    counts, nbr, sph_v, sph_u = _pair_data(board)
    # (xi(z), xi(z + e_1)) = (k + 1, l)
    real_b = set(zip((counts - 1).tolist(), nbr[:, 0].tolist()))
    # (xi(z), Xi(z)) = (k, l + 1)
    real_d = set(zip(counts.tolist(), (sph_v - 1).tolist()))
    real_d.update((0, int(v) - 1) for v in np.unique(sph_u) if v >= 1)
    return real_b, real_d


def _fillin_task(task):
    d, checkpoints, seed, r, eps = task
    horizon = checkpoints[-1]
    board = TallyBoard(d, track_new_points=False, expected_sites=min(horizon, 1 << 22))
    cfg = WalkConfig(d, horizon, seed, r)
    out = []
    done = 0
    targets = list(checkpoints)
    c = dimension_constants(d)
    for block in direction_blocks(cfg):
        i = 0
        while targets and done + (block.size - i) >= targets[0]:
            take = targets[0] - done
            board.ingest_directions(block[i:i + take])
            i += take
            done += take
            n_c = targets.pop(0)
            scale = (1 - eps) * math.log(n_c)
            real_b, real_d = _realized(board)
            row = {"n": n_c, "scale": scale}
            for which, real in (("B", real_b), ("D", real_d)):
                target = _enumerate_cached(c, which, scale) if scale > 0 else [(0, 0)]
                hit = sum(1 for pair in target if pair in real)
                row[which] = (hit, len(target))
                row[f"origin_{which}"] = (0, 0) in real
            out.append(row)
        if i < block.size:
            board.ingest_directions(block[i:])
            done += block.size - i
    return out


_ENUM_CACHE: dict = {}


def _enumerate_cached(c: DimensionConstants, which: str, scale: float):
    key = (c.d, which, round(scale, 12))
    if key not in _ENUM_CACHE:
        _ENUM_CACHE[key] = enumerate_scaled_lattice(RateSetDescriptor(which, c), scale)
    return _ENUM_CACHE[key]


def run_fillin_check(plan: ExperimentPlan) -> ExperimentReport:
    """Fraction of lattice pairs of ``((1 - eps) log n)`` B and D realised by some site.

    The same trajectory is examined at nested horizons (``plan.checkpoints``,
    default ``n/100, n/10, n``) to watch the fraction as the walk is extended.
    """
    start = time.perf_counter()
    eps = plan.epsilon
    if not 0 < eps < 1:
        raise ConfigurationError("fill-in needs epsilon in (0, 1)")
    report = ExperimentReport(plan)
    n = plan.horizon
    cps = sorted(set(plan.checkpoints) | {n}) if plan.checkpoints else \
        sorted({max(2, n // 100), max(2, n // 10), n})
    cps = [x for x in cps if x >= 2]
    tasks = [(plan.dimension, tuple(cps), plan.seed, r, eps) for r in range(plan.replications)]
    res = _map(_fillin_task, tasks, plan.workers)
    report.extra["checkpoints"] = cps
    for which in ("B", "D"):
        fractions = np.array([[row[which][0] / row[which][1] for row in rows] for rows in res])
        sizes = [res[0][i][which][1] for i in range(len(cps))]
        report.extra[f"enumerated_{which}"] = sizes
        for i, n_c in enumerate(cps):
            label = f"fill_{which}(n={n_c})"
            report.add(label, fractions[:, i].mean(), _stderr(fractions[:, i]))
        monotone = bool(np.all(np.diff(fractions, axis=1) >= 0))
        report.diagnose(f"monotone_{which}", monotone, "fraction nondecreasing along each trajectory")
        final = fractions[:, -1].mean()
        report.diagnose(f"fill_{which}", final >= 0.9, f"mean final fraction {_fmt(final)} vs 0.9")
        origin = all(row[f"origin_{which}"] for rows in res for row in rows)
        report.judge(f"origin_realized_{which}", origin, "(0,0) realised at every checkpoint")
    report.wall_time = time.perf_counter() - start
    return report


# -- serialisation -------------------------------------------------------------

SIG_DIGITS = 12
CSV_COLUMNS = ("experiment", "label", "value", "stderr", "reference", "provenance", "status", "detail")


def format_number(x) -> str:
    """Fixed 12-significant-digit rendering shared by CSV and JSON output."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG_DIGITS}g}"


def _rounded(obj):
    if isinstance(obj, dict):
        return {str(k): _rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_rounded(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return format_number(x)
        return float(format_number(x))
    return obj


def reports_to_json(reports: list[ExperimentReport]) -> str:
    """Deterministic JSON document for a list of reports (no timing fields)."""
    doc = {"schema": REPORT_SCHEMA, "reports": [r.to_dict() for r in reports]}
    return json.dumps(_rounded(doc), indent=2, sort_keys=False) + "\n"


def reports_to_csv(reports: list[ExperimentReport]) -> str:
    """One row per estimate, joined with its reference and verdict, then verdict-only rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        refs = {r.label: r for r in rep.references}
        verdicts = {v.label: v for v in rep.verdicts}
        seen = set()
        for e in rep.estimates:
            ref = refs.get(e.label)
            v = verdicts.get(e.label)
            if v is not None:
                seen.add(e.label)
            w.writerow([rep.plan.name, e.label, format_number(e.value), format_number(e.stderr),
                        format_number(ref.value) if ref else "", ref.provenance if ref else "",
                        v.status if v else e.role, v.detail if v else ""])
        for v in rep.verdicts:
            if v.label not in seen:
                w.writerow([rep.plan.name, v.label, "", "", "", "", v.status, v.detail])
    return buf.getvalue()
