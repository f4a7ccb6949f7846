"""Integration estimators: plain MC, Sobol QMC and the shaken-Sobol family.

``mca_mss_1`` shakes each Sobol point on a small sphere inside its
elementary interval.  ``mca_mss_2`` partitions the cube into ``m^d``
cells, shakes one Sobol point per cell and averages it with its mirror
image through the cell centre.  ``mca_mss_2s`` replaces the shaken point
by a uniform draw in the cell, which needs no containment checks.

Replication ``r`` of any randomized estimator always draws from
``stream.split(r)``; results therefore do not depend on ``threads``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .integrands import Integrand
from .prng import RandomStream, as_stream
from .shaking import (
    CellGrid,
    ShakeConfig,
    elementary_bits,
    elementary_cells,
    reflect,
    shake,
)
from .sobol import generate, min_pairwise_distance
from ._validation import check_int

METHODS = ("plain-mc", "qmc-sobol", "mss1", "mss2", "mss2s", "owen-qmc")
CELL_METHODS = ("mss2", "mss2s")
CSV_FIELDS = ("method", "n", "rho", "kappa", "estimate", "rel_err", "rmse", "time_s", "seed")


@dataclass
class EstimatorReport:
    method: str
    estimate: float
    n_evals: int
    replications: int
    rmse: float
    relative_error: Optional[float]
    wall_time: float
    seed: Optional[int] = None
    rho: Optional[float] = None
    kappa: Optional[float] = None
    referent: Optional[float] = None
    stderr: float = 0.0
    estimates: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    extras: dict = field(default_factory=dict)

    def to_row(self, timing: bool = True) -> dict:
        """One CSV row; ``rel_err`` is blank without a referent."""
        return {
            "method": self.method,
            "n": self.n_evals,
            "rho": _fmt(self.rho),
            "kappa": _fmt(self.kappa),
            "estimate": _fmt(self.estimate),
            "rel_err": _fmt(self.relative_error),
            "rmse": _fmt(self.rmse),
            "time_s": f"{self.wall_time:.6f}" if timing else "",
            "seed": "" if self.seed is None else str(self.seed),
        }

    def as_dict(self) -> dict:
        out = asdict(self)
        out["estimates"] = [float(v) for v in self.estimates]
        return out


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def summarize(
    method: str,
    estimates,
    n_evals: int,
    f: Integrand,
    wall_time: float,
    referent: Optional[float] = None,
    **config,
) -> EstimatorReport:
    """Replication mean, RMSE about the referent (spread about the mean if
    there is none) and relative error of the mean."""
    est = np.asarray(estimates, dtype=np.float64)
    ref = f.referent if referent is None else referent
    mean = float(est.mean())
    if ref is not None:
        rmse = float(np.sqrt(np.mean((est - ref) ** 2)))
        rel = abs(mean - ref) / abs(ref) if ref != 0 else abs(mean - ref)
    else:
        rmse = float(est.std())
        rel = None
    stderr = float(est.std(ddof=1) / math.sqrt(est.size)) if est.size > 1 else 0.0
    extras = config.pop("extras", {})
    return EstimatorReport(
        method=method,
        estimate=mean,
        n_evals=int(n_evals),
        replications=int(est.size),
        rmse=rmse,
        relative_error=rel,
        wall_time=wall_time,
        referent=ref,
        stderr=stderr,
        estimates=est,
        extras=extras,
        **config,
    )


def _replicate(one: Callable, stream: RandomStream, replications: int, threads: int):
    """Run ``one(stream.split(r))`` for each replication, in index order."""
    streams = [stream.split(r) for r in range(replications)]
    if threads > 1 and replications > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, streams))
    return [one(s) for s in streams]


def _merge_extras(results) -> dict:
    extras = {}
    for _, info in results:
        for key, value in info.items():
            extras[key] = extras.get(key, 0) + value
    return extras


def plain_mc(f: Integrand, n: int, stream=None, *, replications: int = 1, threads: int = 1) -> EstimatorReport:
    """Mean of ``f`` at ``n`` uniform points of the cube."""
    n = check_int(n, "n")
    replications = check_int(replications, "replications")
    stream = as_stream(stream)
    t0 = time.perf_counter()

    def one(s):
        return float(np.mean(f(s.uniform01((n, f.dimension))))), {}

    results = _replicate(one, stream, replications, threads)
    return summarize("plain-mc", [r[0] for r in results], n, f, time.perf_counter() - t0, seed=stream.seed)


def qmc_sobol(f: Integrand, n: int, *, skip_zero: bool = False, table=None) -> EstimatorReport:
    """Equal-weight average over the first ``n`` Sobol points."""
    n = check_int(n, "n")
    t0 = time.perf_counter()
    points = generate(f.dimension, n, skip_zero=skip_zero, table=table).points
    estimate = float(np.mean(f(points)))
    return summarize("qmc-sobol", [estimate], n, f, time.perf_counter() - t0)


def mca_mss_1(
    f: Integrand,
    n: int,
    cfg: ShakeConfig,
    stream=None,
    *,
    replications: int = 1,
    threads: int = 1,
    table=None,
) -> EstimatorReport:
    """Shaken Sobol points: each of the first ``n`` points moves to a uniform
    point on a sphere of radius rho kept inside its elementary interval."""
    n = check_int(n, "n")
    replications = check_int(replications, "replications")
    stream = as_stream(stream)
    t0 = time.perf_counter()
    points = generate(f.dimension, n, table=table).points
    rho, delta = cfg.resolve(points)
    lower, upper = elementary_cells(points, elementary_bits(n, f.dimension))

    def one(s):
        xi, redraws = shake(points, lower, upper, rho, s,
                            boundary_policy=cfg.boundary_policy, max_resamples=cfg.max_resamples)
        return float(np.mean(f(xi))), {"redraws": redraws}

    results = _replicate(one, stream, replications, threads)
    extras = _merge_extras(results)
    if delta is not None:
        extras["delta"] = delta
    return summarize("mss1", [r[0] for r in results], n, f, time.perf_counter() - t0,
                     seed=stream.seed, rho=rho, kappa=cfg.kappa, extras=extras)


def cell_base_points(d: int, m: int, table=None) -> tuple:
    """One Sobol point per cell of ``CellGrid(d, m)``.

    The first ``m^d`` Sobol points are bucketed by cell; an occupied cell
    keeps its earliest point.  Returns ``(grid, points, occupied)`` with
    ``points`` NaN in empty cells.
    """
    grid = CellGrid(d, m)
    sobol = generate(d, grid.n_cells, table=table).points
    cells, first = np.unique(grid.index_of(sobol), return_index=True)
    base = np.full((grid.n_cells, d), np.nan)
    base[cells] = sobol[first]
    occupied = np.zeros(grid.n_cells, dtype=bool)
    occupied[cells] = True
    return grid, base, occupied


def _symmetrized(f, grid, xi):
    centers = grid.centers()
    mirror = reflect(xi, centers)
    values = f(np.concatenate([xi, mirror]))
    return float(np.mean(values))


def mca_mss_2(
    f: Integrand,
    m: int,
    cfg: ShakeConfig,
    stream=None,
    *,
    replications: int = 1,
    threads: int = 1,
    table=None,
) -> EstimatorReport:
    """Symmetrised shaking over ``m^d`` cells (``2 m^d`` evaluations)."""
    m = check_int(m, "m")
    replications = check_int(replications, "replications")
    stream = as_stream(stream)
    d = f.dimension
    t0 = time.perf_counter()
    grid, base, occupied = cell_base_points(d, m, table)
    rho, delta = cfg.resolve(base[occupied])
    ids = np.flatnonzero(occupied)
    empty = np.flatnonzero(~occupied)
    lower, upper = grid.lower(ids), grid.upper(ids)
    e_lower = grid.lower(empty)

    def one(s):
        xi = np.empty((grid.n_cells, d))
        xi[ids], redraws = shake(base[ids], lower, upper, rho, s, cell_ids=ids,
                                 boundary_policy=cfg.boundary_policy, max_resamples=cfg.max_resamples)
        if empty.size:
            xi[empty] = e_lower + grid.width * s.uniform01((empty.size, d))
        return _symmetrized(f, grid, xi), {"redraws": redraws}

    results = _replicate(one, stream, replications, threads)
    extras = _merge_extras(results)
    extras["fallback_cells"] = int(empty.size)
    if delta is not None:
        extras["delta"] = delta
    return summarize("mss2", [r[0] for r in results], 2 * grid.n_cells, f, time.perf_counter() - t0,
                     seed=stream.seed, rho=rho, kappa=cfg.kappa, extras=extras)


def mca_mss_2s(f: Integrand, m: int, stream=None, *, replications: int = 1, threads: int = 1) -> EstimatorReport:
    """Stratified symmetrised sampling: a uniform point per cell plus its
    reflection through the cell centre."""
    m = check_int(m, "m")
    replications = check_int(replications, "replications")
    stream = as_stream(stream)
    d = f.dimension
    grid = CellGrid(d, m)
    t0 = time.perf_counter()
    lower = grid.lower(np.arange(grid.n_cells))

    def one(s):
        xi = lower + grid.width * s.uniform01((grid.n_cells, d))
        return _symmetrized(f, grid, xi), {}

    results = _replicate(one, stream, replications, threads)
    return summarize("mss2s", [r[0] for r in results], 2 * grid.n_cells, f,
                     time.perf_counter() - t0, seed=stream.seed)


def integrate(
    method: str,
    f: Integrand,
    n: int,
    *,
    cfg: Optional[ShakeConfig] = None,
    stream=None,
    replications: int = 1,
    threads: int = 1,
    scramble=None,
) -> EstimatorReport:
    """Dispatch on a method id; for ``mss2``/``mss2s`` ``n`` is the cells per axis."""
    if method == "plain-mc":
        return plain_mc(f, n, stream, replications=replications, threads=threads)
    if method == "qmc-sobol":
        return qmc_sobol(f, n)
    if method in ("mss1", "mss2"):
        if cfg is None:
            raise ValueError(f"{method} needs a ShakeConfig (rho or kappa)")
        fn = mca_mss_1 if method == "mss1" else mca_mss_2
        return fn(f, n, cfg, stream, replications=replications, threads=threads)
    if method == "mss2s":
        return mca_mss_2s(f, n, stream, replications=replications, threads=threads)
    if method == "owen-qmc":
        from .scramble import ScrambleSpec, owen_qmc

        if scramble is None:
            scramble = ScrambleSpec(seed=as_stream(stream).seed)
        return owen_qmc(f, n, scramble, replications)
    raise KeyError(f"unknown method {method!r}; choose from {METHODS}")


@dataclass
class ConvergenceReport:
    method: str
    rows: list
    slope: Optional[float]
    exact: bool = False

    def table_rows(self) -> list:
        return [r.to_row(timing=False) for r in self.rows]


def fit_slope(n, rmse) -> float:
    """Least-squares slope of log(rmse) against log(n)."""
    return float(np.polyfit(np.log(np.asarray(n, float)), np.log(np.asarray(rmse, float)), 1)[0])


def convergence_study(
    method: str,
    f: Integrand,
    budgets: Sequence[int],
    replications: int = 10,
    seed: Optional[int] = None,
    *,
    cfg: Optional[ShakeConfig] = None,
    threads: int = 1,
    scramble=None,
) -> ConvergenceReport:
    """Run ``method`` at each budget and fit the log-log RMSE slope.

    Budgets are point counts, except for ``mss2``/``mss2s`` where they are
    cells per axis; the fit always uses evaluation counts.  Each budget
    draws from its own child stream of ``seed``.
    """
    budgets = [int(b) for b in budgets]
    if len(set(budgets)) < 3:
        raise ValueError("a convergence study needs at least 3 distinct budgets")
    root = RandomStream(seed)
    rows = []
    for k, b in enumerate(budgets):
        rows.append(integrate(method, f, b, cfg=cfg, stream=root.split(k),
                              replications=replications, threads=threads, scramble=scramble))
    rmse = np.array([r.rmse for r in rows])
    if np.all(rmse == 0.0):
        return ConvergenceReport(method, rows, None, exact=True)
    keep = rmse > 0.0
    n_evals = np.array([r.n_evals for r in rows])
    slope = fit_slope(n_evals[keep], rmse[keep])
    return ConvergenceReport(method, rows, slope)


class _IntegratorBase(BaseEstimator):
    """``fit(f)`` integrates ``f`` and stores ``estimate_`` and ``report_``."""

    def fit(self, f: Integrand, y=None):
        self.report_ = self._run(f)
        self.estimate_ = self.report_.estimate
        self.n_evals_ = self.report_.n_evals
        return self

    def score(self, f: Integrand, y=None) -> float:
        """Negative relative error against the integrand's referent."""
        report = self.report_ if hasattr(self, "report_") else self._run(f)
        return -float(report.relative_error)


class PlainMC(_IntegratorBase):
    def __init__(self, n=1000, replications=1, random_state=None, threads=1):
        self.n = n
        self.replications = replications
        self.random_state = random_state
        self.threads = threads

    def _run(self, f):
        return plain_mc(f, self.n, self.random_state, replications=self.replications, threads=self.threads)


class SobolQMC(_IntegratorBase):
    def __init__(self, n=1000, skip_zero=False):
        self.n = n
        self.skip_zero = skip_zero

    def _run(self, f):
        return qmc_sobol(f, self.n, skip_zero=self.skip_zero)


class ShakenSobol(_IntegratorBase):
    """Sphere-shaken Sobol integration; ``rho`` or ``kappa`` sets the radius."""

    def __init__(self, n=1000, rho=None, kappa=None, max_resamples=100,
                 replications=1, random_state=None, threads=1):
        self.n = n
        self.rho = rho
        self.kappa = kappa
        self.max_resamples = max_resamples
        self.replications = replications
        self.random_state = random_state
        self.threads = threads

    def _run(self, f):
        cfg = ShakeConfig(self.rho, self.kappa, max_resamples=self.max_resamples)
        return mca_mss_1(f, self.n, cfg, self.random_state,
                         replications=self.replications, threads=self.threads)


class SymmetrizedShakenSobol(_IntegratorBase):
    def __init__(self, m=4, rho=None, kappa=None, max_resamples=100,
                 replications=1, random_state=None, threads=1):
        self.m = m
        self.rho = rho
        self.kappa = kappa
        self.max_resamples = max_resamples
        self.replications = replications
        self.random_state = random_state
        self.threads = threads

    def _run(self, f):
        cfg = ShakeConfig(self.rho, self.kappa, max_resamples=self.max_resamples)
        return mca_mss_2(f, self.m, cfg, self.random_state,
                         replications=self.replications, threads=self.threads)


class StratifiedSymmetrized(_IntegratorBase):
    def __init__(self, m=4, replications=1, random_state=None, threads=1):
        self.m = m
        self.replications = replications
        self.random_state = random_state
        self.threads = threads

    def _run(self, f):
        return mca_mss_2s(f, self.m, self.random_state,
                          replications=self.replications, threads=self.threads)
