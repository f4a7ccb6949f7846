"""Variance-based global sensitivity analysis by correlated sampling.

Every estimate comes from one ``(n, 2d)`` sample: the first ``d`` columns
are the base points ``xi = (eta, zeta)``, the last ``d`` an independent
copy ``xi'``.  With ``f0 = mean f(xi)``,

* ``D   = mean f(xi)^2 - f0^2``
* ``D_y = mean f(xi) f(eta, zeta') - f0^2``  (y-columns kept from ``xi``)
* ``D_z = mean f(xi) f(eta', zeta) - f0^2``  (y-columns taken from ``xi'``)

First-order indices are ``D_y / D`` and total indices ``1 - D_{z_i} / D``
with ``z_i`` the complement of ``{i}``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .integrands import Integrand
from .prng import RandomStream, as_stream
from .scramble import ScrambleSpec, owen_scramble
from .shaking import ShakeConfig, elementary_bits, elementary_cells, shake
from .sobol import generate
from ._validation import check_int

SAMPLERS = ("plain-mc", "qmc-sobol", "owen-qmc", "mss1")

# D below this (relative to f0^2 + 1) counts as a constant model
_ZERO_VARIANCE = 1e-13


@dataclass(frozen=True)
class SubsetSpec:
    """Proper, non-empty subset ``y`` of the inputs ``0..d-1`` (0-based)."""

    y: tuple
    d: int

    def __post_init__(self):
        y = tuple(sorted(int(i) for i in self.y))
        if not y:
            raise ValueError("subset must be non-empty")
        if len(set(y)) != len(y):
            raise ValueError(f"subset {y} has repeated indices")
        if y[0] < 0 or y[-1] >= self.d:
            raise ValueError(f"subset {y} out of range for d={self.d}")
        if len(y) == self.d:
            raise ValueError("subset must be a proper subset of the inputs")
        object.__setattr__(self, "y", y)

    @property
    def z(self) -> tuple:
        return tuple(i for i in range(self.d) if i not in self.y)

    def complement(self) -> "SubsetSpec":
        return SubsetSpec(self.z, self.d)

    def label(self) -> str:
        return "+".join(f"x{i + 1}" for i in self.y)


def sample_points(
    sampler: str,
    n: int,
    dim: int,
    stream=None,
    *,
    cfg: Optional[ShakeConfig] = None,
    scramble: Optional[ScrambleSpec] = None,
) -> np.ndarray:
    """``n`` points in ``[0, 1)^dim`` from one of :data:`SAMPLERS`."""
    n = check_int(n, "n")
    if sampler == "plain-mc":
        return as_stream(stream).uniform01((n, dim))
    if sampler not in SAMPLERS:
        raise KeyError(f"unknown sampler {sampler!r}; choose from {SAMPLERS}")
    points = generate(dim, n).points
    if sampler == "qmc-sobol":
        return points
    if sampler == "owen-qmc":
        spec = scramble if scramble is not None else ScrambleSpec(as_stream(stream).seed)
        return owen_scramble(points, spec).points
    if cfg is None:
        raise ValueError("the mss1 sampler needs a ShakeConfig")
    rho, _ = cfg.resolve(points)
    lower, upper = elementary_cells(points, elementary_bits(n, dim))
    xi, _ = shake(points, lower, upper, rho, as_stream(stream),
                  boundary_policy=cfg.boundary_policy, max_resamples=cfg.max_resamples)
    return xi


def _ratio(a, b, c):
    """``S = (mean a - mean(c)^2) / (mean b - mean(c)^2)`` and its delta-method
    standard error treating the samples as independent."""
    A, B, C = a.mean(), b.mean(), c.mean()
    den = B - C * C
    S = (A - C * C) / den
    resid = ((a - A) - S * (b - B) + 2.0 * C * (S - 1.0) * (c - C)) / den
    return float(S), float(resid.std() / np.sqrt(a.size))


@dataclass
class SubsetRow:
    subset: SubsetSpec
    D_y: float
    S_y: float
    stderr: float
    clamped: bool = False


@dataclass
class TotalRow:
    i: int
    D_z: float
    S_tot: float
    stderr: float
    clamped: bool = False


@dataclass
class SensitivityReport:
    f0: float
    D: float
    first_order: list
    totals: list
    n: int
    sampler: str
    seed: Optional[int]
    c: float = 0.0
    centered: bool = False
    D_clamped: bool = False
    undefined: bool = False
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def S(self) -> np.ndarray:
        """First-order indices of the singleton subsets, by input."""
        out = np.full(self._d, np.nan)
        for row in self.first_order:
            if len(row.subset.y) == 1:
                out[row.subset.y[0]] = row.S_y
        return out

    @property
    def S_tot(self) -> np.ndarray:
        out = np.full(self._d, np.nan)
        for row in self.totals:
            out[row.i] = row.S_tot
        return out

    @property
    def _d(self) -> int:
        if self.first_order:
            return self.first_order[0].subset.d
        return len(self.totals)

    def rows(self) -> list:
        """Flat records for CSV/JSON output."""
        common = {"n": self.n, "sampler": self.sampler,
                  "seed": "" if self.seed is None else str(self.seed), "c": repr(float(self.c))}
        out = [
            dict(quantity="f0", inputs="", value=repr(self.f0 + self.c), stderr="", clamped="0", **common),
            dict(quantity="g0", inputs="", value=repr(self.f0), stderr="", clamped="0", **common),
            dict(quantity="D", inputs="", value=repr(self.D), stderr="",
                 clamped=str(int(self.D_clamped)), **common),
        ]
        for r in self.first_order:
            out.append(dict(quantity="S", inputs=r.subset.label(), value=repr(r.S_y),
                            stderr=repr(r.stderr), clamped=str(int(r.clamped)), **common))
        for r in self.totals:
            out.append(dict(quantity="S_tot", inputs=f"x{r.i + 1}", value=repr(r.S_tot),
                            stderr=repr(r.stderr), clamped=str(int(r.clamped)), **common))
        return out


class _Sample:
    """Shared base sample and the model values derived from it."""

    def __init__(self, f: Integrand, X: np.ndarray):
        d = f.dimension
        self.f, self.d = f, d
        self.A, self.B = X[:, :d], X[:, d:]
        self.fA = f(self.A)
        self.f0 = float(self.fA.mean())
        self.D_raw = float(np.mean(self.fA**2) - self.f0**2)

    def mixed(self, y, from_base: bool) -> np.ndarray:
        """Points taking the ``y`` columns from A (``from_base``) or from B."""
        if from_base:
            P = self.B.copy()
            P[:, y] = self.A[:, y]
        else:
            P = self.A.copy()
            P[:, y] = self.B[:, y]
        return self.f(P)

    def partial(self, y, from_base: bool = True) -> tuple:
        prod = self.fA * self.mixed(list(y), from_base)
        return prod, float(prod.mean() - self.f0**2)


def _sample(f, n, sampler, stream, cfg, scramble) -> _Sample:
    X = sample_points(sampler, n, 2 * f.dimension, stream, cfg=cfg, scramble=scramble)
    return _Sample(f, X)


def estimate_f0(f: Integrand, n: int, sampler: str = "plain-mc", stream=None, **kw) -> float:
    X = sample_points(sampler, n, f.dimension, stream, **kw)
    return float(np.mean(f(X)))


def estimate_total_variance(f: Integrand, n: int, sampler: str = "plain-mc", stream=None, **kw) -> float:
    """``mean f^2 - (mean f)^2``, clamped at 0."""
    values = f(sample_points(sampler, n, f.dimension, stream, **kw))
    return max(float(np.mean(values**2) - np.mean(values) ** 2), 0.0)


def estimate_partial_variance(
    f: Integrand, subset: SubsetSpec, n: int, sampler: str = "plain-mc", stream=None,
    cfg=None, scramble=None,
) -> float:
    """``D_y`` from ``mean f(xi) f(eta, zeta') - f0^2``, clamped at 0."""
    if subset.d != f.dimension:
        raise ValueError("subset dimension does not match the integrand")
    s = _sample(f, n, sampler, stream, cfg, scramble)
    return max(s.partial(subset.y)[1], 0.0)


def first_order_index(f: Integrand, i: int, n: int, sampler: str = "plain-mc", stream=None, **kw) -> float:
    """``D_{i} / D``; NaN for a constant model."""
    report = full_report(f, n, sampler, stream=stream, inputs=[i], totals=False, **kw)
    return report.first_order[0].S_y


def total_index(f: Integrand, i: int, n: int, sampler: str = "plain-mc", stream=None, **kw) -> float:
    """``1 - D_{z_i} / D``; NaN for a constant model."""
    report = full_report(f, n, sampler, stream=stream, inputs=[i], first_order=False, **kw)
    return report.totals[0].S_tot


def center_model(f: Integrand, n_pilot: int, sampler: str = "plain-mc", stream=None, **kw) -> tuple:
    """Return ``(g, c)`` with ``g = f - c`` and ``c`` a pilot estimate of ``f0``."""
    c = estimate_f0(f, n_pilot, sampler, stream, **kw)
    return f.shifted(c), c


def full_report(
    f: Integrand,
    n: int,
    sampler: str = "plain-mc",
    *,
    stream=None,
    inputs: Optional[Sequence[int]] = None,
    subsets: Optional[Sequence] = None,
    first_order: bool = True,
    totals: bool = True,
    centered: bool = True,
    n_pilot: Optional[int] = None,
    cfg: Optional[ShakeConfig] = None,
    scramble: Optional[ScrambleSpec] = None,
) -> SensitivityReport:
    """f0, D, first-order indices of ``inputs`` (plus any extra ``subsets``)
    and total indices of ``inputs``, all from one shared sample.

    With ``centered`` the model is first shifted by a pilot estimate of f0
    drawn from child stream 1; the main sample uses child stream 0.
    """
    n = check_int(n, "n")
    d = f.dimension
    if d < 2:
        raise ValueError("sensitivity analysis needs at least 2 inputs")
    root = as_stream(stream)
    t0 = time.perf_counter()
    c = 0.0
    model = f
    if centered:
        model, c = center_model(f, n_pilot or n, sampler, root.split(1), cfg=cfg, scramble=scramble)
    s = _sample(model, n, sampler, root.split(0), cfg, scramble)
    inputs = list(range(d)) if inputs is None else [int(i) for i in inputs]
    specs = [SubsetSpec((i,), d) for i in inputs] if first_order else []
    specs += [s_ if isinstance(s_, SubsetSpec) else SubsetSpec(tuple(s_), d) for s_ in (subsets or [])]

    D = max(s.D_raw, 0.0)
    undefined = D <= _ZERO_VARIANCE * (1.0 + s.f0**2)
    sq = s.fA**2
    fo_rows = []
    for spec in specs:
        prod, D_y = s.partial(spec.y, from_base=True)
        if undefined:
            fo_rows.append(SubsetRow(spec, D_y, float("nan"), float("nan"), D_y < 0))
            continue
        S, se = _ratio(prod, sq, s.fA)
        fo_rows.append(SubsetRow(spec, max(D_y, 0.0), max(S, 0.0), se, D_y < 0))
    tot_rows = []
    for i in (inputs if totals else []):
        prod, D_z = s.partial([i], from_base=False)
        if undefined:
            tot_rows.append(TotalRow(i, D_z, float("nan"), float("nan"), D_z < 0))
            continue
        S_z, se = _ratio(prod, sq, s.fA)
        S_tot = 1.0 - max(S_z, 0.0)
        tot_rows.append(TotalRow(i, max(D_z, 0.0), min(max(S_tot, 0.0), 1.0), se,
                                 D_z < 0 or S_tot < 0))
    return SensitivityReport(
        f0=s.f0, D=D, first_order=fo_rows, totals=tot_rows, n=n, sampler=sampler,
        seed=None if sampler == "qmc-sobol" else root.seed, c=c, centered=centered,
        D_clamped=s.D_raw < 0, undefined=bool(undefined), wall_time=time.perf_counter() - t0,
    )


class SobolSensitivity(BaseEstimator):
    """``fit(f)`` estimates first-order (``first_order_``) and total
    (``total_``) indices for every input of ``f``."""

    def __init__(self, n=2**14, sampler="qmc-sobol", centered=True, n_pilot=None,
                 rho=None, kappa=None, scramble_seed=None, random_state=None):
        self.n = n
        self.sampler = sampler
        self.centered = centered
        self.n_pilot = n_pilot
        self.rho = rho
        self.kappa = kappa
        self.scramble_seed = scramble_seed
        self.random_state = random_state

    def fit(self, f: Integrand, y=None):
        cfg = None
        if self.rho is not None or self.kappa is not None:
            cfg = ShakeConfig(self.rho, self.kappa)
        scramble = None if self.scramble_seed is None else ScrambleSpec(int(self.scramble_seed))
        self.report_ = full_report(f, self.n, self.sampler, stream=self.random_state,
                                   centered=self.centered, n_pilot=self.n_pilot,
                                   cfg=cfg, scramble=scramble)
        self.first_order_ = self.report_.S
        self.total_ = self.report_.S_tot
        self.variance_ = self.report_.D
        self.f0_ = self.report_.f0 + self.report_.c
        return self
