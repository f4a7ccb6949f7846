"""Cell bookkeeping and the sphere-shaking step shared by the MSS estimators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .prng import RandomStream, random_directions

BOUNDARY_POLICIES = ("resample", "reject-run")


class ShakeError(RuntimeError):
    """A shaken point could not be kept inside its cell."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


@dataclass(frozen=True)
class ShakeConfig:
    """Shake radius given directly (``rho``) or relative to the point set's
    minimal pairwise distance (``kappa``); exactly one must be set."""

    rho: Optional[float] = None
    kappa: Optional[float] = None
    boundary_policy: str = "resample"
    max_resamples: int = 100

    def __post_init__(self):
        if (self.rho is None) == (self.kappa is None):
            raise ValueError("exactly one of rho and kappa must be given")
        value = self.rho if self.rho is not None else self.kappa
        if not value > 0:
            raise ValueError(f"shake radius parameter must be > 0, got {value}")
        if self.boundary_policy not in BOUNDARY_POLICIES:
            raise ValueError(f"boundary_policy must be one of {BOUNDARY_POLICIES}")
        if self.max_resamples < 1:
            raise ValueError("max_resamples must be >= 1")

    def resolve(self, points) -> tuple:
        """Return ``(rho, delta)``; delta is only computed when kappa drives rho."""
        if self.rho is not None:
            return float(self.rho), None
        from .sobol import min_pairwise_distance

        delta = min_pairwise_distance(points)
        return self.kappa * delta, delta


@dataclass(frozen=True)
class CellGrid:
    """``m^d`` congruent half-open subcubes of edge ``1/m``."""

    d: int
    m: int

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("CellGrid needs d >= 1 and m >= 1")

    @property
    def n_cells(self) -> int:
        return self.m**self.d

    @property
    def width(self) -> float:
        return 1.0 / self.m

    def digits(self, index) -> np.ndarray:
        """Per-axis integer coordinates ``(a_1, ..., a_d)`` of flat cell indices
        (axis 0 varies slowest)."""
        index = np.asarray(index, dtype=np.int64)
        return np.stack(np.unravel_index(index, (self.m,) * self.d), axis=-1)

    def index_of(self, X) -> np.ndarray:
        a = np.floor(np.asarray(X) * self.m).astype(np.int64)
        a = np.minimum(a, self.m - 1)
        return np.ravel_multi_index(tuple(a.T), (self.m,) * self.d)

    def lower(self, index) -> np.ndarray:
        return self.digits(index) / self.m

    def upper(self, index) -> np.ndarray:
        return (self.digits(index) + 1) / self.m

    def centers(self, index=None) -> np.ndarray:
        if index is None:
            index = np.arange(self.n_cells)
        return (self.digits(index) + 0.5) / self.m


def elementary_bits(n: int, d: int) -> np.ndarray:
    """Per-axis resolution of the elementary interval that isolates one of
    ``n`` points: ``floor(log2 n)`` bits dealt round-robin from axis 0."""
    q = max(int(n).bit_length() - 1, 0)
    bits = np.full(d, q // d, dtype=np.int64)
    bits[: q % d] += 1
    return bits


def elementary_cells(X, bits) -> tuple:
    """Lower and upper corners of the elementary interval holding each point."""
    scale = 2.0 ** np.asarray(bits, dtype=np.float64)
    lower = np.floor(np.asarray(X) * scale) / scale
    return lower, lower + 1.0 / scale


def reflect(p, center):
    """Point symmetric to ``p`` about ``center``."""
    return 2.0 * np.asarray(center) - np.asarray(p)


def shake(
    X,
    lower,
    upper,
    rho: float,
    stream: RandomStream,
    *,
    boundary_policy: str = "resample",
    max_resamples: int = 100,
    cell_ids=None,
) -> tuple:
    """Move each row of ``X`` to a uniform point on the radius-``rho`` sphere
    about it, conditioned on landing in its half-open cell ``[lower, upper)``.

    Coordinates sitting exactly on a lower face have the corresponding
    direction component folded to be non-negative, which samples the
    contained half-sphere exactly; any remaining violations are redrawn.
    Returns ``(shaken_points, number_of_redraws)``.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    half = 0.5 * float(np.min(upper - lower))
    if rho >= half:
        raise ShakeError(f"rho={rho:g} is not below half the cell width {half:g}")
    on_face = X == lower

    def draw(rows):
        w = random_directions(stream, rows.size, d)
        w = np.where(on_face[rows], np.abs(w), w)
        return X[rows] + rho * w

    out = draw(np.arange(n))
    redraws = 0
    pending = np.flatnonzero(~_inside(out, lower, upper))
    attempts = 1
    while pending.size:
        if boundary_policy == "reject-run" or attempts >= max_resamples:
            row = int(pending[0])
            cell = row if cell_ids is None else int(cell_ids[row])
            raise ShakeError(
                f"shaken point {row} left cell {cell} "
                f"[{lower[row].tolist()}, {upper[row].tolist()}) after {attempts} attempt(s)",
                cell=cell,
            )
        out[pending] = draw(pending)
        redraws += pending.size
        attempts += 1
        pending = pending[~_inside(out[pending], lower[pending], upper[pending])]
    return out, redraws


def _inside(P, lower, upper) -> np.ndarray:
    return np.all((P >= lower) & (P < upper) & (P >= 0.0) & (P < 1.0), axis=1)
