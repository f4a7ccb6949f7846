"""Owen nested scrambling of base-2 digital nets.

In base 2 each nested permutation is either the identity or a bit flip.
Instead of storing the permutation tree, the flip applied to digit ``l``
of coordinate ``j`` is a keyed hash of ``(seed, j, l, digit prefix)``:
points sharing a prefix share the flip, distinct prefixes get
independent-looking flips, and memory stays O(1).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .integrands import Integrand
from .sobol import PointSet, generate
from ._validation import check_points

SCHEMES = ("owen-nested",)
MAX_DIGITS = 53
# Reserved seed whose permutations are all the identity (debugging aid).
IDENTITY_SEED = 2**64 - 1

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix(z):
    """splitmix64 finaliser on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@dataclass(frozen=True)
class ScrambleSpec:
    seed: int = 0
    digits: int = 32
    scheme: str = "owen-nested"

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not 1 <= self.digits <= MAX_DIGITS:
            raise ValueError(f"digits must be in 1..{MAX_DIGITS}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unsupported scrambling scheme {self.scheme!r}")

    def replicate(self, r: int) -> "ScrambleSpec":
        """Spec with an independent seed for replication ``r``."""
        state = np.random.SeedSequence([int(self.seed), int(r)]).generate_state(1, np.uint64)
        return ScrambleSpec(int(state[0]), self.digits, self.scheme)


def flip_bit(seed: int, dim: int, digit: int, prefix) -> np.ndarray:
    """Flip (1) or keep (0) for digit ``digit`` (1-based) of coordinate
    ``dim`` given the preceding digits ``prefix`` read as an integer."""
    if seed == IDENTITY_SEED:
        return np.zeros(np.shape(prefix), dtype=np.uint64)
    base = _mix(_mix(np.uint64(seed)) ^ np.uint64(dim))
    key = (np.asarray(prefix, dtype=np.uint64) << np.uint64(6)) | np.uint64(digit)
    return _mix(base ^ _mix(key)) >> np.uint64(63)


def scramble_integers(ints, spec: ScrambleSpec, width: int) -> np.ndarray:
    """Scramble the leading ``spec.digits`` of ``width``-bit integer coordinates."""
    ints = np.asarray(ints, dtype=np.uint64)
    out = ints.copy()
    for j in range(ints.shape[1]):
        x = ints[:, j]
        z = x.copy()
        for digit in range(1, spec.digits + 1):
            shift = np.uint64(width - digit)
            prefix = x >> (shift + np.uint64(1))
            z ^= flip_bit(spec.seed, j, digit, prefix) << shift
        out[:, j] = z
    return out


def owen_scramble(ps, spec: ScrambleSpec) -> PointSet:
    """Nested-scrambled copy of a point set in ``[0, 1)^d``."""
    X = check_points(np.asarray(ps))
    width = max(spec.digits, 32)
    scale = float(2**width)
    ints = np.floor(X * scale).astype(np.uint64)
    z = scramble_integers(ints, spec, width)
    # bits below the integer grid (beyond 2^-width) are carried over unchanged
    tail = X - ints / scale
    return PointSet(np.minimum(z / scale + tail, np.nextafter(1.0, 0.0)), "scrambled")


def owen_qmc(f: Integrand, n: int, spec: ScrambleSpec, replications: int = 1):
    """Randomised QMC: average of ``f`` over ``n`` scrambled Sobol points,
    one independent scrambling per replication."""
    from .integration import summarize

    t0 = time.perf_counter()
    points = generate(f.dimension, n).points
    estimates = [
        float(np.mean(f(owen_scramble(points, spec.replicate(r)).points)))
        for r in range(replications)
    ]
    return summarize("owen-qmc", estimates, n, f, time.perf_counter() - t0, seed=int(spec.seed))


class OwenScrambler(TransformerMixin, BaseEstimator):
    """Transformer applying one fixed nested scrambling to point sets."""

    def __init__(self, seed=0, digits=32):
        self.seed = seed
        self.digits = digits

    def fit(self, X, y=None):
        X = check_points(X)
        self.spec_ = ScrambleSpec(int(self.seed), int(self.digits))
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = check_points(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return owen_scramble(X, self.spec_).points
