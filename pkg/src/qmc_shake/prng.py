"""Seedable random streams and the samplers built on them.

Streams wrap numpy's MT19937 bit generator (period 2^19937 - 1), the
same Mersenne Twister family the reference experiments used.  Worker and
replication streams are split off a root seed through ``SeedSequence``
entropy ``(seed, index)``, so a given index always gets the same stream
regardless of how many threads consume them.
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from ._validation import check_box, check_positive

SEED_ENV = "QMC_SHAKE_SEED"
DEFAULT_SEED = 20121


def resolve_seed(seed: Optional[int] = None) -> int:
    """Explicit seed, else ``$QMC_SHAKE_SEED``, else the package default."""
    if seed is None:
        env = os.environ.get(SEED_ENV)
        seed = int(env, 0) if env else DEFAULT_SEED
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


class RandomStream:
    """Reproducible uniform stream; identical seeds give identical draws."""

    algorithm = "mt19937"

    def __init__(self, seed: Optional[int] = None, *, _key: tuple = ()):
        self.seed = resolve_seed(seed)
        self.key = (self.seed,) + tuple(_key)
        entropy = self.seed if not _key else list(self.key)
        self._gen = np.random.Generator(np.random.MT19937(np.random.SeedSequence(entropy)))

    def split(self, index: int) -> "RandomStream":
        """Child stream ``index``; depends only on this stream's key, not its state."""
        if index < 0:
            raise ValueError("stream index must be non-negative")
        return RandomStream(self.seed, _key=self.key[1:] + (int(index),))

    def __repr__(self) -> str:
        return f"RandomStream(key={self.key})"

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def uniform01(self, size=None):
        return self._gen.random(size)

    def normal(self, size=None):
        return self._gen.standard_normal(size)


def as_stream(stream) -> RandomStream:
    if isinstance(stream, RandomStream):
        return stream
    return RandomStream(stream)


def split_stream(seed: Optional[int], index: int) -> RandomStream:
    return RandomStream(seed).split(index)


def uniform01(stream: RandomStream, size=None):
    return stream.uniform01(size)


def uniform_in_box(stream: RandomStream, lower, upper, size=None) -> np.ndarray:
    lower, upper = check_box(lower, upper)
    shape = lower.shape if size is None else (size,) + lower.shape
    return lower + (upper - lower) * stream.uniform01(shape)


def random_directions(stream: RandomStream, n: int, d: int) -> np.ndarray:
    """``n`` unit vectors uniform on the (d-1)-sphere (normalised Gaussians)."""
    g = stream.normal((n, d))
    norms = np.linalg.norm(g, axis=1)
    bad = norms == 0.0
    while np.any(bad):
        g[bad] = stream.normal((int(bad.sum()), d))
        norms[bad] = np.linalg.norm(g[bad], axis=1)
        bad = norms == 0.0
    return g / norms[:, None]


def uniform_on_sphere(stream: RandomStream, center, rho: float) -> np.ndarray:
    center = np.atleast_1d(np.asarray(center, dtype=np.float64))
    rho = check_positive(rho, "rho")
    return center + rho * random_directions(stream, 1, center.shape[0])[0]
