"""Base-2 Sobol sequences: direction numbers, Gray-code stepping, net checks.

Direction numbers come from the Joe-Kuo ``new-joe-kuo-6`` initialisation
table shipped in ``data/``.  Dimension 1 is the van der Corput sequence
(every ``m_k = 1``), as in the Joe-Kuo convention; the file starts at
dimension 2.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ._validation import check_points

BITS = 32
DEFAULT_TABLE = "new-joe-kuo-6.1024"
PROVENANCES = ("raw-sobol", "shaken", "scrambled", "uniform", "symmetrized-pairs")


@dataclass(frozen=True)
class PrimitivePolynomial:
    """Primitive polynomial over GF(2).

    ``coefficients`` holds the interior coefficients ``(a_1, ..., a_{s-1})``;
    the leading ``x^s`` and trailing ``1`` are implicit.
    """

    degree: int
    coefficients: tuple = ()

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError(f"degree must be >= 1, got {self.degree}")
        coeffs = tuple(int(a) for a in self.coefficients)
        if len(coeffs) != self.degree - 1:
            raise ValueError(
                f"degree {self.degree} needs {self.degree - 1} interior "
                f"coefficients, got {len(coeffs)}"
            )
        if any(a not in (0, 1) for a in coeffs):
            raise ValueError("coefficients must be 0 or 1")
        object.__setattr__(self, "coefficients", coeffs)

    @classmethod
    def from_joe_kuo(cls, s: int, a: int) -> "PrimitivePolynomial":
        # a packs a_1..a_{s-1} with a_1 as the most significant bit
        return cls(s, tuple((a >> (s - 2 - k)) & 1 for k in range(s - 1)))

    def to_int(self) -> int:
        """Full polynomial as an integer bit mask, e.g. x^2+x+1 -> 0b111."""
        value = 1 << self.degree
        for k, a in enumerate(self.coefficients, start=1):
            value |= a << (self.degree - k)
        return value | 1


def extend_direction_numbers(
    poly: PrimitivePolynomial, seed_m: Sequence[int], count: int
) -> list:
    """Extend the seed values ``m_1..m_s`` to ``m_1..m_count``.

    For ``k > s`` the XOR recurrence is
    ``m_k = 2 a_1 m_{k-1} ^ 4 a_2 m_{k-2} ^ ... ^ 2^s m_{k-s} ^ m_{k-s}``.
    """
    s = poly.degree
    seed_m = [int(m) for m in seed_m]
    if len(seed_m) != s:
        raise ValueError(f"expected {s} seed values, got {len(seed_m)}")
    for k, m in enumerate(seed_m, start=1):
        if m % 2 == 0:
            raise ValueError(f"seed value m_{k}={m} must be odd")
        if not 0 < m < 2**k:
            raise ValueError(f"seed value m_{k}={m} must be < 2^{k}")
    if count < 1:
        raise ValueError("count must be >= 1")

    m = list(seed_m[:count])
    for k in range(s, count):
        value = (m[k - s] << s) ^ m[k - s]
        for i, a in enumerate(poly.coefficients, start=1):
            if a:
                value ^= m[k - i] << i
        m.append(value)
    return m


@dataclass(frozen=True)
class DirectionTable:
    """Fixed-point direction integers ``v[j, k] = m_{k+1,j} * 2^(bits-k-1)``."""

    v: np.ndarray
    bits: int = BITS
    polynomials: tuple = field(default=(), compare=False)
    seeds: tuple = field(default=(), compare=False)

    def __post_init__(self):
        v = np.asarray(self.v, dtype=np.uint64)
        if v.ndim != 2 or v.shape[1] != self.bits:
            raise ValueError(f"v must have shape (d, {self.bits}), got {v.shape}")
        if np.any(v >= np.uint64(1) << np.uint64(self.bits)):
            raise ValueError(f"direction integers must be < 2^{self.bits}")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)

    @property
    def dimension(self) -> int:
        return self.v.shape[0]

    def m(self, j: int) -> list:
        """Odd integers ``m_{1..K}`` of dimension ``j`` (0-based)."""
        return [int(v) >> (self.bits - k - 1) for k, v in enumerate(self.v[j])]

    def t_bound(self, d: Optional[int] = None) -> int:
        """Upper bound on the quality parameter t of the first ``d`` dims."""
        d = self.dimension if d is None else d
        return sum(p.degree - 1 for p in self.polynomials[1:d])

    def restrict(self, d: int) -> "DirectionTable":
        if not 1 <= d <= self.dimension:
            raise ValueError(f"dimension {d} outside table range 1..{self.dimension}")
        return DirectionTable(
            self.v[:d], self.bits, self.polynomials[:d], self.seeds[:d]
        )

    @classmethod
    def from_polynomials(cls, polynomials, seeds, bits: int = BITS) -> "DirectionTable":
        """Build a table; ``polynomials[0]`` may be None for van der Corput."""
        rows = []
        for poly, seed in zip(polynomials, seeds):
            if poly is None:
                m = [1] * bits
            else:
                m = extend_direction_numbers(poly, seed, bits)
            rows.append([mk << (bits - k - 1) for k, mk in enumerate(m)])
        return cls(np.array(rows, dtype=np.uint64), bits, tuple(polynomials), tuple(seeds))


def parse_direction_file(path, dimension: Optional[int] = None, bits: int = BITS) -> DirectionTable:
    """Parse a Joe-Kuo layout file: header line, then ``d s a m_1 ... m_s``."""
    polys = [None]
    seeds = [()]
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or not parts[0].isdigit():
                continue
            if dimension is not None and len(polys) >= dimension:
                break
            d, s, a = (int(p) for p in parts[:3])
            m = tuple(int(p) for p in parts[3:])
            if d != len(polys) + 1:
                raise ValueError(f"{path}:{lineno}: expected dimension {len(polys) + 1}, got {d}")
            if len(m) != s:
                raise ValueError(f"{path}:{lineno}: degree {s} but {len(m)} seed values")
            polys.append(PrimitivePolynomial.from_joe_kuo(s, a))
            seeds.append(m)
    if dimension is not None and len(polys) < dimension:
        raise ValueError(f"{path} only covers {len(polys)} dimensions, {dimension} requested")
    return DirectionTable.from_polynomials(polys, seeds, bits)


@functools.lru_cache(maxsize=4)
def _shipped_table(name: str, bits: int) -> DirectionTable:
    with resources.as_file(resources.files("qmc_shake") / "data" / name) as path:
        return parse_direction_file(path, bits=bits)


def load_direction_table(
    dimension: Optional[int] = None, path=None, bits: int = BITS
) -> DirectionTable:
    """Shipped Joe-Kuo table (cached), or one parsed from ``path``."""
    if path is not None:
        return parse_direction_file(Path(path), dimension, bits)
    table = _shipped_table(DEFAULT_TABLE, bits)
    return table if dimension is None else table.restrict(dimension)


def max_dimension() -> int:
    return load_direction_table().dimension


def gray_code(i):
    return i ^ (i >> 1)


def direct_integers(table: DirectionTable, index: int) -> np.ndarray:
    """Direct formula ``i_1 v_1 ^ i_2 v_2 ^ ...`` over the bits of ``index``.

    Point ``i`` of the Gray-code ordered sequence is
    ``direct_integers(table, gray_code(i))``.
    """
    if not 0 <= index < 2**table.bits:
        raise OverflowError(f"index {index} outside 0..2^{table.bits}-1")
    g = index
    x = np.zeros(table.dimension, dtype=np.uint64)
    k = 0
    while g:
        if g & 1:
            x ^= table.v[:, k]
        g >>= 1
        k += 1
    return x


class SobolGenerator:
    """Stateful Antonov-Saleev (Gray-code) Sobol stepper.

    Each call to :meth:`next_point` returns point ``index`` and then XORs
    in the direction number selected by the lowest zero bit of ``index``.
    """

    def __init__(self, table=None, dimension: Optional[int] = None, index: int = 0):
        if table is None:
            table = load_direction_table(dimension)
        elif dimension is not None:
            table = table.restrict(dimension)
        self.table = table
        self.scale = 1.0 / float(2**table.bits)
        self.index = 0
        self.state = np.zeros(table.dimension, dtype=np.uint64)
        if index:
            self.seek(index)

    @property
    def dimension(self) -> int:
        return self.table.dimension

    def seek(self, index: int) -> None:
        self.state = direct_integers(self.table, gray_code(index))
        self.index = index

    def next_integers(self) -> np.ndarray:
        if self.index >= 2**self.table.bits:
            raise OverflowError(f"Sobol generator exhausted after 2^{self.table.bits} points")
        out = self.state.copy()
        c = _lowest_zero_bit(self.index)
        if c < self.table.bits:
            self.state ^= self.table.v[:, c]
        self.index += 1
        return out

    def next_point(self) -> np.ndarray:
        return self.next_integers() * self.scale


def next_point(gen: SobolGenerator) -> np.ndarray:
    return gen.next_point()


def _lowest_zero_bit(i: int) -> int:
    return ((i + 1) & -(i + 1)).bit_length() - 1


def sobol_integers(table: DirectionTable, n: int, start: int = 0) -> np.ndarray:
    """Integer states of points ``start .. start+n-1`` in Gray-code order.

    Vectorised form of repeated :meth:`SobolGenerator.next_integers`: the
    state sequence is a cumulative XOR of the selected direction numbers.
    """
    if n < 0 or start < 0 or start + n > 2**table.bits:
        raise OverflowError(f"points {start}..{start + n - 1} exceed 2^{table.bits}")
    if n == 0:
        return np.zeros((0, table.dimension), dtype=np.uint64)
    k = np.arange(start + 1, start + n, dtype=np.int64)
    c = np.log2((k & -k).astype(np.float64)).astype(np.intp)
    steps = np.empty((n, table.dimension), dtype=np.uint64)
    steps[0] = direct_integers(table, gray_code(start))
    steps[1:] = table.v[:, c].T
    return np.bitwise_xor.accumulate(steps, axis=0)


@dataclass
class PointSet:
    """Ordered points in ``[0, 1)^d`` tagged with where they came from."""

    points: np.ndarray
    provenance: str = "raw-sobol"

    def __post_init__(self):
        self.points = check_points(self.points)
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")
        if self.provenance == "symmetrized-pairs" and len(self.points) % 2:
            raise ValueError("symmetrized-pairs point sets need an even count")

    def __len__(self) -> int:
        return self.points.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.points if dtype is None else self.points.astype(dtype)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]


def generate(d: int, n: int, skip_zero: bool = False, table=None) -> PointSet:
    """First ``n`` Sobol points in ``d`` dimensions (optionally without 0)."""
    if d < 1 or n < 1:
        raise ValueError(f"need d >= 1 and n >= 1, got d={d}, n={n}")
    table = load_direction_table(d) if table is None else table.restrict(d)
    start = 1 if skip_zero else 0
    ints = sobol_integers(table, n, start=start)
    return PointSet(ints * (1.0 / 2**table.bits), "raw-sobol")


@dataclass
class NetCheck:
    passed: bool
    violation: Optional[dict] = None

    def __bool__(self) -> bool:
        return self.passed


def check_net_property(ps, t: int, m: int, base: int = 2) -> NetCheck:
    """Brute-force elementary-interval test of the (t, m, d)-net property.

    Every elementary interval of volume ``2^(t-m)`` must hold exactly
    ``2^t`` points.  All shapes ``(k_1, ..., k_d)`` with ``sum k = m - t``
    are enumerated and points bucketed by their leading bits.
    """
    if base != 2:
        raise ValueError("only base 2 is supported")
    x = np.asarray(ps)
    n, d = x.shape
    if n != 2**m:
        raise ValueError(f"a (t, {m}, d)-net needs {2**m} points, got {n}")
    if not 0 <= t <= m:
        raise ValueError(f"need 0 <= t <= m, got t={t}, m={m}")
    q = m - t
    digits = np.floor(x * 2.0**q).astype(np.int64)
    expected = 2**t
    for shape in _compositions(q, d):
        cell = np.zeros(n, dtype=np.int64)
        for j, kj in enumerate(shape):
            cell = (cell << kj) | (digits[:, j] >> (q - kj))
        counts = np.bincount(cell, minlength=2**q)
        bad = np.flatnonzero(counts != expected)
        if bad.size:
            flat = int(bad[0])
            corner = []
            for kj in reversed(shape):
                corner.append(flat & ((1 << kj) - 1))
                flat >>= kj
            corner.reverse()
            return NetCheck(False, {
                "shape": tuple(shape),
                "interval": [(a / 2**kj, (a + 1) / 2**kj) for a, kj in zip(corner, shape)],
                "count": int(counts[bad[0]]),
                "expected": expected,
            })
    return NetCheck(True)


def _compositions(total: int, parts: int):
    for cuts in itertools.combinations(range(total + parts - 1), parts - 1):
        prev = -1
        out = []
        for c in cuts:
            out.append(c - prev - 1)
            prev = c
        out.append(total + parts - 1 - prev - 1)
        yield out


def min_pairwise_distance(ps, method: str = "auto") -> float:
    """Smallest Euclidean distance between any two points.

    ``method='brute'`` is the exhaustive O(n^2) scan, chunked to bound
    memory; ``'kdtree'`` gives the same exact answer via a k-d tree and is
    used by ``'auto'`` above a few thousand points.
    """
    x = np.asarray(ps, dtype=np.float64)
    n = x.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    if method == "auto":
        method = "brute" if n <= 4096 else "kdtree"
    if method == "kdtree":
        from scipy.spatial import cKDTree

        dist, _ = cKDTree(x).query(x, k=2)
        return float(dist[:, 1].min())
    if method != "brute":
        raise ValueError(f"unknown method {method!r}")
    best = np.inf
    chunk = max(1, 2**20 // n)
    for lo in range(0, n - 1, chunk):
        block = x[lo:lo + chunk]
        diff = block[:, None, :] - x[None, lo + 1:, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        # only pairs (i, j) with j > i
        rows = np.arange(block.shape[0])[:, None]
        cols = np.arange(lo + 1, n)[None, :] - lo
        d2[cols <= rows] = np.inf
        best = min(best, float(d2.min()))
    return float(np.sqrt(best))
