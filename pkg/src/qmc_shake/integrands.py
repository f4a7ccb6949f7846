"""Test integrands on the unit cube and the name registry used by the CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

SMOOTHNESS = ("W1", "W2", "smooth", "non-smooth")

# |x - 0.8| is clamped below by this so the evaluator stays finite at 0.8
F1_CLAMP = 1e-15


@dataclass
class Integrand:
    """Vectorised integrand: ``evaluator`` maps an (n, d) array to (n,)."""

    dimension: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    smoothness: str = "smooth"
    referent: Optional[float] = None
    name: str = ""
    notes: str = ""
    exponents: Optional[np.ndarray] = field(default=None, repr=False)
    coefficients: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if self.smoothness not in SMOOTHNESS:
            raise ValueError(f"unknown smoothness tag {self.smoothness!r}")

    def __call__(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return self.evaluator(X[None, :])[0]
        if X.shape[1] != self.dimension:
            raise ValueError(f"{self.name or 'integrand'} expects d={self.dimension}, got {X.shape[1]}")
        return np.asarray(self.evaluator(X), dtype=np.float64)

    def shifted(self, c: float) -> "Integrand":
        """``x -> f(x) - c``; the referent shifts with it."""
        f = self.evaluator
        return Integrand(
            self.dimension,
            lambda X: f(X) - c,
            self.smoothness,
            None if self.referent is None else self.referent - c,
            f"{self.name}-centered" if self.name else "",
            self.notes,
        )


def _f1(X):
    return np.sum(np.maximum(np.abs(X - 0.8), F1_CLAMP) ** (-1.0 / 3.0), axis=1)


def _f2(X):
    x1, x2, x3, x4 = X.T
    return x1 * x2**2 * np.exp(x1 * x2) * np.sin(x3) * np.cos(x4)


# Closed forms: 4 * int_0^1 |x - 0.8|^(-1/3) dx and (3 - e)(1 - cos 1) sin 1.
F1_EXACT = 6.0 * (0.8 ** (2.0 / 3.0) + 0.2 ** (2.0 / 3.0))
F2_EXACT = (3.0 - math.e) * (1.0 - math.cos(1.0)) * math.sin(1.0)
F1_ROUNDED = 7.22261
F2_ROUNDED = 0.10897


def f1_nonsmooth() -> Integrand:
    return Integrand(
        4, _f1, "non-smooth", F1_EXACT, "f1-nonsmooth",
        f"closed form {F1_EXACT:.12g}; 5-digit value {F1_ROUNDED}",
    )


def f2_smooth() -> Integrand:
    return Integrand(
        4, _f2, "smooth", F2_EXACT, "f2-smooth",
        f"closed form {F2_EXACT:.12g}; 5-digit value {F2_ROUNDED}",
    )


def linear(d: int = 4, weights=None, offset: float = 0.0) -> Integrand:
    """Affine ``offset + w . x``; the integral is ``offset + sum(w) / 2``."""
    w = np.ones(d) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (d,):
        raise ValueError("weights must have length d")
    return Integrand(
        d, lambda X: X @ w + offset, "smooth", offset + 0.5 * float(w.sum()),
        "linear-d", "exact",
    )


def product_x1x2() -> Integrand:
    return Integrand(2, lambda X: X[:, 0] * X[:, 1], "smooth", 0.25, "product-x1x2", "exact")


def constant(d: int, value: float) -> Integrand:
    return Integrand(d, lambda X: np.full(X.shape[0], float(value)), "smooth", float(value), "constant")


def polynomial(coefficients, exponents, name: str = "polynomial") -> Integrand:
    """Sum of monomials ``c * prod x_i^e_i``; the referent is exact."""
    c = np.asarray(coefficients, dtype=np.float64)
    e = np.asarray(exponents, dtype=np.int64)
    if e.ndim != 2 or e.shape[0] != c.shape[0]:
        raise ValueError("need one exponent row per coefficient")
    if np.any(e < 0):
        raise ValueError("exponents must be non-negative")
    exact = float(np.sum(c / np.prod(e + 1.0, axis=1)))

    def evaluate(X):
        return np.prod(X[:, None, :] ** e[None, :, :], axis=2) @ c

    return Integrand(e.shape[1], evaluate, "smooth", exact, name, "exact",
                     exponents=e, coefficients=c)


def read_polynomial_model(path) -> Integrand:
    """Load ``d degree`` then ``c e_1 ... e_d`` lines (``#`` comments allowed)."""
    rows = []
    with open(path) as fh:
        lines = [ln.split("#", 1)[0].split() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError(f"{path}: empty model file")
    d, degree = (int(v) for v in lines[0])
    for lineno, parts in enumerate(lines[1:], start=2):
        if len(parts) != d + 1:
            raise ValueError(f"{path}: term {lineno - 1} needs 1 + {d} fields, got {len(parts)}")
        rows.append((float(parts[0]), [int(v) for v in parts[1:]]))
    if not rows:
        raise ValueError(f"{path}: no terms")
    coeffs = [c for c, _ in rows]
    exps = [e for _, e in rows]
    if max(sum(e) for e in exps) > degree:
        raise ValueError(f"{path}: a term exceeds the declared degree {degree}")
    return polynomial(coeffs, exps, name=f"poly-file:{path}")


def write_polynomial_model(path, integrand: Integrand) -> None:
    e, c = integrand.exponents, integrand.coefficients
    with open(path, "w") as fh:
        fh.write(f"{e.shape[1]} {int(e.sum(axis=1).max())}\n")
        for ci, ei in zip(c, e):
            fh.write(" ".join([repr(float(ci))] + [str(int(v)) for v in ei]) + "\n")


REGISTRY = {
    "f1-nonsmooth": f1_nonsmooth,
    "f2-smooth": f2_smooth,
    "linear-d": linear,
    "product-x1x2": product_x1x2,
}


def get_integrand(name: str, dimension: Optional[int] = None) -> Integrand:
    """Look up a registry entry; ``poly-file:<path>`` loads a model file."""
    if name.startswith("poly-file:"):
        return read_polynomial_model(name.split(":", 1)[1])
    if name not in REGISTRY:
        raise KeyError(f"unknown integrand {name!r}; choose from {sorted(REGISTRY)} or poly-file:<path>")
    if name == "linear-d":
        return linear(dimension or 4)
    return REGISTRY[name]()
