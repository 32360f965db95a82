"""Truncated free tensor algebra over ``R^d``.

Elements are stored densely: level ``m`` is a flat array of ``d^m`` entries
in row-major multi-index order, the interchange convention used everywhere
in this library (the flat position of index ``(i_1, ..., i_m)`` is
``i_1 d^{m-1} + ... + i_m``).  The algebra product is the graded convolution

    (a . b)_m = sum_{i=0}^{m} a_i (x) b_{m-i},

truncated at level ``M``.  Dense storage is intended for exact, desk-scale
computation and for oracles; scalable code paths never materialize these
tensors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DomainError, ShapeError

#: Hard ceiling on the entry count d^M of a single dense level.
CAPACITY_LIMIT = 10_000_000


def _check_capacity(dim: int, trunc: int) -> None:
    if dim ** trunc > CAPACITY_LIMIT:
        raise CapacityError(
            f"dense level-{trunc} tensor over dimension {dim} has {dim ** trunc} entries "
            f"(limit {CAPACITY_LIMIT})"
        )


@dataclass
class TruncatedTensorSeries:
    """Levels ``0..M`` of dense tensors over a ``dim``-dimensional base space."""

    dim: int
    trunc: int
    levels: list[np.ndarray]

    def __post_init__(self):
        if self.trunc < 0:
            raise ShapeError("truncation level must be nonnegative")
        _check_capacity(self.dim, self.trunc)
        if len(self.levels) != self.trunc + 1:
            raise ShapeError(f"expected {self.trunc + 1} levels, got {len(self.levels)}")
        fixed = []
        for m, lv in enumerate(self.levels):
            arr = np.asarray(lv, dtype=float).reshape(-1)
            if arr.size != self.dim ** m:
                raise ShapeError(f"level {m} must have {self.dim ** m} entries, got {arr.size}")
            fixed.append(arr)
        self.levels = fixed

    @property
    def scalar(self) -> float:
        return float(self.levels[0][0])

    def level(self, m: int) -> np.ndarray:
        """Level ``m`` reshaped to its natural ``(d, ..., d)`` form."""
        return self.levels[m].reshape((self.dim,) * m)

    def flatten(self) -> np.ndarray:
        """All levels concatenated level-major (the CSV layout)."""
        return np.concatenate(self.levels)

    def copy(self) -> "TruncatedTensorSeries":
        return TruncatedTensorSeries(self.dim, self.trunc, [lv.copy() for lv in self.levels])

    def allclose(self, other: "TruncatedTensorSeries", atol: float = 1e-12) -> bool:
        if self.dim != other.dim or self.trunc != other.trunc:
            return False
        return all(np.allclose(a, b, atol=atol, rtol=0.0) for a, b in zip(self.levels, other.levels))


def zero(dim: int, trunc: int) -> TruncatedTensorSeries:
    _check_capacity(dim, trunc)
    return TruncatedTensorSeries(dim, trunc, [np.zeros(dim ** m) for m in range(trunc + 1)])


def unit(dim: int, trunc: int) -> TruncatedTensorSeries:
    """The multiplicative identity ``(1, 0, 0, ...)``."""
    out = zero(dim, trunc)
    out.levels[0][0] = 1.0
    return out


def _require_compatible(a: TruncatedTensorSeries, b: TruncatedTensorSeries) -> None:
    if a.dim != b.dim:
        raise ShapeError(f"base dimensions differ: {a.dim} vs {b.dim}")
    if a.trunc != b.trunc:
        raise ShapeError(f"truncation levels differ: {a.trunc} vs {b.trunc}")


def algebra_mul(a: TruncatedTensorSeries, b: TruncatedTensorSeries) -> TruncatedTensorSeries:
    """Graded convolution product, truncated at the common level."""
    _require_compatible(a, b)
    out = zero(a.dim, a.trunc)
    for m in range(a.trunc + 1):
        acc = out.levels[m]
        for i in range(m + 1):
            acc += np.outer(a.levels[i], b.levels[m - i]).reshape(-1)
    return out


def tensor_exp(v: np.ndarray, trunc: int) -> TruncatedTensorSeries:
    """Tensor exponential ``v -> (v^(x)m / m!)_m`` truncated at ``trunc``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    out = unit(v.size, trunc)
    power = np.ones(1)
    for m in range(1, trunc + 1):
        power = np.outer(power, v).reshape(-1)
        out.levels[m] = power / math.factorial(m)
    return out


def scaled_power_lift(v: np.ndarray, coeffs: np.ndarray) -> TruncatedTensorSeries:
    """Algebra lift ``v -> (c_m v^(x)m)_m`` with caller-supplied level coefficients.

    With ``c_m = 1/m!`` this is :func:`tensor_exp`; other coefficient choices
    realize per-level rescalings of the lift.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    trunc = coeffs.size - 1
    out = zero(v.size, trunc)
    power = np.ones(1)
    out.levels[0][0] = coeffs[0]
    for m in range(1, trunc + 1):
        power = np.outer(power, v).reshape(-1)
        out.levels[m] = coeffs[m] * power
    return out


def inverse(a: TruncatedTensorSeries) -> TruncatedTensorSeries:
    """Multiplicative inverse; requires a nonzero scalar coefficient.

    Uses the geometric series ``a^{-1} = (1/a_0) sum_n (1 - a/a_0)^n``, which
    terminates at ``n = M`` because ``1 - a/a_0`` has no scalar part.
    """
    if a.scalar == 0.0:
        raise DomainError("series with zero scalar coefficient is not invertible")
    d, M = a.dim, a.trunc
    # n = 1 - a / a0 (zero scalar part)
    n = TruncatedTensorSeries(d, M, [-lv / a.scalar for lv in a.levels])
    n.levels[0][0] = 0.0
    out = unit(d, M)
    term = unit(d, M)
    for _ in range(M):
        term = algebra_mul(term, n)
        for m in range(M + 1):
            out.levels[m] += term.levels[m]
    for m in range(M + 1):
        out.levels[m] /= a.scalar
    return out


def inner(a: TruncatedTensorSeries, b: TruncatedTensorSeries) -> float:
    """Sum over levels of entrywise dot products."""
    _require_compatible(a, b)
    return float(sum(np.dot(x, y) for x, y in zip(a.levels, b.levels)))


@dataclass
class Rank1Element:
    """A rank-1 element of the truncated algebra in component form.

    Level ``m >= 1`` denotes the outer product of its ``m`` component vectors;
    level 0 is the ``scalar`` coefficient.  ``components[m - 1]`` holds the
    list of vectors for level ``m``.
    """

    dim: int
    trunc: int
    scalar: float
    components: list[list[np.ndarray]]

    def __post_init__(self):
        if len(self.components) != self.trunc:
            raise ShapeError(f"expected component lists for levels 1..{self.trunc}")
        fixed = []
        for m, vecs in enumerate(self.components, start=1):
            if len(vecs) != m:
                raise ShapeError(f"level {m} needs exactly {m} component vectors, got {len(vecs)}")
            vs = [np.asarray(v, dtype=float).reshape(-1) for v in vecs]
            for v in vs:
                if v.size != self.dim:
                    raise ShapeError(f"component vector has dimension {v.size}, expected {self.dim}")
            fixed.append(vs)
        self.components = fixed

    def level_components(self, m: int) -> list[np.ndarray]:
        return self.components[m - 1]


def densify(r: Rank1Element) -> TruncatedTensorSeries:
    """Expand a rank-1 element into dense levels (oracle/test helper)."""
    out = zero(r.dim, r.trunc)
    out.levels[0][0] = r.scalar
    for m in range(1, r.trunc + 1):
        acc = np.ones(1)
        for v in r.level_components(m):
            acc = np.outer(acc, v).reshape(-1)
        out.levels[m] = acc
    return out
