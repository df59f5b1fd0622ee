"""Dense matrices over an idempotent semifield.

Entries are stored as the max-plus image of each scalar in a read-only float
array, with ``-inf`` marking the semiring zero.  Nothing in the max-plus
image ever reaches ``+inf``, so ``-inf + x`` stays ``-inf`` and the absorbing
law holds without special cases in the kernels.
"""

from __future__ import annotations

from typing import Iterable, Iterator, Sequence

import numpy as np

from .semiring import (
    KindMismatchError,
    SemifieldKind,
    TropicalScalar,
    from_canonical,
    scalar,
)

__all__ = [
    "ShapeError",
    "TropicalMatrix",
    "TropicalVector",
    "mat_add",
    "mat_mul",
    "norm",
    "trace",
    "spectral_radius",
    "mat_power",
    "power_trajectory",
    "parse_matrix_text",
    "format_matrix_text",
]

NEG_INF = float("-inf")


class ShapeError(ValueError):
    pass


def _canonical_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if np.isnan(arr).any() or np.isposinf(arr).any():
        raise ValueError("canonical entries must be finite or -inf")
    arr.setflags(write=False)
    return arr


class TropicalMatrix:
    """Immutable dense matrix; ``values`` holds the max-plus image of every entry."""

    __slots__ = ("values", "kind")

    def __init__(self, values, kind: SemifieldKind = SemifieldKind.MAX_PLUS):
        arr = _canonical_array(values)
        if arr.ndim != 2:
            raise ShapeError(f"expected a 2-d array, got shape {arr.shape}")
        self.values = arr
        self.kind = kind

    # construction -----------------------------------------------------

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], kind: SemifieldKind = SemifieldKind.MAX_PLUS) -> "TropicalMatrix":
        """Build from native values; ``None``, ``"-inf"`` etc. denote zero."""
        rows = [list(r) for r in rows]
        if rows and len({len(r) for r in rows}) != 1:
            raise ShapeError("ragged rows")
        vals = [[scalar(x, kind).canonical for x in r] for r in rows]
        return cls(np.array(vals, dtype=float).reshape(len(rows), len(rows[0]) if rows else 0), kind)

    @classmethod
    def zeros(cls, rows: int, cols: int, kind: SemifieldKind = SemifieldKind.MAX_PLUS) -> "TropicalMatrix":
        return cls(np.full((rows, cols), NEG_INF), kind)

    @classmethod
    def identity(cls, n: int, kind: SemifieldKind = SemifieldKind.MAX_PLUS) -> "TropicalMatrix":
        vals = np.full((n, n), NEG_INF)
        np.fill_diagonal(vals, 0.0)
        return cls(vals, kind)

    @classmethod
    def diag(cls, entries: Iterable, kind: SemifieldKind = SemifieldKind.MAX_PLUS) -> "TropicalMatrix":
        d = [scalar(x, kind).canonical for x in entries]
        vals = np.full((len(d), len(d)), NEG_INF)
        np.fill_diagonal(vals, d)
        return cls(vals, kind)

    # basic protocol ---------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def entry(self, i: int, j: int) -> TropicalScalar:
        return TropicalScalar.from_canonical(float(self.values[i, j]), self.kind)

    def to_rows(self) -> list[list]:
        """Native values, ``None`` for zero."""
        return [[from_canonical(float(v), self.kind) for v in row] for row in self.values]

    @property
    def T(self) -> "TropicalMatrix":
        return TropicalMatrix(self.values.T.copy(), self.kind)

    def convert(self, kind: SemifieldKind) -> "TropicalMatrix":
        return TropicalMatrix(self.values, kind)

    def is_regular(self) -> bool:
        """Every row has at least one non-zero entry."""
        return bool(np.all(np.any(self.values > NEG_INF, axis=1)))

    def is_square(self) -> bool:
        return self.rows == self.cols

    def __eq__(self, other) -> bool:
        if not isinstance(other, TropicalMatrix):
            return NotImplemented
        return self.kind is other.kind and self.shape == other.shape and bool(np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.kind, self.values.tobytes(), self.shape))

    def allclose(self, other: "TropicalMatrix", rtol: float = 1e-9, atol: float = 1e-12) -> bool:
        a, b = self.values, other.values
        if a.shape != b.shape:
            return False
        fa, fb = np.isfinite(a), np.isfinite(b)
        if not np.array_equal(fa, fb):
            return False
        return bool(np.allclose(a[fa], b[fb], rtol=rtol, atol=atol))

    def __add__(self, other: "TropicalMatrix") -> "TropicalMatrix":
        return mat_add(self, other)

    def __matmul__(self, other):
        if isinstance(other, TropicalVector):
            return TropicalVector(mat_mul(self, other.as_matrix()).values[:, 0], self.kind)
        return mat_mul(self, other)

    def __mul__(self, x: TropicalScalar) -> "TropicalMatrix":
        return self.scale(x)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "TropicalMatrix":
        return mat_power(self, k)

    def scale(self, x: TropicalScalar) -> "TropicalMatrix":
        if x.kind is not self.kind:
            raise KindMismatchError("scalar and matrix kinds differ")
        return TropicalMatrix(self.values + x.canonical, self.kind)

    def norm(self) -> TropicalScalar:
        return norm(self)

    def trace(self) -> TropicalScalar:
        return trace(self)

    def spectral_radius(self) -> TropicalScalar:
        return spectral_radius(self)

    def __repr__(self) -> str:
        return f"TropicalMatrix({self.to_rows()!r}, kind={self.kind.value})"

    def __str__(self) -> str:
        return format_matrix_text(self)


class TropicalVector:
    """Column vector; multiplies like an ``n x 1`` matrix."""

    __slots__ = ("values", "kind")

    def __init__(self, values, kind: SemifieldKind = SemifieldKind.MAX_PLUS):
        arr = _canonical_array(values)
        if arr.ndim != 1:
            raise ShapeError("vector values must be 1-d")
        self.values = arr
        self.kind = kind

    @classmethod
    def from_values(cls, entries: Iterable, kind: SemifieldKind = SemifieldKind.MAX_PLUS) -> "TropicalVector":
        return cls([scalar(x, kind).canonical for x in entries], kind)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def entry(self, i: int) -> TropicalScalar:
        return TropicalScalar.from_canonical(float(self.values[i]), self.kind)

    def to_list(self) -> list:
        return [from_canonical(float(v), self.kind) for v in self.values]

    def as_matrix(self) -> TropicalMatrix:
        return TropicalMatrix(self.values.reshape(-1, 1), self.kind)

    def norm(self) -> TropicalScalar:
        return norm(self.as_matrix())

    def __eq__(self, other) -> bool:
        if not isinstance(other, TropicalVector):
            return NotImplemented
        return self.kind is other.kind and bool(np.array_equal(self.values, other.values))

    def __repr__(self) -> str:
        return f"TropicalVector({self.to_list()!r}, kind={self.kind.value})"


def _same_kind(a: TropicalMatrix, b: TropicalMatrix) -> None:
    if a.kind is not b.kind:
        raise KindMismatchError(f"cannot combine {a.kind.value} with {b.kind.value} matrices")


def mat_add(a: TropicalMatrix, b: TropicalMatrix) -> TropicalMatrix:
    _same_kind(a, b)
    if a.shape != b.shape:
        raise ShapeError(f"cannot add {a.shape} and {b.shape}")
    return TropicalMatrix(np.maximum(a.values, b.values), a.kind)


def maxplus_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Max-plus product of two canonical float arrays."""
    if a.shape[1] == 0:
        return np.full((a.shape[0], b.shape[1]), NEG_INF)
    return (a[:, :, None] + b[None, :, :]).max(axis=1)


def mat_mul(b: TropicalMatrix, c: TropicalMatrix) -> TropicalMatrix:
    _same_kind(b, c)
    if b.cols != c.rows:
        raise ShapeError(f"cannot multiply {b.shape} by {c.shape}")
    return TropicalMatrix(maxplus_product(b.values, c.values), b.kind)


def norm(a: TropicalMatrix) -> TropicalScalar:
    if a.values.size == 0:
        raise ShapeError("norm of an empty matrix")
    return TropicalScalar.from_canonical(float(a.values.max()), a.kind)


def trace(a: TropicalMatrix) -> TropicalScalar:
    if not a.is_square():
        raise ShapeError(f"trace needs a square matrix, got {a.shape}")
    if a.rows == 0:
        return TropicalScalar(None, a.kind)
    return TropicalScalar.from_canonical(float(np.diagonal(a.values).max()), a.kind)


def power_trajectory(a: TropicalMatrix, k: int) -> Iterator[TropicalMatrix]:
    """Yield ``A^1, ..., A^k`` by repeated multiplication."""
    if not a.is_square():
        raise ShapeError("powers need a square matrix")
    current = a.values
    for step in range(1, k + 1):
        if step > 1:
            current = maxplus_product(current, a.values)
        yield TropicalMatrix(current, a.kind)


def mat_power(a: TropicalMatrix, k: int) -> TropicalMatrix:
    if not a.is_square():
        raise ShapeError("powers need a square matrix")
    if k < 0:
        raise ValueError("negative matrix power")
    result = TropicalMatrix.identity(a.rows, a.kind)
    for result in power_trajectory(a, k):
        pass
    return result


def spectral_radius(a: TropicalMatrix) -> TropicalScalar:
    """Largest eigenvalue, as the sum over m of the m-th roots of tr(A^m)."""
    if not a.is_square():
        raise ShapeError("spectral radius needs a square matrix")
    best = NEG_INF
    for m, am in enumerate(power_trajectory(a, a.rows), start=1):
        tr = float(np.diagonal(am.values).max())
        if tr > NEG_INF:
            best = max(best, tr / m)
    return TropicalScalar.from_canonical(best, a.kind)


def parse_matrix_text(text: str, kind: SemifieldKind = SemifieldKind.MAX_PLUS) -> TropicalMatrix:
    """Parse whitespace-separated rows; ``-inf`` (or ``+inf`` for min kinds) is zero."""
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    if not rows:
        raise ValueError("empty matrix literal")
    return TropicalMatrix.from_rows(rows, kind)


def format_matrix_text(a: TropicalMatrix) -> str:
    lines = []
    for i in range(a.rows):
        lines.append(" ".join(str(a.entry(i, j)) for j in range(a.cols)))
    return "\n".join(lines)

