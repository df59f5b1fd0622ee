"""Idempotent semifield scalars.

Four isomorphic semifields are supported. Arithmetic always happens on the
max-plus image of a scalar (the canonical representation); the other kinds
only differ in how values are read in and written out:

    kind        zero    one   plus  times   canonical image of x
    MAX_PLUS    -inf    0     max   +       x
    MIN_PLUS    +inf    0     min   +       -x
    MAX_TIMES   0       1     max   *       log(x)
    MIN_TIMES   +inf    1     min   *       -log(x)

The semiring zero is a dedicated value (``value is None``), never an IEEE
infinity, so ``zero * x == zero`` cannot produce ``nan``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

__all__ = [
    "SemifieldKind",
    "TropicalScalar",
    "KindMismatchError",
    "UndefinedPowerError",
    "DomainError",
    "zero",
    "one",
    "scalar",
    "oplus",
    "otimes",
    "power",
    "convert",
    "to_canonical",
    "from_canonical",
]

NEG_INF = float("-inf")
# exp() stays a normal float64 within this range
EXP_LIMIT = 708.0


class KindMismatchError(TypeError):
    """Operands belong to different semifields."""


class UndefinedPowerError(ValueError):
    """Zero raised to a non-positive exponent."""


class DomainError(ValueError):
    """Value outside the carrier set of the requested semifield."""


class SemifieldKind(enum.Enum):
    MAX_PLUS = "maxplus"
    MIN_PLUS = "minplus"
    MAX_TIMES = "maxtimes"
    MIN_TIMES = "mintimes"

    @classmethod
    def parse(cls, text: str) -> "SemifieldKind":
        key = text.strip().lower().replace("-", "").replace("_", "").replace(",", "")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown semifield kind {text!r}")


def to_canonical(value: Optional[float], kind: SemifieldKind) -> float:
    """Map a native value (None for zero) to its max-plus image (-inf for zero)."""
    if value is None:
        return NEG_INF
    value = float(value)
    if math.isnan(value) or math.isinf(value):
        raise DomainError(f"{value!r} is not a finite element of {kind.value}")
    if kind is SemifieldKind.MAX_PLUS:
        return value
    if kind is SemifieldKind.MIN_PLUS:
        return -value
    if value <= 0.0:
        raise DomainError(f"{kind.value} requires positive finite values, got {value!r}")
    if kind is SemifieldKind.MAX_TIMES:
        return math.log(value)
    return -math.log(value)


def from_canonical(v: float, kind: SemifieldKind) -> Optional[float]:
    """Inverse of :func:`to_canonical`; returns None for the zero element."""
    if v == NEG_INF:
        return None
    if kind is SemifieldKind.MAX_PLUS:
        return v
    if kind is SemifieldKind.MIN_PLUS:
        return -v
    if abs(v) > EXP_LIMIT:
        raise DomainError(f"{v!r} has no normal float64 image in {kind.value}")
    if kind is SemifieldKind.MAX_TIMES:
        return math.exp(v)
    return math.exp(-v)


@dataclass(frozen=True)
class TropicalScalar:
    """Element of an idempotent semifield.

    ``value`` is the native value in ``kind`` (e.g. 3.0 in min-plus means the
    real number 3); ``None`` stands for the semiring zero.
    """

    value: Optional[float]
    kind: SemifieldKind = SemifieldKind.MAX_PLUS

    def __post_init__(self):
        if self.value is not None:
            # validates the carrier set
            to_canonical(self.value, self.kind)
            object.__setattr__(self, "value", float(self.value))

    @property
    def is_zero(self) -> bool:
        return self.value is None

    @property
    def canonical(self) -> float:
        return to_canonical(self.value, self.kind)

    @classmethod
    def from_canonical(cls, v: float, kind: SemifieldKind = SemifieldKind.MAX_PLUS) -> "TropicalScalar":
        return cls(from_canonical(v, kind), kind)

    def __add__(self, other: "TropicalScalar") -> "TropicalScalar":
        return oplus(self, other)

    def __mul__(self, other: "TropicalScalar") -> "TropicalScalar":
        return otimes(self, other)

    def __pow__(self, y: float) -> "TropicalScalar":
        return power(self, y)

    def __le__(self, other: "TropicalScalar") -> bool:
        _check_kind(self, other)
        return self.canonical <= other.canonical

    def __lt__(self, other: "TropicalScalar") -> bool:
        _check_kind(self, other)
        return self.canonical < other.canonical

    def __ge__(self, other: "TropicalScalar") -> bool:
        return other <= self

    def __gt__(self, other: "TropicalScalar") -> bool:
        return other < self

    def inverse(self) -> "TropicalScalar":
        return power(self, -1)

    def __str__(self) -> str:
        if self.value is None:
            return "0" if self.kind is SemifieldKind.MAX_TIMES else (
                "-inf" if self.kind is SemifieldKind.MAX_PLUS else "+inf")
        return repr(self.value)


def zero(kind: SemifieldKind = SemifieldKind.MAX_PLUS) -> TropicalScalar:
    return TropicalScalar(None, kind)


def one(kind: SemifieldKind = SemifieldKind.MAX_PLUS) -> TropicalScalar:
    return TropicalScalar.from_canonical(0.0, kind)


def scalar(text_or_value, kind: SemifieldKind = SemifieldKind.MAX_PLUS) -> TropicalScalar:
    """Build a scalar from a number or a token such as ``"-inf"``."""
    if isinstance(text_or_value, TropicalScalar):
        return convert(text_or_value, kind)
    if isinstance(text_or_value, str):
        token = text_or_value.strip().lower()
        if token in ("-inf", "+inf", "inf", "zero"):
            return zero(kind)
        text_or_value = float(token)
    if text_or_value is None:
        return zero(kind)
    value = float(text_or_value)
    if math.isinf(value):
        expected = NEG_INF if kind is SemifieldKind.MAX_PLUS else float("inf")
        if value != expected:
            raise DomainError(f"{value} is not the zero of {kind.value}")
        return zero(kind)
    if kind is SemifieldKind.MAX_TIMES and value == 0.0:
        return zero(kind)
    return TropicalScalar(value, kind)


def _check_kind(x: TropicalScalar, y: TropicalScalar) -> None:
    if x.kind is not y.kind:
        raise KindMismatchError(f"cannot combine {x.kind.value} with {y.kind.value}")


def oplus(x: TropicalScalar, y: TropicalScalar) -> TropicalScalar:
    _check_kind(x, y)
    return x if x.canonical >= y.canonical else y


def otimes(x: TropicalScalar, y: TropicalScalar) -> TropicalScalar:
    _check_kind(x, y)
    if x.is_zero or y.is_zero:
        return zero(x.kind)
    return TropicalScalar.from_canonical(x.canonical + y.canonical, x.kind)


def power(x: TropicalScalar, y: float) -> TropicalScalar:
    """``x`` raised to the real power ``y`` (``x * y`` in max-plus terms)."""
    if x.is_zero:
        if y <= 0:
            raise UndefinedPowerError(f"zero raised to {y} is undefined")
        return x
    if y == 0:
        return one(x.kind)
    return TropicalScalar.from_canonical(x.canonical * y, x.kind)


def convert(x: TropicalScalar, target: SemifieldKind) -> TropicalScalar:
    if x.kind is target:
        return x
    return TropicalScalar.from_canonical(x.canonical, target)
