"""Symbolic max-plus expressions over service times.

A :class:`ServiceExpr` is kept in a reduced normal form: a set of monomials,
each a constant plus a multiset of service-time leaves ``(node, lag)``, read as

    expr = max over monomials of (const + sum of the leaf values).

Service times are nonnegative (they are >= the semiring one), so a monomial
whose leaves are a sub-multiset of another monomial's leaves and whose constant
is not larger can never attain the maximum.  Such monomials are dropped.  This
absorption is what turns ``t2 (+) t2 t3`` into ``t2 t3``.

Leaf ``(i, lag)`` denotes the service time of node ``i`` at cycle ``k + lag``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

__all__ = ["Leaf", "Monomial", "ServiceExpr", "ExprMatrix", "tau", "const", "ZERO", "ONE"]

NEG_INF = float("-inf")

Leaf = tuple  # (node, lag)


@dataclass(frozen=True, order=True)
class Monomial:
    const: float
    leaves: tuple  # sorted tuple of (node, lag), repeated for powers

    def times(self, other: "Monomial") -> "Monomial":
        return Monomial(self.const + other.const, tuple(sorted(self.leaves + other.leaves)))

    def divides(self, other: "Monomial") -> bool:
        """True if ``other / self`` is again a monomial (leaf containment)."""
        mine, theirs = Counter(self.leaves), Counter(other.leaves)
        return all(theirs[leaf] >= c for leaf, c in mine.items())

    def quotient(self, divisor: "Monomial") -> Optional["Monomial"]:
        rest = Counter(self.leaves)
        rest.subtract(divisor.leaves)
        if any(c < 0 for c in rest.values()):
            return None
        return Monomial(self.const - divisor.const, tuple(sorted(rest.elements())))

    def dominated_by(self, other: "Monomial") -> bool:
        return self.const <= other.const and self.divides(other)

    def shift(self, lag: int) -> "Monomial":
        return Monomial(self.const, tuple(sorted((n, l + lag) for n, l in self.leaves)))

    def __str__(self) -> str:
        parts = [_leaf_str(leaf) for leaf in self.leaves]
        if self.const != 0.0 or not parts:
            c = self.const
            parts.insert(0, repr(int(c)) if float(c).is_integer() else repr(c))
        return "*".join(parts)


def _leaf_str(leaf) -> str:
    node, lag = leaf
    return f"t{node}" + ("'" * lag if lag <= 2 else f"[+{lag}]")


def _reduce(monos: Iterable[Monomial]) -> frozenset:
    best: dict[tuple, float] = {}
    for m in monos:
        if m.const == NEG_INF:
            continue
        prev = best.get(m.leaves)
        if prev is None or m.const > prev:
            best[m.leaves] = m.const
    cands = sorted((Monomial(c, leaves) for leaves, c in best.items()), key=lambda m: -len(m.leaves))
    kept: list[Monomial] = []
    for m in cands:
        if not any(m.dominated_by(k) for k in kept):
            kept.append(m)
    return frozenset(kept)


class ServiceExpr:
    """Immutable tropical polynomial over service-time leaves.

    ``+`` is the semiring sum (max) and ``*`` the semiring product (+).
    """

    __slots__ = ("monomials", "_hash")

    def __init__(self, monomials: Iterable[Monomial] = ()):
        object.__setattr__(self, "monomials", _reduce(monomials))
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, name, value):
        raise AttributeError("ServiceExpr is immutable")

    # constructors ---------------------------------------------------------

    @staticmethod
    def zero() -> "ServiceExpr":
        return ZERO

    @staticmethod
    def one() -> "ServiceExpr":
        return ONE

    @staticmethod
    def const(c: float) -> "ServiceExpr":
        if c == NEG_INF or c is None:
            return ZERO
        return ServiceExpr([Monomial(float(c), ())])

    @staticmethod
    def tau(node: int, lag: int = 0) -> "ServiceExpr":
        if lag < 0:
            raise ValueError("lag must be nonnegative")
        return ServiceExpr([Monomial(0.0, ((int(node), int(lag)),))])

    # algebra --------------------------------------------------------------

    def __add__(self, other: "ServiceExpr") -> "ServiceExpr":
        if not isinstance(other, ServiceExpr):
            return NotImplemented
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        return ServiceExpr(self.monomials | other.monomials)

    def __mul__(self, other: "ServiceExpr") -> "ServiceExpr":
        if not isinstance(other, ServiceExpr):
            return NotImplemented
        if self.is_zero or other.is_zero:
            return ZERO
        return ServiceExpr(a.times(b) for a in self.monomials for b in other.monomials)

    oplus = __add__
    otimes = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, ServiceExpr):
            return NotImplemented
        return self.monomials == other.monomials

    def __hash__(self) -> int:
        if self._hash is None:
            object.__setattr__(self, "_hash", hash(self.monomials))
        return self._hash

    # inspection -----------------------------------------------------------

    @property
    def is_zero(self) -> bool:
        return not self.monomials

    @property
    def is_monomial(self) -> bool:
        return len(self.monomials) == 1

    @property
    def is_constant(self) -> bool:
        return all(not m.leaves for m in self.monomials)

    def constant_value(self) -> float:
        """Value of a leaf-free expression (``-inf`` for zero)."""
        if not self.is_constant:
            raise ValueError(f"{self} depends on service times")
        return max((m.const for m in self.monomials), default=NEG_INF)

    def leaves(self) -> frozenset:
        return frozenset(leaf for m in self.monomials for leaf in m.leaves)

    def sorted_monomials(self) -> list[Monomial]:
        return sorted(self.monomials, key=lambda m: (m.leaves, m.const))

    def max_lag(self) -> int:
        return max((lag for _, lag in self.leaves()), default=0)

    def shift(self, lag: int) -> "ServiceExpr":
        """Move every leaf ``lag`` cycles later."""
        if lag == 0 or self.is_zero:
            return self
        return ServiceExpr(m.shift(lag) for m in self.monomials)

    def substitute(self, values: Mapping) -> "ServiceExpr":
        """Replace the leaves found in ``values`` (keyed by leaf or by node) with constants."""
        out = []
        for m in self.monomials:
            c, keep = m.const, []
            for leaf in m.leaves:
                if leaf in values:
                    c += values[leaf]
                elif leaf[0] in values:
                    c += values[leaf[0]]
                else:
                    keep.append(leaf)
            out.append(Monomial(c, tuple(keep)))
        return ServiceExpr(out)

    def evaluate(self, assignment: Callable | Mapping) -> float:
        """Numeric value under ``assignment(leaf)`` (or a mapping); ``-inf`` for zero."""
        get = assignment if callable(assignment) else assignment.__getitem__
        best = NEG_INF
        for m in self.monomials:
            v = m.const + sum(get(leaf) for leaf in m.leaves)
            if v > best:
                best = v
        return best

    def evaluate_array(self, get: Callable, size: int) -> np.ndarray:
        """Vectorised evaluation; ``get(leaf)`` returns an array of length ``size``."""
        out = np.full(size, NEG_INF)
        for m in self.monomials:
            v = np.full(size, m.const)
            for leaf in m.leaves:
                v = v + get(leaf)
            np.maximum(out, v, out=out)
        return out

    # division and order ---------------------------------------------------

    def leq(self, other: "ServiceExpr") -> bool:
        """Sufficient test for ``self <= other`` at every nonnegative assignment."""
        return all(any(m.dominated_by(o) for o in other.monomials) for m in self.monomials)

    def divide(self, divisor: "ServiceExpr") -> Optional["ServiceExpr"]:
        """Exact quotient ``q`` with ``q * divisor == self``, or None."""
        if divisor.is_zero:
            return None
        if self.is_zero:
            return ZERO
        if divisor.is_monomial:
            (d,) = divisor.monomials
            parts = [m.quotient(d) for m in self.monomials]
            if any(p is None for p in parts):
                return None
            q = ServiceExpr(parts)
            return q if q * divisor == self else None
        for p in self.sorted_monomials():
            for d in divisor.sorted_monomials():
                mono = p.quotient(d)
                if mono is not None:
                    q = ServiceExpr([mono])
                    if q * divisor == self:
                        return q
        return None

    def common_factor(self) -> "ServiceExpr":
        """Largest leaf monomial dividing every monomial (``one`` if none)."""
        if self.is_zero:
            return ONE
        counters = [Counter(m.leaves) for m in self.monomials]
        common = counters[0]
        for c in counters[1:]:
            common = common & c
        return ServiceExpr([Monomial(0.0, tuple(sorted(common.elements())))])

    def __str__(self) -> str:
        if self.is_zero:
            return "-inf"
        return " + ".join(str(m) for m in self.sorted_monomials())

    def __repr__(self) -> str:
        return f"ServiceExpr({self})"


ZERO = ServiceExpr()
ONE = ServiceExpr([Monomial(0.0, ())])


def tau(node: int, lag: int = 0) -> ServiceExpr:
    return ServiceExpr.tau(node, lag)


def const(c: float) -> ServiceExpr:
    return ServiceExpr.const(c)


class ExprMatrix:
    """Dense matrix of :class:`ServiceExpr` entries (max-plus, symbolic)."""

    __slots__ = ("entries",)

    def __init__(self, entries: Sequence[Sequence[ServiceExpr]]):
        rows = tuple(tuple(_as_expr(e) for e in row) for row in entries)
        if rows and len({len(r) for r in rows}) != 1:
            raise ValueError("ragged rows")
        object.__setattr__(self, "entries", rows)

    def __setattr__(self, name, value):
        raise AttributeError("ExprMatrix is immutable")

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "ExprMatrix":
        return cls([[ZERO] * cols for _ in range(rows)])

    @classmethod
    def identity(cls, n: int) -> "ExprMatrix":
        return cls([[ONE if i == j else ZERO for j in range(n)] for i in range(n)])

    @classmethod
    def diag(cls, exprs: Sequence[ServiceExpr]) -> "ExprMatrix":
        n = len(exprs)
        return cls([[exprs[i] if i == j else ZERO for j in range(n)] for i in range(n)])

    @classmethod
    def from_constants(cls, values) -> "ExprMatrix":
        """From a canonical float array (``-inf`` for zero)."""
        return cls([[const(float(v)) for v in row] for row in np.asarray(values, dtype=float)])

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.entries), len(self.entries[0]) if self.entries else 0)

    @property
    def rows(self) -> int:
        return self.shape[0]

    @property
    def cols(self) -> int:
        return self.shape[1]

    def __getitem__(self, ij) -> ServiceExpr:
        i, j = ij
        return self.entries[i][j]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExprMatrix):
            return NotImplemented
        return self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    @property
    def T(self) -> "ExprMatrix":
        return ExprMatrix([list(col) for col in zip(*self.entries)]) if self.entries else self

    def __add__(self, other: "ExprMatrix") -> "ExprMatrix":
        if self.shape != other.shape:
            raise ValueError(f"cannot add {self.shape} and {other.shape}")
        return ExprMatrix([[a + b for a, b in zip(r, s)] for r, s in zip(self.entries, other.entries)])

    def __matmul__(self, other: "ExprMatrix") -> "ExprMatrix":
        if self.cols != other.rows:
            raise ValueError(f"cannot multiply {self.shape} by {other.shape}")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = ZERO
                for k in range(self.cols):
                    a, b = self.entries[i][k], other.entries[k][j]
                    if not a.is_zero and not b.is_zero:
                        acc = acc + a * b
                row.append(acc)
            out.append(row)
        return ExprMatrix(out)

    def __pow__(self, k: int) -> "ExprMatrix":
        if self.rows != self.cols:
            raise ValueError("powers need a square matrix")
        result = ExprMatrix.identity(self.rows)
        for _ in range(k):
            result = result @ self
        return result

    def scale(self, e: ServiceExpr) -> "ExprMatrix":
        return ExprMatrix([[e * x for x in row] for row in self.entries])

    def shift(self, lag: int) -> "ExprMatrix":
        return ExprMatrix([[x.shift(lag) for x in row] for row in self.entries])

    def substitute(self, values: Mapping) -> "ExprMatrix":
        return ExprMatrix([[x.substitute(values) for x in row] for row in self.entries])

    def leaves(self) -> frozenset:
        return frozenset().union(*(x.leaves() for row in self.entries for x in row))

    def max_lag(self) -> int:
        return max((x.max_lag() for row in self.entries for x in row), default=0)

    def zero_pattern(self) -> np.ndarray:
        """Boolean array, True where the entry is the semiring zero."""
        return np.array([[x.is_zero for x in row] for row in self.entries], dtype=bool).reshape(self.shape)

    def is_constant(self) -> bool:
        return all(x.is_constant for row in self.entries for x in row)

    def constant_values(self) -> np.ndarray:
        return np.array([[x.constant_value() for x in row] for row in self.entries], dtype=float).reshape(self.shape)

    def evaluate(self, assignment) -> np.ndarray:
        return np.array([[x.evaluate(assignment) for x in row] for row in self.entries], dtype=float).reshape(self.shape)

    def block(self, rows: Sequence[int], cols: Sequence[int]) -> "ExprMatrix":
        return ExprMatrix([[self.entries[i][j] for j in cols] for i in rows])

    def __str__(self) -> str:
        cells = [[str(x) for x in row] for row in self.entries]
        width = max((len(c) for row in cells for c in row), default=1)
        return "\n".join("  ".join(c.rjust(width) for c in row) for row in cells)

    def __repr__(self) -> str:
        return f"ExprMatrix({[[str(x) for x in row] for row in self.entries]!r})"


def _as_expr(x) -> ServiceExpr:
    if isinstance(x, ServiceExpr):
        return x
    if x is None:
        return ZERO
    return const(float(x))
