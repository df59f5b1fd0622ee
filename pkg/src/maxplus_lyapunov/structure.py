"""Structural classification and low-rank factorisations.

The routines here work on two kinds of matrices: numeric
:class:`~maxplus_lyapunov.matrix.TropicalMatrix` values and symbolic
:class:`~maxplus_lyapunov.expr.ExprMatrix` values.  Both are reduced to a
list-of-lists of entries plus a small algebra object that knows how to add,
multiply, residuate and compare entries of that kind.

Skeleton decompositions are found by a column-basis search: a column is
dropped while it is a max-plus combination of the remaining ones, with the
combination coefficients taken from the residuation ("max of differences")
construction, checked exactly, and then thinned by dropping coefficients
that are not needed.  Applying the same search to the
transpose gives a row basis.  On symbolic entries the residual is only
computed when it is an exact polynomial quotient, so the symbolic search can
miss factorisations; it never returns a wrong one.
"""

from __future__ import annotations

import enum
import graphlib
import itertools
from collections import Counter
from dataclasses import dataclass
from typing import Any, Optional, Sequence, Union

import numpy as np

from .expr import ONE, ZERO, ExprMatrix, Monomial, ServiceExpr
from .matrix import TropicalMatrix, TropicalVector

__all__ = [
    "MatrixType",
    "MatrixClass",
    "SkeletonDecomposition",
    "classify",
    "rank_one_factorize",
    "skeleton_decompose",
    "skeleton_candidates",
    "is_backward_triangular",
    "triangular_permutation",
    "factors_independent",
]

NEG_INF = float("-inf")
REL_TOL = 1e-9

AnyMatrix = Union[TropicalMatrix, ExprMatrix]


class _Numeric:
    zero = NEG_INF
    one = 0.0

    @staticmethod
    def is_zero(a) -> bool:
        return a == NEG_INF

    @staticmethod
    def add(a, b):
        return a if a >= b else b

    @staticmethod
    def mul(a, b):
        return a + b

    @staticmethod
    def residual(a, b):
        """Largest ``q`` with ``q * b <= a`` (``b`` non-zero)."""
        return NEG_INF if a == NEG_INF else a - b

    @staticmethod
    def meet(a, b):
        return a if a <= b else b

    @staticmethod
    def divide(a, b):
        return NEG_INF if a == NEG_INF else a - b

    @staticmethod
    def eq(a, b) -> bool:
        if a == b:
            return True
        if a == NEG_INF or b == NEG_INF:
            return False
        return abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


class _Symbolic:
    zero = ZERO
    one = ONE

    @staticmethod
    def is_zero(a) -> bool:
        return a.is_zero

    @staticmethod
    def add(a, b):
        return a + b

    @staticmethod
    def mul(a, b):
        return a * b

    @staticmethod
    def residual(a, b):
        # exact quotients only; anything else falls back to zero, which keeps
        # the combination below the target and lets verification decide
        if a.is_zero:
            return ZERO
        q = a.divide(b)
        return ZERO if q is None else q

    @staticmethod
    def meet(a, b):
        if a.leq(b):
            return a
        if b.leq(a):
            return b
        return ZERO

    @staticmethod
    def divide(a, b):
        return a.divide(b)

    @staticmethod
    def eq(a, b) -> bool:
        return a == b


def _unpack(a: AnyMatrix):
    if isinstance(a, TropicalMatrix):
        return [[float(x) for x in row] for row in a.values], _Numeric
    if isinstance(a, ExprMatrix):
        return [list(row) for row in a.entries], _Symbolic
    raise TypeError(f"unsupported matrix type {type(a).__name__}")


def _pack(rows, like: AnyMatrix, n_rows: int, n_cols: int) -> AnyMatrix:
    if isinstance(like, TropicalMatrix):
        vals = np.array(rows, dtype=float).reshape(n_rows, n_cols)
        return TropicalMatrix(vals, like.kind)
    if n_rows == 0 or n_cols == 0:
        return ExprMatrix.zeros(n_rows, n_cols) if n_rows else ExprMatrix([])
    return ExprMatrix(rows)


def _transpose(rows):
    return [list(c) for c in zip(*rows)]


# classification ------------------------------------------------------------


class MatrixType(enum.Enum):
    DIAGONAL = "diagonal"
    TRIANGULAR_LOWER = "triangular_lower"
    TRIANGULAR_UPPER = "triangular_upper"
    TRIANGULAR_PERMUTED = "triangular_permuted"
    SIMILARITY = "similarity"
    RANK_ONE = "rank_one"
    GENERAL = "general"

    @property
    def is_triangular(self) -> bool:
        return self in (MatrixType.DIAGONAL, MatrixType.TRIANGULAR_LOWER,
                        MatrixType.TRIANGULAR_UPPER, MatrixType.TRIANGULAR_PERMUTED)


@dataclass(frozen=True)
class MatrixClass:
    tag: MatrixType
    permutation: Optional[tuple[int, ...]] = None
    coefficient: Any = None
    u: Any = None
    v: Any = None

    def __str__(self) -> str:
        extra = ""
        if self.permutation is not None:
            extra = f" perm={list(self.permutation)}"
        elif self.coefficient is not None:
            extra = f" alpha={self.coefficient}"
        return self.tag.value + extra


def _zero_pattern(rows, alg) -> np.ndarray:
    return np.array([[alg.is_zero(x) for x in row] for row in rows], dtype=bool)


def triangular_permutation(a) -> Optional[tuple[int, ...]]:
    """Ordering ``p`` such that ``A[p][:, p]`` is lower triangular, or None.

    Accepts a matrix or a boolean zero pattern.  Such an ordering exists iff
    the digraph of non-zero off-diagonal entries is acyclic.
    """
    if isinstance(a, np.ndarray) and a.dtype == bool:
        zero = a
    else:
        rows, alg = _unpack(a)
        zero = _zero_pattern(rows, alg)
    n = zero.shape[0]
    graph = {i: {j for j in range(n) if j != i and not zero[i, j]} for i in range(n)}
    try:
        order = tuple(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError:
        return None
    return order


def _column_norms(rows, alg):
    n_cols = len(rows[0])
    out = []
    for j in range(n_cols):
        acc = alg.zero
        for row in rows:
            acc = alg.add(acc, row[j])
        out.append(acc)
    return out


def classify(a: AnyMatrix) -> MatrixClass:
    """Most specific structural type of a square matrix.

    Priority: diagonal, triangular (lower, upper, then under a simultaneous
    permutation), similarity, rank one, general.  Triangularity is decided on
    the zero pattern only; similarity and rank one compare values (relative
    tolerance 1e-9 for numeric matrices, normal-form equality for symbolic).
    """
    rows, alg = _unpack(a)
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ValueError("classify needs a non-empty square matrix")
    zero = _zero_pattern(rows, alg)
    off = ~zero & ~np.eye(n, dtype=bool)
    if not off.any():
        return MatrixClass(MatrixType.DIAGONAL)
    if not np.triu(off, 1).any():
        return MatrixClass(MatrixType.TRIANGULAR_LOWER)
    if not np.tril(off, -1).any():
        return MatrixClass(MatrixType.TRIANGULAR_UPPER)
    perm = triangular_permutation(zero)
    if perm is not None:
        return MatrixClass(MatrixType.TRIANGULAR_PERMUTED, permutation=perm)
    norms = _column_norms(rows, alg)
    if not alg.is_zero(norms[0]) and all(alg.eq(norms[0], x) for x in norms[1:]):
        alpha = norms[0]
        if isinstance(a, TropicalMatrix):
            alpha = TropicalMatrix([[alpha]], a.kind).entry(0, 0)
        return MatrixClass(MatrixType.SIMILARITY, coefficient=alpha)
    factors = rank_one_factorize(a)
    if factors is not None:
        return MatrixClass(MatrixType.RANK_ONE, u=factors[0], v=factors[1])
    return MatrixClass(MatrixType.GENERAL)


# rank one ----------------------------------------------------------------


def _rank_one_from(rows, alg, nz_rows, nz_cols, use_column: bool, pivot: int):
    if use_column:
        u = {i: rows[i][pivot] for i in nz_rows}
        ref = nz_rows[0]
        v = {}
        for j in nz_cols:
            q = alg.divide(rows[ref][j], u[ref])
            if q is None:
                return None
            v[j] = q
    else:
        v = {j: rows[pivot][j] for j in nz_cols}
        ref = nz_cols[0]
        u = {}
        for i in nz_rows:
            q = alg.divide(rows[i][ref], v[ref])
            if q is None:
                return None
            u[i] = q
    for i in nz_rows:
        for j in nz_cols:
            if not alg.eq(alg.mul(u[i], v[j]), rows[i][j]):
                return None
    return u, v


def rank_one_factorize(a: AnyMatrix):
    """Factors ``(u, v)`` with ``A = u v^T``, or None.

    Numeric factors are :class:`TropicalVector` values normalised so the first
    non-zero entry of ``u`` is the semiring one.  Symbolic factors are tuples
    of :class:`ServiceExpr`; the largest leaf monomial common to all entries of
    ``u`` is moved into ``v``.
    """
    rows, alg = _unpack(a)
    if not rows or not rows[0]:
        return None
    zero = _zero_pattern(rows, alg)
    nz_rows = [i for i in range(len(rows)) if not zero[i].all()]
    nz_cols = [j for j in range(len(rows[0])) if not zero[:, j].all()]
    if not nz_rows:
        return None
    # a rank-one matrix has a full cross of non-zero entries
    if zero[np.ix_(nz_rows, nz_cols)].any():
        return None
    found = None
    for pivot in nz_cols:
        found = _rank_one_from(rows, alg, nz_rows, nz_cols, True, pivot)
        if found:
            break
    if not found:
        for pivot in nz_rows:
            found = _rank_one_from(rows, alg, nz_rows, nz_cols, False, pivot)
            if found:
                break
    if not found:
        return None
    u_map, v_map = found
    u = [u_map.get(i, alg.zero) for i in range(len(rows))]
    v = [v_map.get(j, alg.zero) for j in range(len(rows[0]))]
    if isinstance(a, TropicalMatrix):
        shift = u[nz_rows[0]]
        u = [x - shift for x in u]
        v = [x + shift for x in v]
        return TropicalVector(u, a.kind), TropicalVector(v, a.kind)
    g = ONE
    first = True
    for i in nz_rows:
        f = u[i].common_factor()
        g = f if first else _common(g, f)
        first = False
    if g != ONE:
        u = [x if x.is_zero else x.divide(g) for x in u]
        v = [x if x.is_zero else x * g for x in v]
    return tuple(u), tuple(v)


def _common(a: ServiceExpr, b: ServiceExpr) -> ServiceExpr:
    (ma,), (mb,) = a.monomials, b.monomials
    shared = Counter(ma.leaves) & Counter(mb.leaves)
    return ServiceExpr([Monomial(0.0, tuple(sorted(shared.elements())))])


# skeleton decompositions ---------------------------------------------------


@dataclass(frozen=True)
class SkeletonDecomposition:
    """``A = B C`` with inner dimension ``r`` smaller than the order of ``A``."""

    B: Any
    C: Any
    backward_triangular: bool
    basis: tuple[int, ...] = ()
    by_rows: bool = False
    pulled: tuple[int, ...] = ()

    @property
    def inner_dim(self) -> int:
        return self.B.shape[1]

    def product(self):
        return self.B @ self.C

    def backward_product(self):
        return self.C @ self.B


def _represents(target, basis, coefs, alg) -> bool:
    combo = [alg.zero] * len(target)
    for c, b in zip(coefs, basis):
        if alg.is_zero(c):
            continue
        combo = [alg.add(x, alg.mul(c, y)) for x, y in zip(combo, b)]
    return all(alg.eq(x, t) for x, t in zip(combo, target))


def _span_coefficients(target, basis, alg):
    """Coefficients expressing ``target`` over ``basis``, or None.

    Starts from the greatest (residuated) coefficients, then zeroes every
    coefficient that is not needed, in basis order.
    """
    coefs = []
    for b in basis:
        c = None
        for t_i, b_i in zip(target, b):
            if alg.is_zero(b_i):
                continue
            r = alg.residual(t_i, b_i)
            c = r if c is None else alg.meet(c, r)
        coefs.append(alg.zero if c is None else c)
    if not _represents(target, basis, coefs, alg):
        return None
    for s in range(len(coefs)):
        if alg.is_zero(coefs[s]):
            continue
        trial = coefs[:s] + [alg.zero] + coefs[s + 1:]
        if _represents(target, basis, trial, alg):
            coefs = trial
    return coefs


def _column_basis(rows, alg):
    cols = _transpose(rows)
    active = list(range(len(cols)))
    for j in range(len(cols)):
        others = [s for s in active if s != j]
        if _span_coefficients(cols[j], [cols[s] for s in others], alg) is not None:
            active.remove(j)
    basis = [cols[s] for s in active]
    coef = [[alg.zero] * len(cols) for _ in active]
    for j in range(len(cols)):
        if j in active:
            coef[active.index(j)][j] = alg.one
            continue
        cs = _span_coefficients(cols[j], basis, alg)
        if cs is None:  # pragma: no cover - removal above guarantees a representation
            raise AssertionError("basis lost a column")
        for s, c in enumerate(cs):
            coef[s][j] = c
    b_rows = _transpose(basis) if basis else [[] for _ in rows]
    return tuple(active), b_rows, coef


def is_backward_triangular(d: SkeletonDecomposition) -> bool:
    """True iff ``C B`` is triangular up to a simultaneous permutation."""
    return triangular_permutation(d.C @ d.B) is not None


def _vector_factor(vec) -> ServiceExpr:
    """Largest leaf monomial dividing every non-zero entry of a symbolic vector."""
    g = None
    for x in vec:
        if x.is_zero:
            continue
        f = x.common_factor()
        g = f if g is None else _common(g, f)
    return ONE if g is None else g


def _subsets(items: Sequence[int], limit: int = 8):
    if len(items) > limit:
        return [(), tuple(items)]
    out = []
    for size in range(len(items) + 1):
        out.extend(itertools.combinations(items, size))
    return out


def skeleton_candidates(a: AnyMatrix) -> list[SkeletonDecomposition]:
    """Row-basis and column-basis decompositions of ``a`` with ``r < n``.

    For symbolic matrices each basis vector may also have its common leaf
    factor moved into the coefficient factor; every such variant is listed
    (fewest moved factors first), since which one has independent factors
    depends on the matrix.
    """
    rows, alg = _unpack(a)
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ValueError("skeleton decomposition needs a square matrix")
    out = []
    for by_rows in (True, False):
        src = _transpose(rows) if by_rows else rows
        active, b_rows, coef = _column_basis(src, alg)
        r = len(active)
        if r == 0 or r >= n:
            continue
        if alg is _Symbolic:
            factors = [_vector_factor([row[s] for row in b_rows]) for s in range(r)]
        else:
            factors = [None] * r
        pullable = [s for s in range(r) if factors[s] is not None and factors[s] != ONE]
        for subset in _subsets(pullable):
            vecs = [[x if x.is_zero or s not in subset else x.divide(factors[s])
                     for s, x in enumerate(row)] for row in b_rows] if subset else b_rows
            cf = [[x if alg.is_zero(x) or s not in subset else alg.mul(x, factors[s]) for x in coef[s]]
                  for s in range(r)] if subset else coef
            if by_rows:
                # A^T = B' C'  =>  A = C'^T B'^T
                B = _pack(_transpose(cf), a, n, r)
                C = _pack(_transpose(vecs), a, r, n)
            else:
                B = _pack(vecs, a, n, r)
                C = _pack(cf, a, r, n)
            d = SkeletonDecomposition(B, C, False, active, by_rows, tuple(subset))
            out.append(SkeletonDecomposition(B, C, is_backward_triangular(d), active, by_rows, tuple(subset)))
    return out


def factors_independent(d: SkeletonDecomposition) -> bool:
    """Conservative independence test: B and C share no service-time leaf."""
    if isinstance(d.B, TropicalMatrix):
        return True
    return not (d.B.leaves() & d.C.leaves())


def skeleton_decompose(a: AnyMatrix) -> Optional[SkeletonDecomposition]:
    """Best decomposition found, or None when the search finds full rank.

    Preference: factors with disjoint leaves over dependent ones, then
    backward triangular over not, then the order of
    :func:`skeleton_candidates`.
    """
    cands = skeleton_candidates(a)
    if not cands:
        return None
    return min(cands, key=lambda d: (not factors_independent(d), not d.backward_triangular))
