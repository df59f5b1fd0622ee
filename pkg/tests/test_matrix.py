from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from maxplus_lyapunov.matrix import (
    ShapeError,
    TropicalMatrix,
    TropicalVector,
    format_matrix_text,
    mat_add,
    mat_mul,
    mat_power,
    norm,
    parse_matrix_text,
    power_trajectory,
    spectral_radius,
    trace,
)
from maxplus_lyapunov.semiring import SemifieldKind, one, scalar, zero
from oracles import karp_cycle_mean, max_cycle_mean, naive_maxplus_product

NEG = -np.inf
A = TropicalMatrix.from_rows([[1, 3], [0, 2]])


def entries(n, m, lo=-9, hi=9, zero_prob=True):
    elems = st.integers(lo, hi).map(float)
    if zero_prob:
        elems = st.one_of(elems, elems, elems, st.just(NEG))
    return arrays(float, (n, m), elements=elems)


def test_add_examples():
    a = TropicalMatrix.from_rows([[1, None], [2, 0]])
    b = TropicalMatrix.from_rows([[0, 3], ["-inf", None]])
    assert mat_add(a, b) == TropicalMatrix.from_rows([[1, 3], [2, 0]])
    assert a + TropicalMatrix.zeros(2, 2) == a
    assert a + a == a
    with pytest.raises(ShapeError):
        a + TropicalMatrix.zeros(3, 3)


def test_mul_examples():
    assert TropicalMatrix.identity(2) @ A == A
    assert mat_mul(A, A) == TropicalMatrix.from_rows([[3, 5], [2, 4]])
    with pytest.raises(ShapeError):
        A @ TropicalMatrix.zeros(3, 3)


def test_open_tandem_construction():
    t = [1.0, 2.0, 4.0]
    T = TropicalMatrix.diag(t)
    G0 = TropicalMatrix.from_rows([[NEG, 0, NEG], [NEG, NEG, 0], [NEG, NEG, NEG]])
    S = mat_power(TropicalMatrix.identity(3) + T @ G0.T, 2)
    expected = TropicalMatrix.from_rows([[1, NEG, NEG], [3, 2, NEG], [7, 6, 4]])
    assert S @ T == expected


def test_norm_trace():
    a = TropicalMatrix.from_rows([[1, None], [2, 0]])
    assert norm(a).value == 2
    assert norm(TropicalMatrix.zeros(2, 3)).is_zero
    assert (A * scalar(2)).norm() == scalar(2) * A.norm()
    assert trace(A).value == 2
    assert trace(TropicalMatrix.identity(4)) == one()
    assert trace(TropicalMatrix.diag([1, 7, 3])).value == 7
    with pytest.raises(ShapeError):
        trace(TropicalMatrix.zeros(2, 3))


def test_spectral_radius_examples():
    assert spectral_radius(A).value == 2
    assert max_cycle_mean(A.values) == 2
    assert spectral_radius(TropicalMatrix.diag([1, 5, 2])).value == 5
    strict = TropicalMatrix.from_rows([[None, None], [4, None]])
    assert spectral_radius(strict).is_zero
    assert spectral_radius(TropicalMatrix.zeros(3, 3)).is_zero


def test_power_examples():
    assert mat_power(A, 0) == TropicalMatrix.identity(2)
    assert mat_power(A, 1) == A
    assert A ** 3 == A @ A @ A
    traj = list(power_trajectory(A, 4))
    assert len(traj) == 4 and traj[-1] == A ** 4
    with pytest.raises(ShapeError):
        mat_power(TropicalMatrix.zeros(2, 3), 2)


def test_regular_and_vectors():
    assert A.is_regular()
    assert not TropicalMatrix.from_rows([[1, 2], [None, None]]).is_regular()
    x = TropicalVector.from_values([0, 1])
    y = A @ x
    assert isinstance(y, TropicalVector)
    assert y.to_list() == [4.0, 3.0]
    assert y.norm().value == 4


def test_text_round_trip():
    text = "1 -inf  # comment\n2 0\n"
    m = parse_matrix_text(text)
    assert m == TropicalMatrix.from_rows([[1, None], [2, 0]])
    assert parse_matrix_text(format_matrix_text(m)) == m
    with pytest.raises(ValueError):
        parse_matrix_text("# nothing\n")


def test_other_kinds():
    mn = SemifieldKind.MIN_PLUS
    a = TropicalMatrix.from_rows([[1, "+inf"], [2, 0]], mn)
    b = TropicalMatrix.from_rows([[0, 3], [5, 1]], mn)
    assert (a @ b).to_rows() == [[1, 4], [2, 1]]
    assert (a + b).to_rows() == [[0, 3], [2, 0]]


@settings(max_examples=200, deadline=None)
@given(entries(3, 4), entries(4, 2))
def test_product_matches_naive(a, b):
    got = (TropicalMatrix(a) @ TropicalMatrix(b)).values
    assert np.array_equal(got, np.array(naive_maxplus_product(a.tolist(), b.tolist())))


@settings(max_examples=200, deadline=None)
@given(entries(3, 3), entries(3, 3), entries(3, 3))
def test_matrix_laws(a, b, c):
    A_, B_, C_ = TropicalMatrix(a), TropicalMatrix(b), TropicalMatrix(c)
    assert (A_ @ B_) @ C_ == A_ @ (B_ @ C_)
    assert A_ @ (B_ + C_) == A_ @ B_ + A_ @ C_
    assert (A_ + B_).norm() == A_.norm() + B_.norm()
    assert (A_ @ B_).norm() <= A_.norm() * B_.norm()


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 6).flatmap(lambda n: entries(n, n, 0, 9)))
def test_spectral_radius_is_max_cycle_mean(a):
    rho = spectral_radius(TropicalMatrix(a)).canonical
    brute = max_cycle_mean(a)
    assert rho == pytest.approx(brute, abs=1e-12)
    assert karp_cycle_mean(a) == pytest.approx(brute, abs=1e-9)


def test_romanovskii_rate():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = rng.integers(0, 10, (5, 5)).astype(float)
        m = TropicalMatrix(a)
        rho = spectral_radius(m).canonical
        bound = 5 * (a.max() - a.min())
        for k, ak in enumerate(power_trajectory(m, 2000), start=1):
            if k in (10, 100, 1000, 2000):
                assert abs(ak.norm().canonical / k - rho) <= bound / k + 1e-9
                assert abs(ak.trace().canonical / k - rho) <= bound / k + 1e-9


def test_similarity_scaling():
    x = scalar(3)
    assert (A * x).spectral_radius() == x * A.spectral_radius()
    assert (A * zero()).norm().is_zero
