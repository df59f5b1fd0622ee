from __future__ import annotations

import numpy as np
import pytest

from maxplus_lyapunov.distributions import ServiceDistribution, parse_distribution
from maxplus_lyapunov.expr import ExprMatrix, tau
from maxplus_lyapunov.matrix import TropicalMatrix
from maxplus_lyapunov.stochastic import (
    RandomMatrixProcess,
    StreamRef,
    StreamSampler,
    expectation,
    expected_matrix,
    expected_matrix_stats,
    kingman_check,
    sample_matrix,
    sample_trajectory,
)
from oracles import brute_force_expected_max, expected_max_iid_exponential

EXP1 = ServiceDistribution.exponential(1.0)


def test_distribution_parsing_and_means():
    assert parse_distribution("det(2)").mean() == 2
    assert parse_distribution("exp(4)").mean() == 0.25
    assert parse_distribution("unif(1, 3)").mean() == 2
    assert parse_distribution("Exponential(2)") == ServiceDistribution.exponential(2)
    d = parse_distribution("norm(1, 1)")
    rng = np.random.default_rng(0)
    x = d.sample(rng, 200_000)
    assert x.min() >= 0
    assert x.mean() == pytest.approx(d.mean(), abs=0.01)
    assert d.mean() > 1.0
    with pytest.raises(ValueError):
        parse_distribution("gamma(1)")
    with pytest.raises(ValueError):
        parse_distribution("exp(0)")
    assert str(parse_distribution("unif(0,2.5)")) == "unif(0, 2.5)"


def _open_tandem2(d0, d1):
    T = ExprMatrix.diag([tau(0), tau(1)])
    G0 = ExprMatrix.from_constants([[-np.inf, 0.0], [-np.inf, -np.inf]])
    exprs = (ExprMatrix.identity(2) + T @ G0.T) @ T
    return RandomMatrixProcess.from_distributions(exprs, {0: d0, 1: d1})


def test_sample_deterministic():
    p = _open_tandem2(ServiceDistribution.deterministic(1), ServiceDistribution.deterministic(2))
    assert sample_matrix(p, 5) == TropicalMatrix.from_rows([[1, None], [3, 2]])


def test_reproducible_and_replications_differ():
    p = _open_tandem2(EXP1, EXP1)
    a = sample_trajectory(p, 5000)
    b = sample_trajectory(p, 5000)
    assert np.array_equal(a, b)
    assert sample_matrix(p, 4321) == TropicalMatrix(a[4320])
    other = StreamSampler(p, replication=1).trajectory(1, 5000)
    assert not np.array_equal(a, other)
    assert not np.array_equal(a, sample_trajectory(p.with_seed(1), 5000))


def test_lag_one_reads_next_generation():
    exprs = ExprMatrix([[tau(0), tau(0, 1)]] * 2)
    p = RandomMatrixProcess.from_distributions(exprs, {0: EXP1})
    traj = sample_trajectory(p, 10)
    assert np.array_equal(traj[:-1, 0, 1], traj[1:, 0, 0])


def test_stream_wiring():
    p = RandomMatrixProcess(ExprMatrix.diag([tau(0), tau(1)]), {9: EXP1}, wiring={
        0: StreamRef(9, 2, -1), 1: StreamRef(9, 2, 0)})
    s = StreamSampler(p)
    stream = s.stream_values(9, np.arange(1, 21))
    traj = s.trajectory(1, 10)
    assert np.array_equal(traj[:, 0, 0], stream[0::2])
    assert np.array_equal(traj[:, 1, 1], stream[1::2])


def test_expected_matrix_examples():
    p = RandomMatrixProcess.from_distributions(ExprMatrix.diag([tau(0), tau(1)]), {0: EXP1, 1: EXP1})
    mean, err = expected_matrix_stats(p, 1000)
    assert np.array_equal(np.diag(mean.values), [1.0, 1.0])  # analytic
    assert mean.values[0, 1] == -np.inf
    chain = RandomMatrixProcess.from_distributions(
        ExprMatrix([[tau(0) * tau(1)]]), {0: EXP1, 1: ServiceDistribution.exponential(0.5)})
    assert expected_matrix(chain, 10).values[0, 0] == 3.0


def test_expectation_of_max():
    e, se = expectation(tau(2) + tau(3), {2: EXP1, 3: EXP1})
    assert se == 0 and e == pytest.approx(expected_max_iid_exponential(2))
    assert e == pytest.approx(brute_force_expected_max([1, 1]), abs=0.005)
    # non-exponential falls back to sampling with a standard error
    u = ServiceDistribution.uniform(0, 1)
    e, se = expectation(tau(0) + tau(1), {0: u, 1: u}, samples=200_000)
    assert se > 0 and abs(e - 2 / 3) < 4 * se


def test_kingman():
    p = _open_tandem2(EXP1, EXP1)
    rep = kingman_check(p, 1000)
    assert rep.ok and rep.e_norm_finite and rep.rho_of_mean.canonical == 1.0
    zero = RandomMatrixProcess.fixed(TropicalMatrix.zeros(2, 2))
    rep = kingman_check(zero, 10)
    assert not rep.ok and rep.rho_of_mean.is_zero
    nil = RandomMatrixProcess.fixed(TropicalMatrix.from_rows([[None, None], [3, None]]))
    assert not kingman_check(nil, 10).ok


def _empirical(expr_matrix, dists, samples, seed):
    p = RandomMatrixProcess.from_distributions(expr_matrix, dists, seed)
    return StreamSampler(p).trajectory(1, samples)


def test_expectation_inequalities():
    dists = {0: EXP1, 1: ServiceDistribution.uniform(0, 2), 2: ServiceDistribution.exponential(2)}
    A = ExprMatrix([[tau(0), tau(1)], [tau(1) * tau(2), tau(2)]])
    B = ExprMatrix([[tau(2), tau(0) * tau(1)], [tau(0), tau(1)]])
    n = 20_000
    a = _empirical(A, dists, n, 1)
    b = _empirical(B, dists, n, 2)
    se = lambda x: x.std(ddof=1) / np.sqrt(n)
    ea, eb = a.mean(0), b.mean(0)
    norm_a = a.reshape(n, -1).max(1)
    assert norm_a.mean() >= ea.max() - 3 * se(norm_a)
    tr_a = np.diagonal(a, axis1=1, axis2=2).max(1)
    assert tr_a.mean() >= np.diag(ea).max() - 3 * se(tr_a)
    s = np.maximum(a, b)
    assert np.all(s.mean(0) >= np.maximum(ea, eb) - 3 * s.std(0, ddof=1) / np.sqrt(n))
    prod = (a[:, :, :, None] + b[:, None, :, :]).max(2)
    mean_prod = (ea[:, :, None] + eb[None, :, :]).max(1)
    assert np.all(prod.mean(0) >= mean_prod - 3 * prod.std(0, ddof=1) / np.sqrt(n))
