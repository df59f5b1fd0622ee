from __future__ import annotations

import csv
import io
import json

import numpy as np
import pytest

from maxplus_lyapunov.distributions import ServiceDistribution
from maxplus_lyapunov.expr import ExprMatrix, tau as t
from maxplus_lyapunov.lyapunov import (
    DependencyViolationError,
    ExistenceUnverifiedError,
    estimate_monte_carlo,
    evaluate_by_decomposition,
    evaluate_closed_form,
    records_to_csv,
    records_to_json,
)
from maxplus_lyapunov.matrix import TropicalMatrix
from maxplus_lyapunov.network import compile_network, preset
from maxplus_lyapunov.stochastic import RandomMatrixProcess

EXP1 = ServiceDistribution.exponential(1)


def fixed(rows):
    return RandomMatrixProcess.fixed(TropicalMatrix.from_rows(rows))


def lifted(name, **kw):
    return compile_network(preset(name, **kw)).lifted


def test_mc_fixed_matrix_tends_to_spectral_radius():
    est = estimate_monte_carlo(fixed([[1, 3], [0, 2]]), k=1000, replications=2)
    assert est.lambda_ == 2.0 and est.stderr == 0.0
    plain = estimate_monte_carlo(fixed([[1, 3], [0, 2]]), k=1000, replications=2, burn_in=0)
    assert plain.lambda_ == pytest.approx(2.001)  # ||A^k|| = 2k + 1
    assert plain.diagnostics["checkpoints"][100] == pytest.approx(2.01)


def test_mc_identity_is_zero():
    est = estimate_monte_carlo(RandomMatrixProcess.fixed(TropicalMatrix.identity(3)), k=500, replications=3)
    assert est.lambda_ == 0.0 and est.throughput is None


def test_mc_open_tandem():
    est = estimate_monte_carlo(lifted("open_tandem"), k=5000, replications=10)
    assert est.contains(1.0) or abs(est.lambda_ - 1.0) < 3 * est.stderr
    assert est.throughput == pytest.approx(1 / est.lambda_)
    assert est.diagnostics["kingman"]["ok"]


def test_existence_guard():
    nil = fixed([[None, None], [3, None]])
    with pytest.raises(ExistenceUnverifiedError):
        estimate_monte_carlo(nil, k=10, replications=2)
    est = estimate_monte_carlo(nil, k=10, replications=2, override_existence=True)
    assert est.lambda_ == -np.inf


def test_argument_checks():
    p = fixed([[1]])
    with pytest.raises(ValueError):
        estimate_monte_carlo(p, k=0)
    with pytest.raises(ValueError):
        estimate_monte_carlo(p, k=10, replications=1)
    with pytest.raises(ValueError):
        estimate_monte_carlo(p, k=10, replications=2, burn_in=10)
    with pytest.raises(ValueError):
        evaluate_by_decomposition(p, max_depth=0)


def test_vector_and_matrix_propagation_agree_exactly():
    p = lifted("manufacturing_tandem")
    kw = dict(k=300, replications=3, normalize=False, burn_in=0)
    a = estimate_monte_carlo(p, propagate="vector", **kw)
    b = estimate_monte_carlo(p, propagate="matrix", **kw)
    assert a.diagnostics["per_replication"] == b.diagnostics["per_replication"]


def test_normalisation_invariance():
    # integer-valued data: bit-exact
    p = lifted("fork_join_5")
    a = estimate_monte_carlo(p, k=2000, replications=2, normalize=True)
    b = estimate_monte_carlo(p, k=2000, replications=2, normalize=False)
    assert a.lambda_ == b.lambda_ == 5.0
    m = RandomMatrixProcess.fixed(TropicalMatrix.from_rows([[1, 7, 2], [3, 0, None], [5, 4, 6]]))
    a = estimate_monte_carlo(m, k=999, replications=2, burn_in=0, normalize=True)
    b = estimate_monte_carlo(m, k=999, replications=2, burn_in=0, normalize=False)
    assert a.lambda_ == b.lambda_
    # continuous data: equal up to rounding
    p = lifted("communication_tandem")
    a = estimate_monte_carlo(p, k=2000, replications=3, normalize=True)
    b = estimate_monte_carlo(p, k=2000, replications=3, normalize=False)
    assert a.lambda_ == pytest.approx(b.lambda_, rel=1e-12)


def test_worker_count_does_not_change_result():
    p = lifted("closed_tandem")
    a = estimate_monte_carlo(p, k=1000, replications=5, workers=1)
    b = estimate_monte_carlo(p, k=1000, replications=5, workers=3)
    assert a.lambda_ == b.lambda_ and a.diagnostics == b.diagnostics


def test_closed_form_diagonal():
    p = RandomMatrixProcess.from_distributions(
        ExprMatrix.diag([t(0), t(1)]), {0: EXP1, 1: ServiceDistribution.exponential(0.5)})
    est = evaluate_closed_form(p)
    assert est.method == "Diagonal" and est.lambda_ == 2.0 and est.stderr == 0.0


def test_closed_form_similarity_closed_tandem():
    est = evaluate_closed_form(lifted("closed_tandem"))
    assert est.method == "Similarity" and est.lambda_ == pytest.approx(1.5)


def test_closed_form_rank_one_constants():
    est = evaluate_closed_form(fixed([[2, 2], [3, 3]]))
    assert est.lambda_ == 3.0
    est = evaluate_closed_form(fixed([[2, 0], [3, 1]]))
    assert est.method == "RankOne" and est.lambda_ == 2.0


def test_closed_form_rank_one_random_matches_mc():
    dists = {0: EXP1, 1: ServiceDistribution.uniform(0, 2), 2: ServiceDistribution.exponential(2)}
    exprs = ExprMatrix([[t(0), t(0) * t(2)], [t(1), t(1) * t(2)]])
    p = RandomMatrixProcess.from_distributions(exprs, dists)
    cf = evaluate_closed_form(p, samples=200_000)
    assert cf.method == "RankOne"
    mc = estimate_monte_carlo(p, k=5000, replications=10)
    assert abs(mc.lambda_ - cf.lambda_) < 3 * np.hypot(mc.stderr, cf.stderr)


def test_closed_form_general_returns_none():
    assert evaluate_closed_form(lifted("fork_join_5")) is None


def test_decomposition_examples():
    est = evaluate_by_decomposition(lifted("manufacturing_tandem"))
    assert est.method == "BackwardSkeleton" and est.lambda_ == pytest.approx(1.5)
    est = evaluate_by_decomposition(lifted("communication_tandem"))
    assert est.method == "DecompositionChain(1)" and est.lambda_ == pytest.approx(2.5)
    assert "RankOne" in est.detail
    det = [f"det({v})" for v in (1, 2, 3, 4, 5)]
    est = evaluate_by_decomposition(lifted("fork_join_5", services=det))
    assert est.lambda_ == 5.0
    est = evaluate_by_decomposition(lifted("round_robin", arrival="det(5)", services=["det(1)", "det(1)"]))
    assert est.lambda_ == 10.0


def test_decomposition_full_rank_returns_none():
    assert evaluate_by_decomposition(lifted("open_tandem")) is None


def test_dependency_violation():
    exprs = ExprMatrix([[t(0), t(0) * t(1)], [t(0) * t(1), t(0) * t(1) * t(1)]])
    p = RandomMatrixProcess.from_distributions(exprs, {0: EXP1, 1: EXP1})
    with pytest.raises(DependencyViolationError):
        evaluate_by_decomposition(p)


def test_records():
    ests = [evaluate_closed_form(lifted("closed_tandem")),
            estimate_monte_carlo(lifted("closed_tandem"), k=200, replications=2)]
    rows = list(csv.DictReader(io.StringIO(records_to_csv(ests))))
    assert list(rows[0]) == ["method", "lambda", "stderr", "ci_lo", "ci_hi", "k", "reps", "seed"]
    assert rows[1]["method"] == "MonteCarlo" and rows[1]["k"] == "200"
    payload = json.loads(records_to_json(ests, seed=1))
    assert payload["seed"] == 1 and len(payload["estimates"]) == 2
