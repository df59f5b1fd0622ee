"""Lyapunov exponent of products of random max-plus matrices.

The exponent is ``lambda = lim ||A(1) ... A(k)|| / k``.  For an i.i.d. sequence
the order of the factors does not matter; for sequences whose consecutive
matrices share service times (the ``A'(k) = C(k) B(k+1)`` chains built by the
decomposition driver) this left-to-right order is the one that matters.  The
Monte Carlo estimator therefore propagates ``x(k) = A(k)^T x(k-1)`` from the
all-zero vector, which satisfies ``||x(k)|| = ||A(1) ... A(k)||``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from .expr import ExprMatrix, ServiceExpr
from .stochastic import (
    BLOCK,
    RandomMatrixProcess,
    StreamSampler,
    expectation,
    expected_matrix_stats,
    kingman_check,
)
from .structure import (
    MatrixType,
    classify,
    factors_independent,
    rank_one_factorize,
    skeleton_candidates,
)

__all__ = [
    "LyapunovEstimate",
    "ExistenceUnverifiedError",
    "DependencyViolationError",
    "estimate_monte_carlo",
    "evaluate_closed_form",
    "evaluate_by_decomposition",
    "chain_step",
    "records_to_csv",
    "records_to_json",
    "CHECKPOINTS",
]

NEG_INF = float("-inf")
CHECKPOINTS = (100, 1_000, 10_000)
_Z95 = 1.959963984540054


class ExistenceUnverifiedError(RuntimeError):
    """The sufficient conditions for a finite exponent could not be confirmed."""

    def __init__(self, report):
        super().__init__("existence of a finite exponent is unverified: " + "; ".join(report.notes))
        self.report = report


class DependencyViolationError(RuntimeError):
    """Every skeleton decomposition found has factors sharing a service time."""


@dataclass(frozen=True)
class LyapunovEstimate:
    lambda_: float
    stderr: float
    ci95: tuple[float, float]
    method: str
    k_used: int = 0
    replications: int = 0
    seed: Optional[int] = None
    detail: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def throughput(self) -> Optional[float]:
        return 1.0 / self.lambda_ if self.lambda_ > 0 and math.isfinite(self.lambda_) else None

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci95[1] - self.ci95[0])

    def contains(self, value: float) -> bool:
        return self.ci95[0] <= value <= self.ci95[1]

    def to_record(self) -> dict:
        return {
            "method": self.method,
            "lambda": self.lambda_,
            "stderr": self.stderr,
            "ci_lo": self.ci95[0],
            "ci_hi": self.ci95[1],
            "k": self.k_used,
            "reps": self.replications,
            "seed": self.seed,
        }


def _analytic_estimate(value: float, se: float, method: str, seed=None, detail: str = "") -> LyapunovEstimate:
    return LyapunovEstimate(value, se, (value - _Z95 * se, value + _Z95 * se), method, 0, 0, seed, detail)


# Monte Carlo ---------------------------------------------------------------


def _run_replications(process: RandomMatrixProcess, reps: Sequence[int], k: int, burn_in: int,
                      normalize: bool, propagate: str, checkpoints: Sequence[int]):
    """Log-norms ``L(burn_in)``, ``L(k)`` and checkpoint values for each replication."""
    n = process.dim
    r = len(reps)
    samplers = [StreamSampler(process, rep) for rep in reps]
    if propagate == "vector":
        state = np.zeros((r, n))
    else:
        state = np.broadcast_to(np.where(np.eye(n, dtype=bool), 0.0, NEG_INF), (r, n, n)).copy()
    offset = np.zeros(r)
    base = np.zeros(r)
    marks = {}
    step = 0
    while step < k:
        stop = min(k, step + BLOCK)
        mats = np.stack([s.trajectory(step + 1, stop) for s in samplers])  # (r, chunk, n, n)
        for t in range(stop - step):
            a = mats[:, t]
            if propagate == "vector":
                # x_i <- max_j A_ji + x_j
                state = (a + state[:, :, None]).max(axis=1)
            else:
                state = (state[:, :, :, None] + a[:, None, :, :]).max(axis=2)
            step += 1
            if normalize:
                m = state.reshape(r, -1).max(axis=1)
                m = np.where(np.isfinite(m), m, 0.0)
                if state.ndim == 2:
                    state = state - m[:, None]
                else:
                    state = state - m[:, None, None]
                offset = offset + m
            if step == burn_in or step in checkpoints:
                value = offset + state.reshape(r, -1).max(axis=1)
                if step == burn_in:
                    base = value
                if step in checkpoints:
                    marks[step] = value
    final = offset + state.reshape(r, -1).max(axis=1)
    return base, final, marks


def estimate_monte_carlo(process: RandomMatrixProcess, k: int = 10_000, replications: int = 20,
                         burn_in: Optional[int] = None, normalize: bool = True, propagate: str = "vector",
                         override_existence: bool = False, existence_samples: int = 100_000,
                         workers: int = 1, checkpoints: Iterable[int] = CHECKPOINTS) -> LyapunovEstimate:
    """Monte Carlo estimate from ``replications`` independent sample paths of length ``k``.

    Each replication contributes ``(L(k) - L(k0)) / (k - k0)`` where ``L`` is the
    log-norm of the product and ``k0 = burn_in`` (default ``k // 10``); this
    removes the ``O(1/k)`` transient of ``L(k) / k``.  ``burn_in=0`` gives the
    plain ``L(k) / k``.  The 95% interval uses the Student t quantile over
    replications.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if replications < 2:
        raise ValueError("need at least two replications")
    if propagate not in ("vector", "matrix"):
        raise ValueError("propagate must be 'vector' or 'matrix'")
    k0 = k // 10 if burn_in is None else int(burn_in)
    if not 0 <= k0 < k:
        raise ValueError("burn_in must satisfy 0 <= burn_in < k")
    report = kingman_check(process, existence_samples)
    if not report.ok and not override_existence:
        raise ExistenceUnverifiedError(report)
    checkpoints = tuple(sorted(c for c in set(checkpoints) if 0 < c <= k))
    reps = list(range(replications))
    workers = max(1, int(workers))
    if workers == 1:
        parts = [_run_replications(process, reps, k, k0, normalize, propagate, checkpoints)]
    else:
        groups = [reps[i::workers] for i in range(workers) if reps[i::workers]]
        with ThreadPoolExecutor(len(groups)) as pool:
            futures = [pool.submit(_run_replications, process, g, k, k0, normalize, propagate, checkpoints)
                       for g in groups]
            raw = [f.result() for f in futures]
        # restore replication order so the reduction is independent of the worker count
        base = np.empty(replications)
        final = np.empty(replications)
        marks = {c: np.empty(replications) for c in checkpoints}
        for g, (b, f, m) in zip(groups, raw):
            base[g], final[g] = b, f
            for c in checkpoints:
                marks[c][g] = m[c]
        parts = [(base, final, marks)]
    base, final, marks = parts[0]
    with np.errstate(invalid="ignore"):
        per_rep = (final - base) / (k - k0)
    lam = float(per_rep.mean()) if np.all(np.isfinite(per_rep)) else NEG_INF
    if math.isfinite(lam):
        sd = 0.0 if np.all(per_rep == per_rep[0]) else float(per_rep.std(ddof=1))
        se = sd / math.sqrt(replications)
        half = float(stats.t.ppf(0.975, replications - 1)) * se
    else:
        se, half = 0.0, 0.0
    diagnostics = {
        "per_replication": per_rep.tolist(),
        "checkpoints": {int(c): float(marks[c].mean() / c) for c in checkpoints},
        "burn_in": k0,
        "kingman": {"ok": report.ok, "e_norm": report.e_norm, "rho_of_mean": str(report.rho_of_mean),
                    "notes": list(report.notes)},
    }
    cps = sorted(diagnostics["checkpoints"].items())
    diagnostics["subadditive_monotone"] = all(b[1] <= a[1] + 1e-9 for a, b in zip(cps, cps[1:]))
    return LyapunovEstimate(lam, se, (lam - half, lam + half), "MonteCarlo", k, replications,
                            process.seed, "", diagnostics)


# closed forms --------------------------------------------------------------


def _trace_of_mean(process: RandomMatrixProcess, exprs: ExprMatrix, samples: int) -> tuple[float, float]:
    mean, err = expected_matrix_stats(process.with_exprs(exprs), samples)
    diag = np.diag(mean.values)
    if not np.isfinite(diag).any():
        return NEG_INF, 0.0
    i = int(np.argmax(diag))
    return float(diag[i]), float(err[i, i])


_TRIANGULAR_NAMES = {
    MatrixType.DIAGONAL: "Diagonal",
    MatrixType.TRIANGULAR_LOWER: "Triangular",
    MatrixType.TRIANGULAR_UPPER: "Triangular",
    MatrixType.TRIANGULAR_PERMUTED: "Triangular",
}


def evaluate_closed_form(process: RandomMatrixProcess, samples: int = 100_000) -> Optional[LyapunovEstimate]:
    """Exponent from the structure of the symbolic matrix, or None when it is general.

    * diagonal or triangular (possibly after permutation): ``max_i E a_ii``
    * similarity with coefficient ``alpha``: ``E alpha``
    * rank one ``u(k) v(k)^T``: ``E[v(1)^T u(2)]``
    """
    exprs = process.exprs
    cls = classify(exprs)
    dists = process.node_distributions()
    if cls.tag in _TRIANGULAR_NAMES:
        value, se = _trace_of_mean(process, exprs, samples)
        return _analytic_estimate(value, se, _TRIANGULAR_NAMES[cls.tag], process.seed, str(cls))
    if cls.tag is MatrixType.SIMILARITY:
        value, se = expectation(cls.coefficient, dists, samples, process.seed)
        return _analytic_estimate(value, se, "Similarity", process.seed, f"alpha = {cls.coefficient}")
    if cls.tag is MatrixType.RANK_ONE:
        inner = ServiceExpr.zero()
        for vj, uj in zip(cls.v, cls.u):
            inner = inner + vj * uj.shift(1)
        value, se = expectation(inner, dists, samples, process.seed)
        return _analytic_estimate(value, se, "RankOne", process.seed, f"v(1)^T u(2) = {inner}")
    return None


# decomposition -------------------------------------------------------------


def chain_step(exprs: ExprMatrix) -> list:
    """Independent decompositions of ``exprs`` paired with ``A'(k) = C(k) B(k+1)``.

    Backward triangular decompositions come first.  Raises
    :class:`DependencyViolationError` when decompositions exist but every one
    of them has factors sharing a (node, lag) service time.
    """
    cands = skeleton_candidates(exprs)
    good = [d for d in cands if factors_independent(d)]
    if cands and not good:
        raise DependencyViolationError(
            "factors B and C share service times in every skeleton decomposition found")
    good.sort(key=lambda d: not d.backward_triangular)
    return [(d, d.C @ d.B.shift(1)) for d in good]


def _describe(d) -> str:
    side = "rows" if d.by_rows else "columns"
    pulled = f" pulled={list(d.pulled)}" if d.pulled else ""
    return f"r={d.inner_dim} basis {side} {list(d.basis)}{pulled}"


def evaluate_by_decomposition(process: RandomMatrixProcess, max_depth: int = 3,
                              samples: int = 100_000, max_branches: int = 64) -> Optional[LyapunovEstimate]:
    """Exponent via skeleton decompositions ``A(k) = B(k) C(k)`` with independent factors.

    A backward triangular decomposition gives ``tr E[C(1) B(1)]``.  Otherwise
    each candidate continues the chain with ``A'(k) = C(k) B(k+1)``, retrying
    the closed forms on the new matrix.  Candidates are explored breadth
    first for at most ``max_depth`` steps.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    frontier = [(process.exprs, [])]
    seen = {process.exprs}
    for depth in range(1, max_depth + 1):
        nxt_frontier = []
        for exprs, trail in frontier:
            try:
                steps = chain_step(exprs)
            except DependencyViolationError:
                if depth == 1:
                    raise
                continue
            for d, nxt in steps:
                here = trail + [_describe(d)]
                if d.backward_triangular:
                    value, se = _trace_of_mean(process, nxt, samples)
                    method = "BackwardSkeleton" if depth == 1 else f"DecompositionChain({depth})"
                    return _analytic_estimate(value, se, method, process.seed, "; ".join(here))
                found = evaluate_closed_form(process.with_exprs(nxt), samples)
                if found is not None:
                    note = found.method
                    if found.method != "RankOne" and rank_one_factorize(nxt) is not None:
                        note += ", rank one"
                    here.append(f"A' is {note}")
                    return _analytic_estimate(found.lambda_, found.stderr, f"DecompositionChain({depth})",
                                              process.seed, "; ".join(here))
                if nxt not in seen and len(nxt_frontier) < max_branches:
                    seen.add(nxt)
                    nxt_frontier.append((nxt, here))
        frontier = nxt_frontier
        if not frontier:
            break
    return None


# output --------------------------------------------------------------------

CSV_COLUMNS = ("method", "lambda", "stderr", "ci_lo", "ci_hi", "k", "reps", "seed")


def records_to_csv(estimates: Iterable[LyapunovEstimate]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for e in estimates:
        writer.writerow({k: ("" if v is None else repr(v) if isinstance(v, float) else v)
                         for k, v in e.to_record().items()})
    return buf.getvalue()


def records_to_json(estimates: Iterable[LyapunovEstimate], **extra) -> str:
    payload = dict(extra)
    payload["estimates"] = [e.to_record() | {"detail": e.detail} for e in estimates]
    return json.dumps(payload, indent=2, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "__dict__"):
        return asdict(obj)
    return str(obj)
