"""Random state-transition matrices built from symbolic service-time entries.

Randomness is organised as counter-keyed substreams.  Every service-time
stream is an infinite sequence ``s[1], s[2], ...``; the values are produced in
fixed-size blocks, and block ``b`` of stream ``s`` in replication ``r`` is drawn
from a Philox generator keyed by ``(seed, r, s, b)``.  Any single value can be
regenerated without touching the rest of the path, so ``A(k)`` and ``A(k+1)``
see identical values for the generation they share, and replications never
overlap.

Node ``i`` reads its cycle-``g`` service time from ``stream[stride * g + offset]``
(stride 1, offset 0 and its own stream unless rewired, which is how the
round-robin transform shares one arrival stream between several nodes).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .distributions import ServiceDistribution
from .expr import ExprMatrix, ServiceExpr
from .matrix import TropicalMatrix, spectral_radius
from .semiring import TropicalScalar

__all__ = [
    "DEFAULT_SEED",
    "StreamRef",
    "RandomMatrixProcess",
    "StreamSampler",
    "sample_matrix",
    "sample_trajectory",
    "expectation",
    "expected_matrix",
    "expected_matrix_stats",
    "KingmanReport",
    "kingman_check",
]

DEFAULT_SEED = 20240917
BLOCK = 4096
_EXPECTATION_KEY = 2**31 - 1
NEG_INF = float("-inf")


@dataclass(frozen=True)
class StreamRef:
    stream: int
    stride: int = 1
    offset: int = 0

    def index(self, generation):
        return self.stride * generation + self.offset


@dataclass(frozen=True)
class RandomMatrixProcess:
    """An i.i.d. (or lag-coupled) sequence of random matrices ``A(1), A(2), ...``.

    ``streams`` maps a stream id to its distribution; ``wiring`` maps each node
    to the stream position it reads.  When ``wiring`` is omitted every node
    reads its own stream (stream id == node id).
    """

    exprs: ExprMatrix
    streams: Mapping[int, ServiceDistribution]
    seed: int = DEFAULT_SEED
    wiring: Optional[Mapping[int, StreamRef]] = None
    name: str = ""

    def __post_init__(self):
        if self.exprs.rows != self.exprs.cols:
            raise ValueError("transition matrices must be square")
        wiring = dict(self.wiring) if self.wiring is not None else {s: StreamRef(s) for s in self.streams}
        for node, ref in wiring.items():
            if ref.stream not in self.streams:
                raise ValueError(f"node {node} reads unknown stream {ref.stream}")
            if ref.stream < 0:
                raise ValueError("stream ids must be nonnegative")
        for node, _ in self.exprs.leaves():
            if node not in wiring:
                raise ValueError(f"no service distribution for node {node}")
        object.__setattr__(self, "wiring", wiring)
        object.__setattr__(self, "streams", dict(self.streams))

    @classmethod
    def from_distributions(cls, exprs: ExprMatrix, distributions: Mapping[int, ServiceDistribution],
                           seed: int = DEFAULT_SEED, name: str = "") -> "RandomMatrixProcess":
        return cls(exprs, dict(distributions), seed, None, name)

    @classmethod
    def fixed(cls, a: TropicalMatrix, seed: int = DEFAULT_SEED, name: str = "") -> "RandomMatrixProcess":
        """A deterministic process that repeats ``a`` forever."""
        return cls(ExprMatrix.from_constants(a.values), {}, seed, {}, name)

    @property
    def dim(self) -> int:
        return self.exprs.rows

    def distribution(self, node: int) -> ServiceDistribution:
        return self.streams[self.wiring[node].stream]

    def node_distributions(self) -> dict[int, ServiceDistribution]:
        return {node: self.distribution(node) for node in self.wiring}

    def with_exprs(self, exprs: ExprMatrix, name: str = "") -> "RandomMatrixProcess":
        return RandomMatrixProcess(exprs, self.streams, self.seed, self.wiring, name or self.name)

    def with_seed(self, seed: int) -> "RandomMatrixProcess":
        return RandomMatrixProcess(self.exprs, self.streams, seed, self.wiring, self.name)

    def sampler(self, replication: int = 0) -> "StreamSampler":
        return StreamSampler(self, replication)


class StreamSampler:
    """Random access to the service-time streams of one replication."""

    def __init__(self, process: RandomMatrixProcess, replication: int = 0):
        self.process = process
        self.replication = int(replication)
        self._blocks: dict[tuple[int, int], np.ndarray] = {}

    def _block(self, stream: int, b: int) -> np.ndarray:
        key = (stream, b)
        blk = self._blocks.get(key)
        if blk is None:
            ss = np.random.SeedSequence(self.process.seed, spawn_key=(self.replication, stream, b))
            rng = np.random.Generator(np.random.Philox(ss))
            blk = self.process.streams[stream].sample(rng, BLOCK)
            self._blocks[key] = blk
        return blk

    def stream_values(self, stream: int, indices: np.ndarray) -> np.ndarray:
        """Values ``stream[i]`` for 1-based ``indices``."""
        idx = np.asarray(indices, dtype=np.int64) - 1
        if idx.size and idx.min() < 0:
            raise ValueError("stream indices start at 1")
        out = np.empty(idx.shape)
        blocks = idx // BLOCK
        for b in np.unique(blocks):
            mask = blocks == b
            out[mask] = self._block(stream, int(b))[idx[mask] - b * BLOCK]
        return out

    def tau(self, node: int, generations) -> np.ndarray:
        ref = self.process.wiring[node]
        return self.stream_values(ref.stream, ref.index(np.asarray(generations, dtype=np.int64)))

    def matrix(self, k: int) -> np.ndarray:
        """Canonical values of ``A(k)``."""
        return self.trajectory(k, k)[0]

    def trajectory(self, start: int, stop: int) -> np.ndarray:
        """Canonical values of ``A(start), ..., A(stop)`` stacked on axis 0."""
        if start < 1 or stop < start:
            raise ValueError("need 1 <= start <= stop")
        gens = np.arange(start, stop + 1, dtype=np.int64)
        size = gens.size
        cache: dict[tuple, np.ndarray] = {}

        def get(leaf):
            arr = cache.get(leaf)
            if arr is None:
                node, lag = leaf
                arr = cache[leaf] = self.tau(node, gens + lag)
            return arr

        n = self.process.dim
        out = np.full((size, n, n), NEG_INF)
        for i, row in enumerate(self.process.exprs.entries):
            for j, e in enumerate(row):
                if not e.is_zero:
                    out[:, i, j] = e.evaluate_array(get, size)
        return out


def sample_matrix(process: RandomMatrixProcess, k: int, replication: int = 0) -> TropicalMatrix:
    if k < 1:
        raise ValueError("cycle index starts at 1")
    return TropicalMatrix(StreamSampler(process, replication).matrix(k))


def sample_trajectory(process: RandomMatrixProcess, k: int, replication: int = 0) -> np.ndarray:
    """``A(1), ..., A(k)`` as a ``(k, n, n)`` canonical array."""
    return StreamSampler(process, replication).trajectory(1, k)


# expectations ------------------------------------------------------------


def _emax_exponential(rates) -> float:
    """E max of independent exponentials by inclusion-exclusion."""
    total = 0.0
    for size in range(1, len(rates) + 1):
        sign = 1.0 if size % 2 else -1.0
        for combo in itertools.combinations(rates, size):
            total += sign / sum(combo)
    return total


def _analytic(expr: ServiceExpr, dists: Mapping[int, ServiceDistribution]) -> Optional[float]:
    if expr.is_zero:
        return NEG_INF
    if expr.is_constant:
        return expr.constant_value()
    g = expr.common_factor()
    rest = expr.divide(g) if g != ServiceExpr.one() else expr
    shift = sum(dists[node].mean() for node, _ in next(iter(g.monomials)).leaves)
    if rest.is_monomial:
        (m,) = rest.monomials
        return shift + m.const + sum(dists[node].mean() for node, _ in m.leaves)
    monos = list(rest.monomials)
    consts = {m.const for m in monos}
    if len(consts) == 1 and all(len(m.leaves) == 1 for m in monos):
        leaves = [m.leaves[0] for m in monos]
        laws = [dists[node] for node, _ in leaves]
        if len(set(leaves)) == len(leaves) and all(d.kind == "exp" for d in laws) and len(laws) <= 12:
            return shift + consts.pop() + _emax_exponential([d.params[0] for d in laws])
    return None


def _leaf_samples(leaves, dists, samples: int, seed: int) -> dict:
    out = {}
    for leaf in sorted(leaves):
        node, lag = leaf
        ss = np.random.SeedSequence(seed, spawn_key=(_EXPECTATION_KEY, node, lag))
        out[leaf] = dists[node].sample(np.random.Generator(np.random.Philox(ss)), samples)
    return out


def _deterministic_values(dists: Mapping[int, ServiceDistribution]) -> dict:
    return {node: d.mean() for node, d in dists.items() if d.is_deterministic}


def expectation(expr: ServiceExpr, dists: Mapping[int, ServiceDistribution],
                samples: int = 100_000, seed: int = DEFAULT_SEED) -> tuple[float, float]:
    """``(mean, standard error)`` of an expression whose distinct leaves are independent.

    Closed forms are used when available (standard error 0): leaf-free and
    single-monomial expressions, common factors pulled out by linearity, and
    maxima of distinct exponential leaves.  Everything else is Monte Carlo.
    """
    expr = expr.substitute(_deterministic_values(dists))
    value = _analytic(expr, dists)
    if value is not None:
        return value, 0.0
    if samples < 2:
        raise ValueError("need at least two samples for a Monte Carlo expectation")
    draws = _leaf_samples(expr.leaves(), dists, samples, seed)
    vals = expr.evaluate_array(draws.__getitem__, samples)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def expected_matrix_stats(process: RandomMatrixProcess, samples: int = 100_000) -> tuple[TropicalMatrix, np.ndarray]:
    """Entrywise mean of ``A(1)`` together with the standard error of each entry."""
    if samples < 1:
        raise ValueError("samples must be positive")
    dists = process.node_distributions()
    fixed = _deterministic_values(dists)
    n = process.dim
    mean = np.full((n, n), NEG_INF)
    err = np.zeros((n, n))
    pending = []
    for i, row in enumerate(process.exprs.entries):
        for j, e in enumerate(row):
            e = e.substitute(fixed)
            v = _analytic(e, dists)
            if v is None:
                pending.append((i, j, e))
            else:
                mean[i, j] = v
    if pending:
        if samples < 2:
            raise ValueError("need at least two samples for Monte Carlo entries")
        leaves = frozenset().union(*(e.leaves() for _, _, e in pending))
        draws = _leaf_samples(leaves, dists, samples, process.seed)
        for i, j, e in pending:
            vals = e.evaluate_array(draws.__getitem__, samples)
            mean[i, j] = vals.mean()
            err[i, j] = vals.std(ddof=1) / math.sqrt(samples)
    return TropicalMatrix(mean), err


def expected_matrix(process: RandomMatrixProcess, samples: int = 100_000) -> TropicalMatrix:
    return expected_matrix_stats(process, samples)[0]


@dataclass(frozen=True)
class KingmanReport:
    ok: bool
    e_norm_finite: bool
    e_norm: float
    e_norm_stderr: float
    rho_of_mean: TropicalScalar
    notes: list = field(default_factory=list)


def kingman_check(process: RandomMatrixProcess, samples: int = 100_000) -> KingmanReport:
    """Check ``E||A(1)|| < inf`` and ``rho(E A(1)) > zero``."""
    dists = process.node_distributions()
    notes = []
    for node, d in sorted(dists.items()):
        if not d.is_nonnegative():
            notes.append(f"node {node}: {d} can produce negative service times")
    norm_expr = ServiceExpr.zero()
    for row in process.exprs.entries:
        for e in row:
            norm_expr = norm_expr + e
    e_norm, e_err = expectation(norm_expr, dists, samples, process.seed)
    finite = math.isfinite(e_norm)
    rho = spectral_radius(expected_matrix(process, samples))
    ok = finite and not rho.is_zero
    if not finite:
        notes.append("E||A(1)|| is not finite")
    if rho.is_zero:
        notes.append("spectral radius of E A(1) is zero")
    return KingmanReport(ok, finite, e_norm, e_err, rho, notes)
