"""Fork-join queueing networks compiled into max-plus dynamic systems.

Nodes are numbered ``0 .. n-1``.  ``x_i(k)`` is the k-th departure epoch at
node ``i``; the network obeys

    x(k) = A_1(k) x(k-1) (+) ... (+) A_M(k) x(k-M),    x(0) = 0, x(k<0) = -inf

with the matrices assembled from the diagonal ``T_k`` of service times and the
0/1 matrices ``G_m`` (arcs into nodes holding ``m`` initial customers) and
``H_m`` (arcs into nodes whose buffer capacity is ``m - 1``):

    blocking        A_1(k)                                 A_m(k), m >= 2
    none            S T (I + G_1^T)                        S T G_m^T
    manufacturing   S (T (I + G_1^T) + H_1)                S (T G_m^T + H_m)
    communication   S T (I + G_1^T + H_1)                  S T (G_m^T + H_m)

where ``S = (I + T G_0^T)^r`` and ``r`` is the longest path length in the graph
of ``G_0``, which has to be acyclic.
"""

from __future__ import annotations

import enum
import graphlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .distributions import ServiceDistribution, parse_distribution
from .expr import ExprMatrix, tau
from .matrix import TropicalMatrix
from .stochastic import DEFAULT_SEED, RandomMatrixProcess, StreamRef, StreamSampler

__all__ = [
    "Blocking",
    "ModelInvalidError",
    "NetworkSpec",
    "PartialGraphs",
    "CompiledModel",
    "build_partial_graphs",
    "longest_path",
    "compile_network",
    "simulate_departures",
    "lifted_trajectory",
    "round_robin_expand",
    "load_spec",
    "spec_from_dict",
    "PRESETS",
    "preset",
]

INF = math.inf
NEG_INF = -math.inf


class ModelInvalidError(ValueError):
    """The network violates an assumption of the max-plus model."""


class Blocking(enum.Enum):
    NONE = "none"
    MANUFACTURING = "manufacturing"
    COMMUNICATION = "communication"

    @classmethod
    def parse(cls, text) -> "Blocking":
        if isinstance(text, Blocking):
            return text
        key = (text or "none").strip().lower()
        aliases = {"bas": "manufacturing", "bbs": "communication", "infinite": "none"}
        key = aliases.get(key, key)
        for b in cls:
            if b.value == key:
                return b
        raise ValueError(f"unknown blocking rule {text!r}")


@dataclass(frozen=True)
class NetworkSpec:
    """Topology, initial customers ``c``, buffer capacities ``b`` and service laws.

    Source nodes (no predecessors) must have ``c = inf``.  ``streams`` and
    ``wiring`` are optional overrides of where each node draws its service
    times from (see :class:`~maxplus_lyapunov.stochastic.StreamRef`).
    """

    n: int
    arcs: tuple[tuple[int, int], ...]
    c: tuple[float, ...]
    b: tuple[float, ...]
    service: tuple[ServiceDistribution, ...]
    blocking: Blocking = Blocking.NONE
    streams: Optional[Mapping[int, ServiceDistribution]] = None
    wiring: Optional[Mapping[int, StreamRef]] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(sorted({(int(i), int(j)) for i, j in self.arcs})))
        object.__setattr__(self, "blocking", Blocking.parse(self.blocking))
        c = tuple(INF if x is None else float(x) for x in self.c)
        b = tuple(INF if x is None else float(x) for x in self.b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "service", tuple(self.service))

    def predecessors(self, i: int) -> set[int]:
        return {a for a, z in self.arcs if z == i}

    def successors(self, i: int) -> set[int]:
        return {z for a, z in self.arcs if a == i}

    @property
    def sources(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n) if not self.predecessors(i))

    def validate(self) -> None:
        """Raise :class:`ModelInvalidError` naming the first violated assumption."""
        n = self.n
        if n < 1:
            raise ModelInvalidError("a network needs at least one node")
        for name, seq in (("c", self.c), ("b", self.b), ("service", self.service)):
            if len(seq) != n:
                raise ModelInvalidError(f"{name} has {len(seq)} entries for {n} nodes")
        for i, j in self.arcs:
            if not (0 <= i < n and 0 <= j < n):
                raise ModelInvalidError(f"arc ({i}, {j}) refers to a missing node")
        sources = set(self.sources)
        for i in range(n):
            ci, bi = self.c[i], self.b[i]
            if i in sources:
                if ci != INF:
                    raise ModelInvalidError(f"source node {i} must hold infinitely many customers")
            elif not (math.isfinite(ci) and ci >= 0 and float(ci).is_integer()):
                raise ModelInvalidError(f"node {i}: initial customers must be a finite integer >= 0")
            if not (bi == INF or (bi >= 0 and float(bi).is_integer())):
                raise ModelInvalidError(f"node {i}: buffer capacity must be an integer >= 0 or inf")
            if bi < ci:
                raise ModelInvalidError(f"node {i}: buffer capacity {bi} is below initial customers {ci}")
        for i, d in enumerate(self.service):
            if not isinstance(d, ServiceDistribution):
                raise ModelInvalidError(f"node {i}: service law missing")
            if not d.is_nonnegative():
                raise ModelInvalidError(f"node {i}: service times must be nonnegative")
        _topological_order(self)

    def process_streams(self) -> tuple[dict, Optional[dict]]:
        if self.streams is None:
            return {i: d for i, d in enumerate(self.service)}, None
        return dict(self.streams), dict(self.wiring or {})

    def with_blocking(self, blocking) -> "NetworkSpec":
        return NetworkSpec(self.n, self.arcs, self.c, self.b, self.service, blocking,
                           self.streams, self.wiring, self.name)

    def to_dict(self) -> dict:
        def num(x):
            return "inf" if x == INF else int(x)
        out = {
            "name": self.name,
            "nodes": [{"id": i, "c": num(self.c[i]), "b": num(self.b[i]), "service": str(self.service[i])}
                      for i in range(self.n)],
            "arcs": [list(a) for a in self.arcs],
            "blocking": self.blocking.value,
        }
        if self.streams is not None:
            out["streams"] = {str(k): str(v) for k, v in sorted(self.streams.items())}
            out["wiring"] = {str(k): [r.stream, r.stride, r.offset] for k, r in sorted(self.wiring.items())}
        return out


def _g0_arcs(spec: NetworkSpec):
    return [(i, j) for i, j in spec.arcs if spec.c[j] == 0]


def _topological_order(spec: NetworkSpec) -> list[int]:
    graph = {j: set() for j in range(spec.n)}
    for i, j in _g0_arcs(spec):
        graph[j].add(i)
    try:
        return list(graphlib.TopologicalSorter(graph).static_order())
    except graphlib.CycleError as exc:
        cycle = exc.args[1] if len(exc.args) > 1 else ()
        raise ModelInvalidError(f"arcs into empty nodes form a cycle: {list(cycle)}") from None


def longest_path(spec: NetworkSpec) -> int:
    """Number of arcs on the longest path of the graph of ``G_0``."""
    order = _topological_order(spec)
    depth = {i: 0 for i in range(spec.n)}
    arcs = _g0_arcs(spec)
    succ = {i: [j for a, j in arcs if a == i] for i in range(spec.n)}
    for i in order:
        for j in succ[i]:
            depth[j] = max(depth[j], depth[i] + 1)
    return max(depth.values(), default=0)


@dataclass(frozen=True)
class PartialGraphs:
    G: tuple[TropicalMatrix, ...]  # G[m] for m = 0..M
    H: dict  # m -> TropicalMatrix for m = 1..M2
    M1: int
    M2: int

    @property
    def M(self) -> int:
        return len(self.G) - 1


def build_partial_graphs(spec: NetworkSpec, min_delay: int = 0) -> PartialGraphs:
    """``G_0 .. G_M`` and ``H_1 .. H_{M2}`` as 0 / -inf matrices."""
    spec.validate()
    n = spec.n
    finite_c = [int(x) for x in spec.c if math.isfinite(x)]
    finite_b = [int(x) for x in spec.b if math.isfinite(x)]
    m1 = max(finite_c, default=0)
    m2 = max(finite_b) + 1 if finite_b else 0
    big_m = max(m1, m2, min_delay)
    G = []
    for m in range(big_m + 1):
        g = np.full((n, n), NEG_INF)
        for i, j in spec.arcs:
            if spec.c[j] == m:
                g[i, j] = 0.0
        G.append(TropicalMatrix(g))
    H = {}
    for m in range(1, m2 + 1):
        h = np.full((n, n), NEG_INF)
        for i, j in spec.arcs:
            if math.isfinite(spec.b[j]) and m == spec.b[j] + 1:
                h[i, j] = 0.0
        H[m] = TropicalMatrix(h)
    return PartialGraphs(tuple(G), H, m1, m2)


@dataclass(frozen=True)
class CompiledModel:
    spec: NetworkSpec
    graphs: PartialGraphs
    r: int
    A: tuple[ExprMatrix, ...]  # A[m-1] is A_m(k)
    lifted: RandomMatrixProcess

    @property
    def M(self) -> int:
        return len(self.A)

    def delay_process(self, m: int) -> RandomMatrixProcess:
        """The process of ``A_m(k)`` alone, sharing the lifted process's streams."""
        return self.lifted.with_exprs(self.A[m - 1], f"{self.lifted.name}:A{m}")


def _as_expr(m: TropicalMatrix) -> ExprMatrix:
    return ExprMatrix.from_constants(m.values)


def compile_network(spec: NetworkSpec, seed: int = DEFAULT_SEED, min_delay: int = 1) -> CompiledModel:
    """Build the symbolic ``A_m(k)`` and the first-order lifted process.

    ``min_delay`` forces at least that many delay blocks (extra ``A_m`` are
    zero), which is how the lifting is exercised on single-delay networks.
    """
    graphs = build_partial_graphs(spec, min_delay)
    n = spec.n
    r = longest_path(spec)
    blocking = spec.blocking
    big_m = max(graphs.M, 1, min_delay) if blocking is not Blocking.NONE else max(graphs.M1, 1, min_delay)
    G = [_as_expr(g) for g in graphs.G] + [ExprMatrix.zeros(n, n)] * (big_m + 1 - len(graphs.G))
    zero = ExprMatrix.zeros(n, n)
    H = {m: _as_expr(h) for m, h in graphs.H.items()} if blocking is not Blocking.NONE else {}
    I = ExprMatrix.identity(n)
    T = ExprMatrix.diag([tau(i) for i in range(n)])
    S = (I + T @ G[0].T) ** r
    mats = []
    for m in range(1, big_m + 1):
        Gm_t = G[m].T
        Hm = H.get(m, zero)
        base = (I + Gm_t) if m == 1 else Gm_t
        if blocking is Blocking.NONE:
            am = S @ (T @ base)
        elif blocking is Blocking.MANUFACTURING:
            am = S @ (T @ base + Hm)
        else:
            am = S @ (T @ (base + Hm))
        mats.append(am)
    streams, wiring = spec.process_streams()
    lifted_exprs = _companion(mats)
    lifted = RandomMatrixProcess(lifted_exprs, streams, seed, wiring, spec.name)
    return CompiledModel(spec, graphs, r, tuple(mats), lifted)


def _companion(mats: Sequence[ExprMatrix]) -> ExprMatrix:
    """Block companion form for the state ``(x(k), x(k-1), ..., x(k-M+1))``."""
    big_m = len(mats)
    if big_m == 1:
        return mats[0]
    n = mats[0].rows
    zero = ExprMatrix.zeros(n, n).entries
    eye = ExprMatrix.identity(n).entries
    rows = []
    for bi in range(big_m):
        for i in range(n):
            row = []
            for bj in range(big_m):
                if bi == 0:
                    row.extend(mats[bj].entries[i])
                elif bj == bi - 1:
                    row.extend(eye[i])
                else:
                    row.extend(zero[i])
            rows.append(row)
    return ExprMatrix(rows)


def simulate_departures(model: CompiledModel, k: int, replication: int = 0) -> np.ndarray:
    """Departure epochs ``x(1..k)`` from the multi-delay recursion, shape ``(k, n)``."""
    n, big_m = model.spec.n, model.M
    samplers = [StreamSampler(model.delay_process(m), replication) for m in range(1, big_m + 1)]
    mats = [s.trajectory(1, k) for s in samplers]
    hist = np.full((k + big_m, n), NEG_INF)  # hist[t + big_m - 1] = x(t)
    hist[big_m - 1] = 0.0
    for t in range(1, k + 1):
        x = np.full(n, NEG_INF)
        for m in range(1, big_m + 1):
            prev = hist[t - m + big_m - 1]
            x = np.maximum(x, (mats[m - 1][t - 1] + prev[None, :]).max(axis=1))
        hist[t + big_m - 1] = x
    return hist[big_m:]


def lifted_trajectory(model: CompiledModel, k: int, replication: int = 0) -> np.ndarray:
    """Lifted states ``y(1..k)`` with ``y(k) = A(k) y(k-1)``, shape ``(k, n*M)``."""
    n, big_m = model.spec.n, model.M
    mats = StreamSampler(model.lifted, replication).trajectory(1, k)
    y = np.full(n * big_m, NEG_INF)
    y[:n] = 0.0
    out = np.empty((k, n * big_m))
    for t in range(k):
        y = (mats[t] + y[None, :]).max(axis=1)
        out[t] = y
    return out


# presets ------------------------------------------------------------------


def _dists(services, n):
    if isinstance(services, (ServiceDistribution, str)):
        services = [services] * n
    out = [parse_distribution(s) if isinstance(s, str) else s for s in services]
    if len(out) != n:
        raise ValueError(f"expected {n} service laws, got {len(out)}")
    return out


def open_tandem(n: int = 3, services=("exp(1)", "exp(2)", "exp(3)")) -> NetworkSpec:
    services = _dists(services, n)
    arcs = [(i, i + 1) for i in range(n - 1)]
    c = [INF] + [0] * (n - 1)
    return NetworkSpec(n, arcs, c, [INF] * n, services, Blocking.NONE, name="open_tandem")


def closed_tandem(n: int = 2, services="exp(1)", customers=1) -> NetworkSpec:
    services = _dists(services, n)
    arcs = [(i, (i + 1) % n) for i in range(n)]
    c = [customers] * n if np.isscalar(customers) else list(customers)
    return NetworkSpec(n, arcs, c, [INF] * n, services, Blocking.NONE, name="closed_tandem")


def manufacturing_tandem(n: int = 3, services="exp(1)", buffers=(INF, INF, 0)) -> NetworkSpec:
    services = _dists(services, n)
    arcs = [(i, i + 1) for i in range(n - 1)]
    c = [INF] + [0] * (n - 1)
    return NetworkSpec(n, arcs, c, list(buffers), services, Blocking.MANUFACTURING, name="manufacturing_tandem")


def communication_tandem(n: int = 3, services="exp(1)", buffers=(INF, 0, 0)) -> NetworkSpec:
    services = _dists(services, n)
    arcs = [(i, i + 1) for i in range(n - 1)]
    c = [INF] + [0] * (n - 1)
    return NetworkSpec(n, arcs, c, list(buffers), services, Blocking.COMMUNICATION, name="communication_tandem")


def fork_join_5(services=("det(1)", "det(2)", "det(3)", "det(4)", "det(5)")) -> NetworkSpec:
    """Five-node network: 1 -> 2, 2 forks to 3 and 4, 3 feeds back into 2 and on to 5, 4 -> 5."""
    services = _dists(services, 5)
    arcs = [(0, 1), (1, 2), (1, 3), (2, 1), (2, 4), (3, 4)]
    c = [INF, 0, 1, 0, 1]
    return NetworkSpec(5, arcs, c, [INF] * 5, services, Blocking.NONE, name="fork_join_5")


def round_robin_expand(l: int = 2, arrival="exp(1)", services="exp(1)") -> NetworkSpec:
    """Fork-join equivalent of a source routing customers cyclically over ``l`` queues.

    Nodes ``0 .. l-1`` are the original queues; nodes ``l .. 2l-1`` form a
    cycle holding one customer at node ``l`` and together replay the arrival
    stream: node ``l + j`` (0-based ``j``) serves its k-th customer for the
    arrival stream's value number ``(k - 1) l + j + 1``.
    """
    if l < 2:
        raise ValueError("round robin needs at least two queues")
    queue_laws = _dists(services, l)
    arrival = _dists(arrival, 1)[0]
    n = 2 * l
    arcs = []
    for j in range(l):
        arcs.append((l + j, j))
        arcs.append((l + j, l + (j + 1) % l))
    c = [0] * l + [1] + [0] * (l - 1)
    arrival_stream = n
    streams = {j: queue_laws[j] for j in range(l)}
    streams[arrival_stream] = arrival
    wiring = {j: StreamRef(j) for j in range(l)}
    for j in range(l):
        # 1-based: node l+1+j reads arrival value k*l - 2l + (l+1+j)
        wiring[l + j] = StreamRef(arrival_stream, l, 1 + j - l)
    service = queue_laws + [arrival] * l
    return NetworkSpec(n, arcs, c, [INF] * n, service, Blocking.NONE, streams, wiring, name="round_robin")


PRESETS = {
    "open_tandem": open_tandem,
    "closed_tandem": closed_tandem,
    "manufacturing_tandem": manufacturing_tandem,
    "communication_tandem": communication_tandem,
    "fork_join_5": fork_join_5,
    "round_robin": round_robin_expand,
}


def preset(name: str, **kwargs) -> NetworkSpec:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return factory(**kwargs)


# file format ----------------------------------------------------------------


def _count(x) -> float:
    if x is None:
        return INF
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "infinity", "+inf"):
            return INF
        return float(x)
    return float(x)


def spec_from_dict(data: Mapping) -> NetworkSpec:
    """Build a spec from the JSON layout ``{nodes: [...], arcs: [...], blocking}``."""
    if "preset" in data:
        return preset(data["preset"], **dict(data.get("args", {})))
    nodes = data.get("nodes")
    if not nodes:
        raise ValueError("network spec needs a non-empty 'nodes' list")
    ids = [nd.get("id", k) for k, nd in enumerate(nodes)]
    if len(set(map(str, ids))) != len(ids):
        raise ValueError("duplicate node ids")
    index = {str(x): k for k, x in enumerate(ids)}
    arcs = []
    for arc in data.get("arcs", []):
        if len(arc) != 2:
            raise ValueError(f"bad arc {arc!r}")
        try:
            arcs.append((index[str(arc[0])], index[str(arc[1])]))
        except KeyError as exc:
            raise ValueError(f"arc {arc!r} refers to an unknown node") from exc
    preds = {j for _, j in arcs}
    c, b, service = [], [], []
    for k, nd in enumerate(nodes):
        default_c = None if k not in preds else 0
        c.append(_count(nd.get("c", default_c)))
        b.append(_count(nd.get("b")))
        law = nd.get("service")
        if law is None:
            raise ValueError(f"node {ids[k]!r} has no service law")
        service.append(parse_distribution(law) if isinstance(law, str) else ServiceDistribution(**law))
    return NetworkSpec(len(nodes), arcs, c, b, service, Blocking.parse(data.get("blocking", "none")),
                       name=str(data.get("name", "")))


def load_spec(path) -> NetworkSpec:
    return spec_from_dict(json.loads(Path(path).read_text()))
