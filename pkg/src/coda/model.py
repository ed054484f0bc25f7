"""Domain entities: stream applications, resources, channels and matchings.

Canonical units everywhere inside the package: work in MI, speed in MI/s,
data in bits, bandwidth in bits/s, time in seconds, rates in 1/s. The
scenario loader is the only place that sees MB / Mbit/s / ms.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

# 1 MB = 8e6 bits (decimal megabytes)
BITS_PER_MB = 8e6
BYTES_PER_MB = 1e6
BYTES_PER_GB = 1e9
BITS_PER_MBIT = 1e6

TIERS = ("fog1", "fog2", "cloud")


class CodaError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(CodaError, ValueError):
    pass


class CycleDetected(ValidationError):
    pass


class MultipleSources(ValidationError):
    pass


class MultipleSinks(ValidationError):
    pass


class DanglingEdge(ValidationError):
    pass


class UnreachableMicroservice(ValidationError):
    pass


class ChannelMissing(CodaError, LookupError):
    pass


class NoFeasibleResource(CodaError):
    def __init__(self, microservice: str, reason: str = "no resource satisfies its requirements"):
        super().__init__(f"{microservice}: {reason}")
        self.microservice = microservice


class UnplacedMicroservice(CodaError):
    def __init__(self, microservices: Sequence[str]):
        super().__init__("unplaced microservices: " + ", ".join(microservices))
        self.microservices = list(microservices)


@dataclass(frozen=True)
class Microservice:
    id: str
    cpu_demand: float  # MI per element
    mem_demand: float = 0.0  # bytes
    stor_demand: float = 0.0  # bytes

    def __post_init__(self):
        if not self.cpu_demand > 0:
            raise ValidationError(f"microservice {self.id}: cpu_demand must be > 0")
        if self.mem_demand < 0 or self.stor_demand < 0:
            raise ValidationError(f"microservice {self.id}: negative memory/storage demand")


@dataclass(frozen=True)
class DataStream:
    """A finite stream of elements (sizes in bits) arriving at ``ingress_rate`` per second."""

    element_sizes: tuple[float, ...]
    ingress_rate: float

    def __post_init__(self):
        object.__setattr__(self, "element_sizes", tuple(float(s) for s in self.element_sizes))
        if not self.element_sizes:
            raise ValidationError("data stream must contain at least one element")
        if any(not s > 0 for s in self.element_sizes):
            raise ValidationError("element sizes must be > 0")
        if not self.ingress_rate > 0:
            raise ValidationError("ingress_rate must be > 0")

    @property
    def size(self) -> int:
        return len(self.element_sizes)

    @property
    def ingress_traffic(self) -> float:
        """Sum over elements of rate * size, in bits/s."""
        return sum(self.ingress_rate * s for s in self.element_sizes)


@dataclass(frozen=True)
class Edge:
    upstream: str
    downstream: str
    stream: DataStream


@dataclass(frozen=True)
class StreamApplication:
    microservices: Mapping[str, Microservice]
    edges: tuple[Edge, ...]
    source_id: str
    sink_id: str
    src_stream: DataStream

    def upstream_edges(self, mid: str) -> list[Edge]:
        return [e for e in self.edges if e.downstream == mid]

    def downstream_edges(self, mid: str) -> list[Edge]:
        return [e for e in self.edges if e.upstream == mid]

    def ingress_streams(self, mid: str) -> list[tuple[str | None, DataStream]]:
        """Incoming ``(upstream id, stream)`` pairs; the source gets ``(None, src_stream)``."""
        if mid == self.source_id:
            return [(None, self.src_stream)]
        return [(e.upstream, e.stream) for e in self.upstream_edges(mid)]

    def replace(self, microservices=None, edges=None, src_stream=None) -> "StreamApplication":
        return StreamApplication(
            microservices=microservices if microservices is not None else self.microservices,
            edges=tuple(edges) if edges is not None else self.edges,
            source_id=self.source_id,
            sink_id=self.sink_id,
            src_stream=src_stream if src_stream is not None else self.src_stream,
        )


@dataclass(frozen=True)
class Resource:
    id: str
    cpu_speed: float  # MI/s
    mem: float  # bytes
    stor: float  # bytes
    capacity: int = 1
    tier: str = "cloud"

    def __post_init__(self):
        if not self.cpu_speed > 0:
            raise ValidationError(f"resource {self.id}: cpu_speed must be > 0")
        if int(self.capacity) != self.capacity or self.capacity < 1:
            raise ValidationError(f"resource {self.id}: capacity must be a positive integer")
        if self.mem < 0 or self.stor < 0:
            raise ValidationError(f"resource {self.id}: negative memory/storage")
        if self.tier not in TIERS:
            raise ValidationError(f"resource {self.id}: unknown tier {self.tier!r}")

    def fits(self, m: Microservice) -> bool:
        # strict inequalities, as in the microservice-side ranking filter
        return m.mem_demand < self.mem and m.stor_demand < self.stor


@dataclass(frozen=True)
class NetworkChannel:
    from_id: str
    to_id: str
    latency: float  # round-trip, seconds
    bandwidth: float  # bits/s; math.inf on the self-channel

    def __post_init__(self):
        if self.latency < 0:
            raise ValidationError(f"channel {self.from_id}->{self.to_id}: negative latency")
        if not self.bandwidth > 0:
            raise ValidationError(f"channel {self.from_id}->{self.to_id}: bandwidth must be > 0")

    @property
    def is_self(self) -> bool:
        return self.from_id == self.to_id


@dataclass(frozen=True)
class Topology:
    resources: Mapping[str, Resource]
    channels: Mapping[tuple[str, str], NetworkChannel]
    src_gateway: str

    def __post_init__(self):
        if self.src_gateway not in self.resources:
            raise ValidationError(f"src_gateway {self.src_gateway!r} is not a declared resource")
        for (q, j), ch in self.channels.items():
            if q not in self.resources or j not in self.resources:
                raise ValidationError(f"channel {q}->{j} references an unknown resource")
            if (ch.from_id, ch.to_id) != (q, j):
                raise ValidationError(f"channel keyed {q}->{j} describes {ch.from_id}->{ch.to_id}")

    def resource_ids(self) -> list[str]:
        return sorted(self.resources)

    def capacities(self) -> dict[str, int]:
        return {rid: self.resources[rid].capacity for rid in self.resource_ids()}

    def by_tier(self, tier: str) -> list[Resource]:
        return [self.resources[r] for r in self.resource_ids() if self.resources[r].tier == tier]


def build_topology(
    resources: Iterable[Resource],
    channels: Iterable[NetworkChannel],
    src_gateway: str,
) -> Topology:
    res: dict[str, Resource] = {}
    for r in resources:
        if r.id in res:
            raise ValidationError(f"duplicate resource id {r.id!r}")
        res[r.id] = r
    chans: dict[tuple[str, str], NetworkChannel] = {}
    for ch in channels:
        key = (ch.from_id, ch.to_id)
        if ch.is_self:
            raise ValidationError(f"self-channel on {ch.from_id} must not be declared")
        if key in chans:
            raise ValidationError(f"duplicate channel {key[0]}->{key[1]}")
        chans[key] = ch
    return Topology(
        resources={k: res[k] for k in sorted(res)},
        channels={k: chans[k] for k in sorted(chans)},
        src_gateway=src_gateway,
    )


def channel_between(topology: Topology, q_id: str, j_id: str) -> NetworkChannel:
    """Return the channel from ``q_id`` to ``j_id``.

    Co-located endpoints get a virtual channel with zero latency and infinite
    bandwidth.
    """
    for rid in (q_id, j_id):
        if rid not in topology.resources:
            raise ChannelMissing(f"unknown resource {rid!r}")
    if q_id == j_id:
        return NetworkChannel(q_id, j_id, latency=0.0, bandwidth=math.inf)
    try:
        return topology.channels[(q_id, j_id)]
    except KeyError:
        raise ChannelMissing(f"no channel declared from {q_id} to {j_id}") from None


def build_application(
    microservices: Iterable[Microservice],
    edges: Iterable[tuple[str, str, DataStream]],
    source_id: str,
    sink_id: str,
    src_stream: DataStream,
) -> StreamApplication:
    """Validate and assemble a stream application DAG."""
    ms: dict[str, Microservice] = {}
    for m in microservices:
        if m.id in ms:
            raise ValidationError(f"duplicate microservice id {m.id!r}")
        ms[m.id] = m
    if not ms:
        raise ValidationError("application needs at least one microservice")
    for name, mid in (("source", source_id), ("sink", sink_id)):
        if mid not in ms:
            raise DanglingEdge(f"{name} {mid!r} is not a declared microservice")

    built: list[Edge] = []
    seen: set[tuple[str, str]] = set()
    for u, v, stream in edges:
        if u not in ms or v not in ms:
            raise DanglingEdge(f"edge {u}->{v} references an undeclared microservice")
        if u == v:
            raise CycleDetected(f"self-loop on {u}")
        if (u, v) in seen:
            raise ValidationError(f"duplicate edge {u}->{v}")
        seen.add((u, v))
        built.append(Edge(u, v, stream))
    built.sort(key=lambda e: (e.upstream, e.downstream))

    app = StreamApplication(
        microservices={k: ms[k] for k in sorted(ms)},
        edges=tuple(built),
        source_id=source_id,
        sink_id=sink_id,
        src_stream=src_stream,
    )
    _validate_dag(app)
    return app


def _validate_dag(app: StreamApplication) -> None:
    # raises CycleDetected on its own
    topological_order(app)

    has_in = {e.downstream for e in app.edges}
    has_out = {e.upstream for e in app.edges}
    if app.source_id in has_in:
        raise MultipleSources(f"source {app.source_id} has upstream microservices")
    if app.sink_id in has_out:
        raise MultipleSinks(f"sink {app.sink_id} has downstream microservices")
    for mid in app.microservices:
        if mid != app.source_id and mid not in has_in:
            raise MultipleSources(f"{mid} has no upstream but is not the source")
        if mid != app.sink_id and mid not in has_out:
            raise MultipleSinks(f"{mid} has no downstream but is not the sink")

    fwd = _reach(app.source_id, {(e.upstream, e.downstream) for e in app.edges})
    bwd = _reach(app.sink_id, {(e.downstream, e.upstream) for e in app.edges})
    for mid in app.microservices:
        if mid not in fwd:
            raise UnreachableMicroservice(f"{mid} is not reachable from {app.source_id}")
        if mid not in bwd:
            raise UnreachableMicroservice(f"{app.sink_id} is not reachable from {mid}")


def _reach(start: str, arcs: set[tuple[str, str]]) -> set[str]:
    adj: dict[str, list[str]] = {}
    for a, b in arcs:
        adj.setdefault(a, []).append(b)
    seen = {start}
    stack = [start]
    while stack:
        for nxt in adj.get(stack.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def topological_order(app: StreamApplication) -> list[str]:
    """Kahn's algorithm; ties between ready microservices go to the smallest id."""
    indeg = {mid: 0 for mid in app.microservices}
    succ: dict[str, list[str]] = {mid: [] for mid in app.microservices}
    for e in app.edges:
        indeg[e.downstream] += 1
        succ[e.upstream].append(e.downstream)
    ready = [mid for mid, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        mid = heapq.heappop(ready)
        order.append(mid)
        for nxt in succ[mid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                heapq.heappush(ready, nxt)
    if len(order) != len(indeg):
        raise CycleDetected("edge relation contains a cycle")
    return order


def dag_levels(app: StreamApplication) -> list[list[str]]:
    """Group microservices by longest-path distance from the source.

    Every upstream of a microservice lies in a strictly earlier level.
    """
    depth: dict[str, int] = {}
    for mid in topological_order(app):
        ups = [depth[e.upstream] for e in app.upstream_edges(mid)]
        depth[mid] = max(ups) + 1 if ups else 0
    levels: list[list[str]] = [[] for _ in range(max(depth.values()) + 1)]
    for mid in sorted(depth):
        levels[depth[mid]].append(mid)
    return levels


@dataclass(frozen=True)
class TraceEvent:
    step: int
    state: str  # "S1", "S2", "S2.1" or "S2.2"
    microservice: str
    resource: str

    def format(self) -> str:
        return f"{self.step} {self.state} {self.microservice} {self.resource}"


@dataclass
class Matching:
    """A (possibly partial) placement of microservices on resources.

    ``alloc`` lists are ordered by residual bandwidth, best first, whenever
    the producer knows the scores; baselines order them by placement time.
    """

    assignment: dict[str, str] = field(default_factory=dict)
    alloc: dict[str, list[str]] = field(default_factory=dict)
    unplaced: list[str] = field(default_factory=list)
    trace: list[TraceEvent] = field(default_factory=list)
    stages: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        """Number of proposals made; S2.1/S2.2 records share their proposal's step."""
        return len({ev.step for ev in self.trace})

    def trace_lines(self) -> list[str]:
        return [ev.format() for ev in self.trace]

    def check_consistency(self, capacities: Mapping[str, int] | None = None) -> list[str]:
        """Structural problems with this matching; an empty list means consistent."""
        problems = []
        seen: dict[str, str] = {}
        for rid, members in self.alloc.items():
            for mid in members:
                if mid in seen:
                    problems.append(f"{mid} allocated on both {seen[mid]} and {rid}")
                seen[mid] = rid
            if capacities is not None and len(members) > capacities.get(rid, 0):
                problems.append(f"{rid} holds {len(members)} > capacity {capacities.get(rid, 0)}")
        if seen != self.assignment:
            problems.append("assignment and alloc are not mutual inverses")
        for mid in self.unplaced:
            if mid in self.assignment:
                problems.append(f"{mid} is both placed and unplaced")
        return problems


def matching_from_assignment(
    assignment: Mapping[str, str], resource_ids: Iterable[str], order: Sequence[str] | None = None
) -> Matching:
    """Build a Matching whose alloc lists follow ``order`` (default: by id)."""
    alloc: dict[str, list[str]] = {rid: [] for rid in resource_ids}
    for mid in order if order is not None else sorted(assignment):
        if mid in assignment:
            alloc.setdefault(assignment[mid], []).append(mid)
    return Matching(assignment=dict(assignment), alloc=alloc)
