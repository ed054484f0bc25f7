"""Application-side and provider-side objectives of a placement."""

from __future__ import annotations

from dataclasses import dataclass, field

from .model import (
    Matching,
    StreamApplication,
    Topology,
    UnplacedMicroservice,
    channel_between,
    topological_order,
)
from .ranking import microservice_stream_time

# pseudo-upstream used as the key of the source stream edge
SRC = "@src"


@dataclass
class EvaluationReport:
    completion_time: float = 0.0
    total_traffic: float = 0.0
    per_microservice_completion: dict[str, float] = field(default_factory=dict)
    per_edge_traffic: dict[tuple[str, str], float] = field(default_factory=dict)


def _require_placed(app: StreamApplication, matching: Matching) -> None:
    missing = [m for m in app.microservices if m not in matching.assignment]
    if missing:
        raise UnplacedMicroservice(missing)


def _flows(app: StreamApplication, topology: Topology, matching: Matching, mid: str):
    """(upstream key, origin resource, stream) for each stream entering ``mid``."""
    for up, stream in app.ingress_streams(mid):
        if up is None:
            yield SRC, topology.src_gateway, stream
        else:
            yield up, matching.assignment[up], stream


def microservice_time(app: StreamApplication, topology: Topology, matching: Matching, mid: str) -> float:
    """Stream processing time of ``mid`` on its resource, worst incoming stream."""
    rid = matching.assignment[mid]
    m, r = app.microservices[mid], topology.resources[rid]
    return max(
        microservice_stream_time(m, stream, r, channel_between(topology, q, rid))
        for _, q, stream in _flows(app, topology, matching, mid)
    )


def completion_time(app: StreamApplication, matching: Matching, topology: Topology) -> EvaluationReport:
    _require_placed(app, matching)
    done: dict[str, float] = {}
    for mid in topological_order(app):
        ups = [done[e.upstream] for e in app.upstream_edges(mid)]
        done[mid] = (max(ups) if ups else 0.0) + microservice_time(app, topology, matching, mid)
    return EvaluationReport(completion_time=done[app.sink_id], per_microservice_completion=done)


def total_streaming_traffic(app: StreamApplication, matching: Matching, topology: Topology) -> EvaluationReport:
    """Sum over edges (source ingress included) of ingress traffic / channel bandwidth.

    Co-located edges ride the infinite-bandwidth self-channel and add 0.
    """
    _require_placed(app, matching)
    per_edge = {}
    for mid in app.microservices:
        rid = matching.assignment[mid]
        for key, q, stream in _flows(app, topology, matching, mid):
            ch = channel_between(topology, q, rid)
            per_edge[(key, mid)] = stream.ingress_traffic / ch.bandwidth
    per_edge = dict(sorted(per_edge.items()))
    return EvaluationReport(total_traffic=sum(per_edge.values()), per_edge_traffic=per_edge)


def evaluate(app: StreamApplication, matching: Matching, topology: Topology) -> EvaluationReport:
    times = completion_time(app, matching, topology)
    traffic = total_streaming_traffic(app, matching, topology)
    times.total_traffic = traffic.total_traffic
    times.per_edge_traffic = traffic.per_edge_traffic
    return times
