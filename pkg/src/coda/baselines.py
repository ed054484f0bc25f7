"""Comparison schedulers: HEFT restricted to the cloud, RTR-RP and CloudPath.

All three share the cost model in :mod:`coda.ranking` and return a
:class:`~coda.model.Matching` with an empty trace.
"""

from __future__ import annotations

from statistics import fmean

from .model import (
    Matching,
    NoFeasibleResource,
    StreamApplication,
    Topology,
    channel_between,
    matching_from_assignment,
    topological_order,
)
from .ranking import dominant_flow, ingress, residual_bandwidth, stream_time


def _has_room(topology: Topology, used: dict[str, int], rid: str) -> bool:
    return used.get(rid, 0) < topology.resources[rid].capacity


def _fastest(app, topology, mid, placed, pool):
    flows = ingress(app, topology, mid, placed)
    return min(pool, key=lambda rid: (stream_time(app, topology, mid, rid, flows), rid))


def _finish(app, topology, placed, order) -> Matching:
    return matching_from_assignment(placed, topology.resource_ids(), order=order)


def upward_ranks(app: StreamApplication, topology: Topology, resources: list[str]) -> dict[str, float]:
    """HEFT upward ranks with costs averaged over ``resources``.

    Compute cost is the co-located stream time (element count times
    cpu/speed); communication cost uses the mean bandwidth and latency of the
    channels among ``resources`` (zero when there is only one).
    """
    links = [topology.channels[(q, j)] for q in resources for j in resources if (q, j) in topology.channels]
    mean_bw = fmean(ch.bandwidth for ch in links) if links else None
    mean_lat = fmean(ch.latency for ch in links) if links else 0.0

    def compute(mid):
        m = app.microservices[mid]
        k = max(s.size for _, s in app.ingress_streams(mid))
        return fmean(k * m.cpu_demand / topology.resources[r].cpu_speed for r in resources)

    def comm(stream):
        if mean_bw is None:
            return 0.0
        return sum(x / mean_bw + mean_lat for x in stream.element_sizes)

    ranks: dict[str, float] = {}
    for mid in reversed(topological_order(app)):
        tail = [comm(e.stream) + ranks[e.downstream] for e in app.downstream_edges(mid)]
        ranks[mid] = compute(mid) + (max(tail) if tail else 0.0)
    return ranks


def heft_oc(app: StreamApplication, topology: Topology) -> Matching:
    """HEFT over cloud-tier resources only, without insertion."""
    clouds = [r.id for r in topology.by_tier("cloud")]
    if not clouds:
        raise NoFeasibleResource(app.source_id, "no cloud-tier resource")
    ranks = upward_ranks(app, topology, clouds)
    topo = {mid: i for i, mid in enumerate(topological_order(app))}
    order = sorted(app.microservices, key=lambda mid: (-ranks[mid], topo[mid], mid))

    placed: dict[str, str] = {}
    finish: dict[str, float] = {}
    avail = {r: 0.0 for r in clouds}
    used: dict[str, int] = {}
    for mid in order:
        m = app.microservices[mid]
        ready = max((finish[e.upstream] for e in app.upstream_edges(mid)), default=0.0)
        flows = ingress(app, topology, mid, placed)
        best = None
        for rid in clouds:
            if not (topology.resources[rid].fits(m) and _has_room(topology, used, rid)):
                continue
            eft = max(ready, avail[rid]) + stream_time(app, topology, mid, rid, flows)
            if best is None or eft < best[0]:
                best = (eft, rid)
        if best is None:
            raise NoFeasibleResource(mid, "no cloud resource can host it")
        finish[mid], rid = best
        avail[rid] = finish[mid]
        placed[mid] = rid
        used[rid] = used.get(rid, 0) + 1
    return _finish(app, topology, placed, order)


def rtr_rp(app: StreamApplication, topology: Topology) -> Matching:
    """Greedy response-time placement on fog; cloud takes the sink and the overflow.

    A fog resource qualifies when it has room, satisfies memory/storage and
    leaves positive residual bandwidth on the heaviest incoming stream.
    """
    fog = [r.id for r in topology.by_tier("fog1") + topology.by_tier("fog2")]
    clouds = [r.id for r in topology.by_tier("cloud")]
    placed: dict[str, str] = {}
    used: dict[str, int] = {}
    order = topological_order(app)
    for mid in order:
        m = app.microservices[mid]

        def ok(rid):
            return topology.resources[rid].fits(m) and _has_room(topology, used, rid)

        pool = []
        if mid != app.sink_id:
            q, stream = dominant_flow(ingress(app, topology, mid, placed))
            pool = [
                rid for rid in fog
                if ok(rid) and residual_bandwidth(stream, channel_between(topology, q, rid)) > 0
            ]
        if not pool:
            pool = [rid for rid in clouds if ok(rid)]
        if not pool:
            raise NoFeasibleResource(mid)
        placed[mid] = _fastest(app, topology, mid, placed, pool)
        used[placed[mid]] = used.get(placed[mid], 0) + 1
    return _finish(app, topology, placed, order)


def cloudpath(app: StreamApplication, topology: Topology) -> Matching:
    """Lowest tier first: fog1, then fog2, then cloud; fastest resource within the tier."""
    placed: dict[str, str] = {}
    used: dict[str, int] = {}
    order = topological_order(app)
    for mid in order:
        m = app.microservices[mid]
        for tier in ("fog1", "fog2", "cloud"):
            pool = [
                r.id for r in topology.by_tier(tier)
                if r.fits(m) and _has_room(topology, used, r.id)
            ]
            if pool:
                break
        else:
            raise NoFeasibleResource(mid)
        placed[mid] = _fastest(app, topology, mid, placed, pool)
        used[placed[mid]] = used.get(placed[mid], 0) + 1
    return _finish(app, topology, placed, order)


ALGORITHMS = {
    "heft_oc": heft_oc,
    "rtr_rp": rtr_rp,
    "cloudpath": cloudpath,
}
