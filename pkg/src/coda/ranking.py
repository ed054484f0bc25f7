"""Cost model and the two preference tables.

Microservices rank resources by stream processing time (lower is better);
resources rank microservices by residual bandwidth (higher is better). Pairs
whose residual bandwidth is not strictly positive are dropped from both
sides, so the two tables always describe the same set of acceptable pairs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .model import (
    DataStream,
    Microservice,
    NetworkChannel,
    NoFeasibleResource,
    Resource,
    StreamApplication,
    Topology,
    channel_between,
)

log = logging.getLogger(__name__)

MODES = ("staged", "static")


def element_processing_time(m: Microservice, element_size: float, r: Resource, ch: NetworkChannel) -> float:
    """Compute + transmission + latency for one element received over ``ch``."""
    return m.cpu_demand / r.cpu_speed + element_size / ch.bandwidth + ch.latency


def microservice_stream_time(m: Microservice, stream: DataStream, r: Resource, ch: NetworkChannel) -> float:
    return sum(element_processing_time(m, x, r, ch) for x in stream.element_sizes)


def residual_bandwidth(stream: DataStream, ch: NetworkChannel) -> float:
    """Channel bandwidth left after the stream's ingress traffic (may be negative)."""
    if math.isinf(ch.bandwidth):
        return math.inf
    return ch.bandwidth - sum(stream.ingress_rate * x for x in stream.element_sizes)


def ingress(
    app: StreamApplication,
    topology: Topology,
    mid: str,
    placed: Mapping[str, str],
    mode: str = "staged",
) -> list[tuple[str, DataStream]]:
    """``(origin resource, stream)`` for every stream entering ``mid``.

    In ``staged`` mode the origin is the resource hosting the upstream
    microservice; in ``static`` mode every stream is assumed to originate at
    the source gateway. The source microservice always reads from the gateway.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    out = []
    for up, stream in app.ingress_streams(mid):
        if up is None or mode == "static":
            out.append((topology.src_gateway, stream))
        elif up in placed:
            out.append((placed[up], stream))
        else:
            raise NoFeasibleResource(mid, f"upstream {up} has no resource")
    return out


def stream_time(
    app: StreamApplication,
    topology: Topology,
    mid: str,
    rid: str,
    flows: Iterable[tuple[str, DataStream]],
) -> float:
    """Worst stream processing time over the incoming streams of ``mid`` on ``rid``."""
    m = app.microservices[mid]
    r = topology.resources[rid]
    return max(microservice_stream_time(m, s, r, channel_between(topology, q, rid)) for q, s in flows)


def dominant_flow(flows: list[tuple[str, DataStream]]) -> tuple[str, DataStream]:
    # heaviest ingress traffic; ties keep the first (flows come in upstream-id order)
    best = flows[0]
    for f in flows[1:]:
        if f[1].ingress_traffic > best[1].ingress_traffic:
            best = f
    return best


@dataclass
class PreferenceTables:
    rpl: dict[str, list[tuple[str, float]]] = field(default_factory=dict)
    mpl: dict[str, list[tuple[str, float]]] = field(default_factory=dict)

    def copy(self) -> "PreferenceTables":
        return PreferenceTables(
            rpl={k: list(v) for k, v in self.rpl.items()},
            mpl={k: list(v) for k, v in self.mpl.items()},
        )

    def resources_of(self, mid: str) -> list[str]:
        return [r for r, _ in self.rpl.get(mid, [])]

    def microservices_of(self, rid: str) -> list[str]:
        return [m for m, _ in self.mpl.get(rid, [])]

    def problems(self) -> list[str]:
        """Violations of the sort and mutual-acceptability contracts."""
        out = []
        for mid, lst in self.rpl.items():
            if lst != sorted(lst, key=lambda t: (t[1], t[0])):
                out.append(f"rpl[{mid}] not sorted ascending")
        for rid, lst in self.mpl.items():
            if lst != sorted(lst, key=lambda t: (-t[1], t[0])):
                out.append(f"mpl[{rid}] not sorted descending")
        pairs_r = {(m, r) for m, lst in self.rpl.items() for r, _ in lst}
        pairs_m = {(m, r) for r, lst in self.mpl.items() for m, _ in lst}
        for m, r in sorted(pairs_r ^ pairs_m):
            out.append(f"pair ({m}, {r}) listed on one side only")
        return out

    def to_dict(self) -> dict:
        return {
            "rpl": {m: [[r, s] for r, s in lst] for m, lst in self.rpl.items()},
            "mpl": {r: [[m, s] for m, s in lst] for r, lst in self.mpl.items()},
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "PreferenceTables":
        return cls(
            rpl={m: [(str(r), float(s)) for r, s in lst] for m, lst in doc["rpl"].items()},
            mpl={r: [(str(m), float(s)) for m, s in lst] for r, lst in doc["mpl"].items()},
        )


def rank_resources(
    app: StreamApplication,
    topology: Topology,
    mid: str,
    placed: Mapping[str, str],
    resources: Iterable[str] | None = None,
    mode: str = "staged",
) -> list[tuple[str, float]]:
    """Memory/storage-feasible resources for ``mid``, fastest first.

    Raises NoFeasibleResource when nothing survives the filter.
    """
    m = app.microservices[mid]
    flows = ingress(app, topology, mid, placed, mode)
    ranked = []
    for rid in sorted(resources) if resources is not None else topology.resource_ids():
        if topology.resources[rid].fits(m):
            ranked.append((rid, stream_time(app, topology, mid, rid, flows)))
    if not ranked:
        raise NoFeasibleResource(mid)
    ranked.sort(key=lambda t: (t[1], t[0]))
    return ranked


def build_rpl(
    app: StreamApplication,
    topology: Topology,
    placed: Mapping[str, str],
    candidates: Iterable[str],
    mode: str = "staged",
    resources: Iterable[str] | None = None,
) -> dict[str, list[tuple[str, float]]]:
    """Resource preference lists for ``candidates``; infeasible ones get ``[]``."""
    resources = None if resources is None else sorted(resources)
    rpl = {}
    for mid in sorted(candidates):
        try:
            rpl[mid] = rank_resources(app, topology, mid, placed, resources, mode)
        except NoFeasibleResource as exc:
            log.info("no feasible resource: %s", exc)
            rpl[mid] = []
    return rpl


def build_mpl(
    app: StreamApplication,
    topology: Topology,
    rpl: Mapping[str, list[tuple[str, float]]],
    placed: Mapping[str, str],
    candidates: Iterable[str],
    mode: str = "staged",
    resources: Iterable[str] | None = None,
) -> PreferenceTables:
    """Score every pair in ``rpl`` by residual bandwidth and build both tables.

    Pairs with residual bandwidth <= 0 are removed from the microservice's
    list as well, so the returned tables are mutually acceptable.
    """
    rids = sorted(resources) if resources is not None else topology.resource_ids()
    mpl: dict[str, list[tuple[str, float]]] = {rid: [] for rid in rids}
    pruned: dict[str, list[tuple[str, float]]] = {}
    for mid in sorted(candidates):
        keep = []
        if rpl.get(mid):
            q, stream = dominant_flow(ingress(app, topology, mid, placed, mode))
            for rid, t in rpl[mid]:
                score = residual_bandwidth(stream, channel_between(topology, q, rid))
                if score > 0:
                    keep.append((rid, t))
                    mpl.setdefault(rid, []).append((mid, score))
                else:
                    log.debug("dropping (%s, %s): residual bandwidth %g", mid, rid, score)
        pruned[mid] = keep
    for lst in mpl.values():
        lst.sort(key=lambda t: (-t[1], t[0]))
    return PreferenceTables(rpl=pruned, mpl=mpl)


def build_tables(
    app: StreamApplication,
    topology: Topology,
    placed: Mapping[str, str],
    candidates: Iterable[str],
    mode: str = "staged",
    resources: Iterable[str] | None = None,
) -> PreferenceTables:
    candidates = sorted(candidates)
    rpl = build_rpl(app, topology, placed, candidates, mode, resources)
    return build_mpl(app, topology, rpl, placed, candidates, mode, resources)
