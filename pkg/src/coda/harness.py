"""Scenario files, random scenario generation, experiment sweeps and result files."""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import asdict, dataclass, field
from importlib import resources as _resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from .baselines import ALGORITHMS as BASELINES
from .matching import MatchRunConfig, staged_coda, verify_stability
from .metrics import evaluate
from .model import (
    BITS_PER_MB,
    BITS_PER_MBIT,
    BYTES_PER_GB,
    BYTES_PER_MB,
    CodaError,
    DataStream,
    Edge,
    Matching,
    Microservice,
    NetworkChannel,
    Resource,
    StreamApplication,
    Topology,
    ValidationError,
    build_application,
    build_topology,
)
from .ranking import PreferenceTables

log = logging.getLogger(__name__)

ALGORITHM_NAMES = ("coda", "heft_oc", "rtr_rp", "cloudpath")
CSV_HEADER = ["algorithm", "sweep_kind", "sweep_value", "completion_time_s", "total_traffic", "stable"]


class ParseError(CodaError, ValueError):
    pass


class IoError(CodaError, OSError):
    pass


def bundled(name: str) -> Path:
    """Path of a scenario file shipped with the package (``traffic_sign.json``, ``trace_example.json``)."""
    return Path(str(_resources.files("coda") / "data" / name))


# --------------------------------------------------------------------------
# scenario documents


def _field(obj: Any, key: str, where: str):
    if not isinstance(obj, Mapping):
        raise ParseError(f"{where}: expected an object")
    if key not in obj:
        raise ParseError(f"{where}: missing field '{key}'")
    return obj[key]


def _num(obj, key, where) -> float:
    v = _field(obj, key, where)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}.{key}: expected a number, got {v!r}")
    return float(v)


def _int(obj, key, where) -> int:
    v = _field(obj, key, where)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{where}.{key}: expected an integer, got {v!r}")
    return v


def _stream(obj, where) -> DataStream:
    sizes = _field(obj, "element_sizes_mb", where)
    if not isinstance(sizes, list):
        raise ParseError(f"{where}.element_sizes_mb: expected a list")
    bits = []
    for i, s in enumerate(sizes):
        if isinstance(s, bool) or not isinstance(s, (int, float)):
            raise ParseError(f"{where}.element_sizes_mb[{i}]: expected a number")
        bits.append(s * BITS_PER_MB)
    return DataStream(tuple(bits), _num(obj, "rate_per_s", where))


def read_document(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    return doc


def scenario_from_dict(doc: Mapping) -> tuple[StreamApplication, Topology]:
    """Convert a scenario document (MB, Mbit/s, ms, GB) into validated model objects."""
    resources = []
    for i, r in enumerate(_field(doc, "resources", "scenario")):
        w = f"resources[{i}]"
        resources.append(Resource(
            id=str(_field(r, "id", w)),
            tier=str(_field(r, "tier", w)),
            cpu_speed=_num(r, "cpu_mips", w),
            mem=_num(r, "mem_mb", w) * BYTES_PER_MB,
            stor=_num(r, "stor_gb", w) * BYTES_PER_GB,
            capacity=_int(r, "capacity", w),
        ))
    channels = []
    for i, c in enumerate(_field(doc, "channels", "scenario")):
        w = f"channels[{i}]"
        q, j = str(_field(c, "from", w)), str(_field(c, "to", w))
        bw = _num(c, "bandwidth_mbps", w) * BITS_PER_MBIT
        lat = _num(c, "latency_ms", w) / 1000.0
        channels.append(NetworkChannel(q, j, latency=lat, bandwidth=bw))
        if c.get("symmetric", False):
            channels.append(NetworkChannel(j, q, latency=lat, bandwidth=bw))
    gateway = str(_field(doc, "src_gateway", "scenario"))
    topology = build_topology(resources, channels, gateway)

    a = _field(doc, "application", "scenario")
    ms = []
    for i, m in enumerate(_field(a, "microservices", "application")):
        w = f"application.microservices[{i}]"
        ms.append(Microservice(
            id=str(_field(m, "id", w)),
            cpu_demand=_num(m, "cpu_mi", w),
            mem_demand=_num(m, "mem_mb", w) * BYTES_PER_MB,
            stor_demand=_num(m, "stor_gb", w) * BYTES_PER_GB,
        ))
    edges = []
    for i, e in enumerate(_field(a, "edges", "application")):
        w = f"application.edges[{i}]"
        edges.append((str(_field(e, "from", w)), str(_field(e, "to", w)), _stream(e, w)))
    src_stream = _stream(_field(a, "src_stream", "application"), "application.src_stream")
    app = build_application(
        ms, edges, str(_field(doc, "source", "scenario")), str(_field(doc, "sink", "scenario")), src_stream
    )
    return app, topology


def load_scenario(path: str | Path) -> tuple[StreamApplication, Topology]:
    return scenario_from_dict(read_document(path))


def scenario_to_dict(app: StreamApplication, topology: Topology) -> dict:
    """Inverse of :func:`scenario_from_dict`; channels are written one direction each."""

    def stream(s: DataStream) -> dict:
        return {"element_sizes_mb": [x / BITS_PER_MB for x in s.element_sizes], "rate_per_s": s.ingress_rate}

    return {
        "resources": [
            {"id": r.id, "tier": r.tier, "cpu_mips": r.cpu_speed, "mem_mb": r.mem / BYTES_PER_MB,
             "stor_gb": r.stor / BYTES_PER_GB, "capacity": r.capacity}
            for r in topology.resources.values()
        ],
        "channels": [
            {"from": ch.from_id, "to": ch.to_id, "bandwidth_mbps": ch.bandwidth / BITS_PER_MBIT,
             "latency_ms": ch.latency * 1000.0, "symmetric": False}
            for ch in topology.channels.values()
        ],
        "application": {
            "microservices": [
                {"id": m.id, "cpu_mi": m.cpu_demand, "mem_mb": m.mem_demand / BYTES_PER_MB,
                 "stor_gb": m.stor_demand / BYTES_PER_GB}
                for m in app.microservices.values()
            ],
            "edges": [{"from": e.upstream, "to": e.downstream, **stream(e.stream)} for e in app.edges],
            "src_stream": stream(app.src_stream),
        },
        "source": app.source_id,
        "sink": app.sink_id,
        "src_gateway": topology.src_gateway,
    }


def preferences_from_dict(doc: Mapping) -> tuple[PreferenceTables, dict[str, int]]:
    """Read a bare matching instance: ``{"preferences": {"capacities", "rpl", "mpl"}}``."""
    p = _field(doc, "preferences", "instance")
    caps = {str(k): int(v) for k, v in _field(p, "capacities", "preferences").items()}
    tables = PreferenceTables.from_dict({"rpl": _field(p, "rpl", "preferences"), "mpl": _field(p, "mpl", "preferences")})
    bad = tables.problems()
    if bad:
        raise ValidationError("; ".join(bad))
    return tables, caps


# --------------------------------------------------------------------------
# random scenarios

DEFAULT_PARAMS: dict[str, tuple] = {
    "cpu_mi": (1000.0, 40000.0),
    "mem_mb": (100.0, 500.0),
    "stor_gb": (0.5, 5.0),
    "element_mb": (0.1, 10.0),
    "elements": (1, 3),
    "rate_per_s": (0.2, 2.0),
    "capacity": (1, 3),
    "latency_ms": (3.0, 100.0),
}

# per tier: cpu MIPS, memory MB, storage GB, link bandwidth Mbit/s
TIER_SPECS = {
    "cloud": ([100000.0], [128000.0], [1200.0], [200.0]),
    "fog2": ([80000.0, 75000.0], [64000.0, 32000.0], [250.0, 128.0], [200.0, 500.0]),
    "fog1": ([20000.0, 30000.0], [8000.0, 16000.0], [16.0, 64.0], [1000.0]),
}


def _series_parallel(rng: random.Random, n: int) -> list[tuple[int, int]]:
    if n == 1:
        return []
    edges = [(0, 1)]
    for w in range(2, n):
        u, v = edges[rng.randrange(len(edges))]
        if rng.random() < 0.5:
            edges.remove((u, v))
        edges += [(u, w), (w, v)]
    return sorted(set(edges))


def generate_scenario(
    seed: int,
    n_microservices: int,
    n_resources: int,
    params: Mapping[str, tuple] | None = None,
) -> dict:
    """A random scenario document, deterministic in ``seed``.

    The application is a random series-parallel DAG (single source ``m00``,
    single sink ``m01``); resource ``r00`` is always cloud-tier and channels
    form a full symmetric mesh.
    """
    if n_microservices < 1 or n_resources < 1:
        raise ValueError("need at least one microservice and one resource")
    p = {**DEFAULT_PARAMS, **(params or {})}
    rng = random.Random(seed)

    def uni(key, nd=3):
        lo, hi = p[key]
        return round(rng.uniform(lo, hi), nd)

    def stream():
        k = rng.randint(*p["elements"])
        return {"element_sizes_mb": [max(uni("element_mb"), 0.001) for _ in range(k)], "rate_per_s": max(uni("rate_per_s"), 0.001)}

    width = max(2, len(str(max(n_microservices, n_resources) - 1)))
    mname = [f"m{i:0{width}d}" for i in range(n_microservices)]
    rname = [f"r{i:0{width}d}" for i in range(n_resources)]

    resources, link_bw = [], {}
    for i, rid in enumerate(rname):
        tier = "cloud" if i == 0 else rng.choice(("cloud", "fog2", "fog1"))
        cpu, mem, stor, bw = TIER_SPECS[tier]
        resources.append({
            "id": rid, "tier": tier, "cpu_mips": rng.choice(cpu), "mem_mb": rng.choice(mem),
            "stor_gb": rng.choice(stor), "capacity": rng.randint(*p["capacity"]),
        })
        link_bw[rid] = rng.choice(bw)
    channels = [
        {"from": q, "to": j, "bandwidth_mbps": min(link_bw[q], link_bw[j]), "latency_ms": uni("latency_ms"), "symmetric": True}
        for a, q in enumerate(rname) for j in rname[a + 1:]
    ]
    fog1 = [r["id"] for r in resources if r["tier"] == "fog1"]

    microservices = [
        {"id": mid, "cpu_mi": uni("cpu_mi", 1), "mem_mb": uni("mem_mb", 1), "stor_gb": uni("stor_gb")}
        for mid in mname
    ]
    edges = [{"from": mname[u], "to": mname[v], **stream()} for u, v in _series_parallel(rng, n_microservices)]
    return {
        "resources": resources,
        "channels": channels,
        "application": {"microservices": microservices, "edges": edges, "src_stream": stream()},
        "source": mname[0],
        "sink": mname[1] if n_microservices > 1 else mname[0],
        "src_gateway": fog1[0] if fog1 else rname[0],
    }


# --------------------------------------------------------------------------
# sweeps

DEFAULT_CPU_SWEEP = (10000.0, 20000.0, 30000.0, 40000.0)  # MI, element fixed at 10 MB
DEFAULT_DATA_SWEEP_MB = (0.1, 1.0, 5.0, 10.0)  # MB, cpu fixed at 15000 MI


@dataclass(frozen=True)
class Sweep:
    kind: str  # "cpu" or "data"
    values: tuple[float, ...]  # MI for cpu, bits for data
    fixed: float  # element size in bits for cpu, MI for data

    def __post_init__(self):
        if self.kind not in ("cpu", "data"):
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep values must be strictly increasing")

    @classmethod
    def cpu(cls, values: Iterable[float] = DEFAULT_CPU_SWEEP, element_mb: float = 10.0) -> "Sweep":
        return cls("cpu", tuple(values), element_mb * BITS_PER_MB)

    @classmethod
    def data(cls, values_mb: Iterable[float] = DEFAULT_DATA_SWEEP_MB, cpu_mi: float = 15000.0) -> "Sweep":
        return cls("data", tuple(v * BITS_PER_MB for v in values_mb), cpu_mi)


def apply_sweep_point(app: StreamApplication, sweep: Sweep, value: float) -> StreamApplication:
    """Overwrite every microservice's cpu demand and every element size."""
    cpu, size = (value, sweep.fixed) if sweep.kind == "cpu" else (sweep.fixed, value)

    def resize(s: DataStream) -> DataStream:
        return DataStream((size,) * s.size, s.ingress_rate)

    ms = {k: Microservice(m.id, cpu, m.mem_demand, m.stor_demand) for k, m in app.microservices.items()}
    edges = [Edge(e.upstream, e.downstream, resize(e.stream)) for e in app.edges]
    return app.replace(microservices=ms, edges=edges, src_stream=resize(app.src_stream))


@dataclass
class ResultRow:
    algorithm: str
    sweep_kind: str
    sweep_value: float
    completion_time: float | None = None
    total_traffic: float | None = None
    placements: dict[str, str] = field(default_factory=dict)
    stable: bool | None = None  # coda rows only
    error: str | None = None


def place(
    algorithm: str, app: StreamApplication, topology: Topology, mode: str = "staged"
) -> tuple[Matching, bool | None]:
    """Run one placement algorithm; for coda also audit every game for stability."""
    if algorithm == "coda":
        matching = staged_coda(app, topology, MatchRunConfig(mode=mode))
        stable = not matching.check_consistency(topology.capacities()) and all(
            verify_stability(st.matching, st.tables, st.capacities).stable for st in matching.stages
        )
        return matching, stable
    if algorithm not in BASELINES:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    return BASELINES[algorithm](app, topology), None


def run_sweep(
    app: StreamApplication,
    topology: Topology,
    sweep: Sweep,
    algorithms: Sequence[str] = ALGORITHM_NAMES,
    mode: str = "staged",
) -> list[ResultRow]:
    rows = []
    for algorithm in algorithms:
        for value in sweep.values:
            row = ResultRow(algorithm, sweep.kind, value)
            point = apply_sweep_point(app, sweep, value)
            try:
                matching, row.stable = place(algorithm, point, topology, mode)
                row.placements = dict(sorted(matching.assignment.items()))
                report = evaluate(point, matching, topology)
            except CodaError as exc:
                log.warning("%s at %s=%g failed: %s", algorithm, sweep.kind, value, exc)
                row.error = str(exc)
            else:
                row.completion_time = report.completion_time
                row.total_traffic = report.total_traffic
            rows.append(row)
    return rows


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(float(v)) if isinstance(v, float) else str(v)


def emit_results(rows: Sequence[ResultRow], fmt: str, path: str | Path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            if fmt == "csv":
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_HEADER)
                for r in rows:
                    w.writerow([r.algorithm, r.sweep_kind, _cell(r.sweep_value), _cell(r.completion_time),
                                _cell(r.total_traffic), _cell(r.stable)])
            elif fmt == "json":
                json.dump([asdict(r) for r in rows], fh, indent=2)
                fh.write("\n")
            else:
                raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_results(path: str | Path) -> list[ResultRow]:
    return [ResultRow(**r) for r in json.loads(Path(path).read_text())]
