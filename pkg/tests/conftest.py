import pytest

from coda.harness import bundled, load_scenario, preferences_from_dict, read_document
from coda.model import (
    BITS_PER_MB,
    DataStream,
    Microservice,
    NetworkChannel,
    Resource,
    build_application,
    build_topology,
)


def stream(*mb, rate=1.0):
    return DataStream(tuple(x * BITS_PER_MB for x in mb), rate)


def chain_app(ids=("a", "b"), cpu=1000.0, s=None):
    s = s or stream(1.0)
    ms = [Microservice(i, cpu) for i in ids]
    edges = [(u, v, s) for u, v in zip(ids, ids[1:])]
    return build_application(ms, edges, ids[0], ids[-1], s)


def mesh(specs, bw=1e9, lat=0.01, gateway=None):
    """Topology from ``[(id, mips, capacity, tier), ...]`` with a full symmetric mesh."""
    res = [Resource(i, mips, mem=1e12, stor=1e12, capacity=c, tier=t) for i, mips, c, t in specs]
    ids = [r.id for r in res]
    chans = [NetworkChannel(q, j, lat, bw) for q in ids for j in ids if q != j]
    return build_topology(res, chans, gateway or ids[0])


@pytest.fixture(scope="session")
def trace_example():
    return preferences_from_dict(read_document(bundled("trace_example.json")))


@pytest.fixture(scope="session")
def traffic_sign():
    return load_scenario(bundled("traffic_sign.json"))


# one line per acceptance criterion, echoed at the end of the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
