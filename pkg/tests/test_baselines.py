import pytest
from hypothesis import given, settings, strategies as st

from coda.baselines import ALGORITHMS, cloudpath, heft_oc, rtr_rp, upward_ranks
from coda.harness import generate_scenario, scenario_from_dict
from coda.metrics import SRC, total_streaming_traffic
from coda.model import (
    TIERS,
    Microservice,
    NoFeasibleResource,
    Resource,
    build_application,
    build_topology,
    NetworkChannel,
)

from conftest import chain_app, mesh, stream


def fork(cpu=5000.0):
    s = stream(0.1)
    ms = [Microservice(i, cpu) for i in ("a", "b", "c", "d")]
    return build_application(ms, [("a", "b", s), ("a", "c", s), ("b", "d", s), ("c", "d", s)], "a", "d", s)


def test_heft_single_cloud_colocates_everything():
    app = chain_app(("a", "b", "c"))
    topo = mesh([("cloud", 1e5, 3, "cloud"), ("gw", 1e4, 1, "fog1")], gateway="gw")
    m = heft_oc(app, topo)
    assert set(m.assignment.values()) == {"cloud"}
    traffic = total_streaming_traffic(app, m, topo).per_edge_traffic
    assert [k for k, v in traffic.items() if v > 0] == [(SRC, "a")]


def test_heft_splits_parallel_branches_over_identical_clouds():
    app = fork()
    topo = mesh([("c1", 1e4, 4, "cloud"), ("c2", 1e4, 4, "cloud")], bw=1e10, lat=0.001, gateway="c1")
    m = heft_oc(app, topo)
    assert m.assignment["b"] != m.assignment["c"]


def test_heft_upward_ranks_decrease_along_edges():
    app = fork()
    topo = mesh([("c1", 1e4, 4, "cloud"), ("c2", 2e4, 4, "cloud")])
    ranks = upward_ranks(app, topo, ["c1", "c2"])
    for e in app.edges:
        assert ranks[e.upstream] > ranks[e.downstream]


def test_heft_needs_cloud():
    with pytest.raises(NoFeasibleResource):
        heft_oc(chain_app(), mesh([("f", 1e4, 2, "fog1")]))


def test_rtr_rp_chain_on_fog_sink_on_cloud():
    app = chain_app(("a", "b", "c"))
    topo = mesh([("cloud", 1e5, 3, "cloud"), ("f1", 2e4, 1, "fog1"), ("f2", 8e4, 1, "fog2")], gateway="f1")
    m = rtr_rp(app, topo)
    assert topo.resources[m.assignment["a"]].tier != "cloud"
    assert topo.resources[m.assignment["b"]].tier != "cloud"
    assert m.assignment["c"] == "cloud"


def test_rtr_rp_without_fog_room_is_cloud_only():
    # no fog resource can take anything: memory too small everywhere
    big = [Microservice(i, 1000.0, mem_demand=1e10) for i in "abc"]
    s = stream(1.0)
    app = build_application(big, [("a", "b", s), ("b", "c", s)], "a", "c", s)
    res = [Resource("cloud", 1e5, 1e12, 1e12, 3, "cloud"), Resource("f", 1e5, 1e6, 1e6, 3, "fog1")]
    topo = build_topology(res, [NetworkChannel("f", "cloud", 0.01, 1e9), NetworkChannel("cloud", "f", 0.01, 1e9)], "f")
    assert set(rtr_rp(app, topo).assignment.values()) == {"cloud"}


def test_rtr_rp_single_microservice_goes_to_cloud():
    app = build_application([Microservice("m", 1.0)], [], "m", "m", stream(1.0))
    topo = mesh([("cloud", 1e3, 1, "cloud"), ("f", 1e5, 1, "fog1")], gateway="f")
    assert rtr_rp(app, topo).assignment == {"m": "cloud"}


def test_cloudpath_prefers_lowest_tier_even_when_slower():
    app = build_application([Microservice("m", 1.0)], [], "m", "m", stream(1.0))
    topo = mesh([("cloud", 1e6, 1, "cloud"), ("f1", 1e2, 1, "fog1")], gateway="cloud")
    assert cloudpath(app, topo).assignment == {"m": "f1"}


def test_cloudpath_escalates_on_memory_and_capacity():
    res = [
        Resource("cloud", 1e5, 1e12, 1e12, 4, "cloud"),
        Resource("f2", 8e4, 64e9, 1e12, 1, "fog2"),
        Resource("f1", 2e4, 8e9, 1e12, 1, "fog1"),
    ]
    ids = [r.id for r in res]
    topo = build_topology(res, [NetworkChannel(q, j, 0.01, 1e9) for q in ids for j in ids if q != j], "f1")
    huge = build_application([Microservice("m", 1.0, mem_demand=1e11)], [], "m", "m", stream(1.0))
    assert cloudpath(huge, topo).assignment == {"m": "cloud"}
    # three microservices: fog1 fills, then fog2, then cloud
    m = cloudpath(chain_app(("a", "b", "c")), topo)
    assert m.assignment == {"a": "f1", "b": "f2", "c": "cloud"}


def _tier(topo, rid):
    return TIERS.index(topo.resources[rid].tier)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 10), r=st.integers(1, 7))
def test_structural_invariants_on_generated_scenarios(seed, n, r):
    app, topo = scenario_from_dict(generate_scenario(seed, n, r, {"capacity": (3, 6)}))
    for name, algo in ALGORITHMS.items():
        try:
            m = algo(app, topo)
        except NoFeasibleResource:
            continue
        assert m.check_consistency(topo.capacities()) == [], name
        assert set(m.assignment) == set(app.microservices)
        for mid, rid in m.assignment.items():
            assert topo.resources[rid].fits(app.microservices[mid])
        if name == "heft_oc":
            assert all(topo.resources[rid].tier == "cloud" for rid in m.assignment.values())


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10**6), r=st.integers(2, 7), mem=st.lists(st.floats(1e6, 2e11), min_size=2, max_size=6))
def test_cloudpath_tier_monotone_in_memory(seed, r, mem):
    _, topo = scenario_from_dict(generate_scenario(seed, 1, r))
    mem = sorted(mem)
    tiers = []
    for demand in mem:
        app = build_application([Microservice("m", 1000.0, mem_demand=demand)], [], "m", "m", stream(1.0))
        try:
            tiers.append(_tier(topo, cloudpath(app, topo).assignment["m"]))
        except NoFeasibleResource:
            tiers.append(len(TIERS))
    assert tiers == sorted(tiers)
