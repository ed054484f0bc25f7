"""Two-sided stable matching placement of stream-processing microservices on Cloud/Fog resources."""

from .baselines import cloudpath, heft_oc, rtr_rp
from .harness import (
    ResultRow,
    Sweep,
    bundled,
    emit_results,
    generate_scenario,
    load_scenario,
    run_sweep,
)
from .matching import MatchRunConfig, coda_match, staged_coda, verify_stability
from .metrics import completion_time, evaluate, total_streaming_traffic
from .model import (
    DataStream,
    Matching,
    Microservice,
    NetworkChannel,
    Resource,
    StreamApplication,
    Topology,
    build_application,
    build_topology,
    channel_between,
    topological_order,
)
from .ranking import PreferenceTables, build_mpl, build_rpl, build_tables

__version__ = "0.1.0"
