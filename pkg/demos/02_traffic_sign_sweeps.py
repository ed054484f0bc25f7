"""Compare the four placement algorithms on the bundled traffic-sign scenario.

Run with ``python demos/02_traffic_sign_sweeps.py``. The numbers come from the
analytic cost model, so they reproduce exactly on every machine.
"""

from coda.harness import Sweep, bundled, load_scenario, run_sweep
from coda.model import BITS_PER_MB

app, topology = load_scenario(bundled("traffic_sign.json"))

# %% The application: a DAG with two joins (analysis, packaging).
for e in app.edges:
    print(f"{e.upstream:>12} -> {e.downstream}")
print(f"source {app.source_id} reads from {topology.src_gateway}; sink is {app.sink_id}\n")


def show(rows, unit):
    algorithms = list(dict.fromkeys(r.algorithm for r in rows))
    values = list(dict.fromkeys(r.sweep_value for r in rows))
    print(f"{unit:>10} " + " ".join(f"{a:>18}" for a in algorithms))
    for v in values:
        cells = []
        for a in algorithms:
            row = next(r for r in rows if r.algorithm == a and r.sweep_value == v)
            cells.append(f"{row.completion_time:8.3f}s /{row.total_traffic:6.3f}")
        label = v if unit == "MI" else v / BITS_PER_MB
        print(f"{label:>10g} " + " ".join(f"{c:>18}" for c in cells))
    print()


# %% CPU sweep: every microservice needs the same MI per element, elements fixed at 10 MB.
print("completion time / total traffic")
show(run_sweep(app, topology, Sweep.cpu()), "MI")

# %% Data sweep: element size varies, cpu fixed at 15000 MI.
show(run_sweep(app, topology, Sweep.data()), "MB")

# %% Where did CODA put things at the first cpu point?
row = run_sweep(app, topology, Sweep.cpu(values=[10000.0]), ["coda"])[0]
for mid, rid in row.placements.items():
    print(f"{mid:>12} on {rid} ({topology.resources[rid].tier})")
