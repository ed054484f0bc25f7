"""Walk through one matching game on the bundled 5x4 instance.

Run with ``python demos/01_matching_walkthrough.py``.
"""

from coda.harness import bundled, preferences_from_dict, read_document
from coda.matching import coda_match, verify_stability

# %% The instance: five microservices, four resources, every resource holds two.
tables, capacities = preferences_from_dict(read_document(bundled("trace_example.json")))
for m in tables.rpl:
    print(f"{m} prefers   {tables.resources_of(m)}")
for r in tables.mpl:
    print(f"{r} prefers   {tables.microservices_of(r)}  (capacity {capacities[r]})")

# %% Play the game. Each line is one state transition: step, state, microservice, resource.
#   S1    the proposer is the resource's favourite and there is room
#   S2    tentative acceptance
#   S2.1  over capacity: the worst holder is evicted and re-queued
#   S2.2  exactly full: the resource forgets everybody ranked below its worst holder
result = coda_match(tables, capacities)
print()
print("\n".join(result.trace_lines()))

# %% Final allocation, best-ranked holder first.
print()
for r, held in result.alloc.items():
    print(f"{r}: {held}")

# %% The verifier checks every pair independently of the loop above.
report = verify_stability(result, tables, capacities)
print(f"\nstable={report.stable} blocking_pairs={report.blocking_pairs} proposals={result.n_steps}")
