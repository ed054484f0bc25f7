"""Many-to-one matching of microservices to resources, and a stability audit.

The matching loop proposes microservices in FIFO order to the head of their
resource preference list. A resource either accepts outright (State-1: the
proposer is its favourite and it has room), or accepts tentatively (State-2)
and then sheds its worst holder if over capacity (State-2.1). Whenever a
resource is exactly full after a State-2 event it truncates its list below
its worst holder, and the truncated microservices forget the resource
(State-2.2). Truncation is what drives the loop to termination.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping

from .model import (
    CodaError,
    Matching,
    StreamApplication,
    Topology,
    TraceEvent,
    dag_levels,
)
from .ranking import MODES, PreferenceTables, build_tables

log = logging.getLogger(__name__)


class IterationBoundExceeded(CodaError, RuntimeError):
    pass


@dataclass(frozen=True)
class MatchRunConfig:
    mode: str = "staged"
    max_iterations: int | None = None  # None: number of microservice/resource pairs

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


@dataclass
class Stage:
    """One matching game: its candidates, the tables and capacities it ran on."""

    level: int
    candidates: list[str]
    tables: PreferenceTables
    capacities: dict[str, int]
    matching: Matching


def coda_match(
    tables: PreferenceTables,
    capacities: Mapping[str, int],
    config: MatchRunConfig | None = None,
    step_offset: int = 0,
) -> Matching:
    """Run the matching game on fixed preference tables.

    ``tables`` must satisfy the sort and mutual-acceptability contracts; it is
    not modified. Microservices whose lists run dry end up in ``unplaced``.
    """
    config = config or MatchRunConfig()
    n_pairs = len(tables.rpl) * len(capacities)
    if config.max_iterations is not None and config.max_iterations < n_pairs:
        raise ValueError(f"max_iterations {config.max_iterations} below N_M*N_R = {n_pairs}")
    bound = config.max_iterations or max(n_pairs, 1)

    rpl = {m: [r for r, _ in lst] for m, lst in tables.rpl.items()}
    mpl = {r: [m for m, _ in lst] for r, lst in tables.mpl.items()}
    # original positions never change; truncation only cuts list tails
    rank = {r: {m: i for i, m in enumerate(lst)} for r, lst in mpl.items()}

    result = Matching(alloc={r: [] for r in capacities})
    alloc = result.alloc
    queue: deque[str] = deque()
    for m, lst in rpl.items():
        (queue if lst else result.unplaced).append(m)

    step = step_offset
    iterations = 0

    def record(state: str, m: str, r: str) -> None:
        result.trace.append(TraceEvent(step, state, m, r))
        log.debug("%d %s %s %s", step, state, m, r)

    def hold(m: str, r: str) -> None:
        result.assignment[m] = r
        alloc[r].append(m)
        alloc[r].sort(key=rank[r].__getitem__)

    while queue:
        iterations += 1
        if iterations > bound:
            raise IterationBoundExceeded(f"no convergence after {bound} proposals")
        m = queue.popleft()
        r = rpl[m][0]
        prefs = mpl.get(r, [])
        if m not in prefs:
            # cannot happen on mutually acceptable tables; drop the stale entry
            rpl[m].pop(0)
            if rpl[m]:
                queue.appendleft(m)
            else:
                result.unplaced.append(m)
            continue

        step += 1
        if prefs[0] == m and len(alloc[r]) != capacities[r]:
            hold(m, r)
            record("S1", m, r)
            continue

        # State-2; also taken by a top-ranked proposer facing a full resource,
        # which the State-1 test alone would leave stuck forever
        hold(m, r)
        record("S2", m, r)
        if len(alloc[r]) > capacities[r]:
            loser = alloc[r].pop()
            del result.assignment[loser]
            queue.append(loser)
            record("S2.1", loser, r)
        if len(alloc[r]) == capacities[r]:
            worst = rank[r][alloc[r][-1]] if alloc[r] else -1
            for s in [s for s in prefs if rank[r][s] > worst]:
                prefs.remove(s)
                rpl[s].remove(r)
                record("S2.2", s, r)
                if not rpl[s]:
                    if s in queue:
                        queue.remove(s)
                    result.unplaced.append(s)
    return result


@dataclass
class StabilityReport:
    stable: bool
    blocking_pairs: list[tuple[str, str]] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)


def verify_stability(
    matching: Matching,
    tables: PreferenceTables,
    capacities: Mapping[str, int],
) -> StabilityReport:
    """Exhaustively check the matching against the (untruncated) tables.

    Checks that every placed microservice sits on an acceptable resource,
    that every resource holds only acceptable microservices within capacity,
    and that no microservice/resource pair would rather be matched together.
    """
    m_rank = {m: {r: i for i, (r, _) in enumerate(lst)} for m, lst in tables.rpl.items()}
    r_rank = {r: {m: i for i, (m, _) in enumerate(lst)} for r, lst in tables.mpl.items()}
    violations = []

    holders: dict[str, list[str]] = {}
    for m, r in matching.assignment.items():
        holders.setdefault(r, []).append(m)
        if r not in m_rank.get(m, {}):
            violations.append(f"{m} placed on {r}, which is not in its preference list")
    for r, members in matching.alloc.items():
        if sorted(members) != sorted(holders.get(r, [])):
            violations.append(f"alloc({r}) disagrees with the assignment")
        if len(members) != len(set(members)):
            violations.append(f"alloc({r}) lists a microservice twice")
        for m in members:
            if m not in r_rank.get(r, {}):
                violations.append(f"{m} allocated on {r}, which does not list it")
        if len(members) > capacities.get(r, 0):
            violations.append(f"{r} holds {len(members)} microservices, capacity {capacities.get(r, 0)}")
    for r in holders:
        if r not in matching.alloc:
            violations.append(f"{r} hosts microservices but has no alloc list")

    blocking = []
    for m, prefs in m_rank.items():
        current = matching.assignment.get(m)
        cur_pos = prefs.get(current, len(prefs)) if current is not None else len(prefs)
        for r, pos in prefs.items():
            if pos >= cur_pos or m not in r_rank.get(r, {}):
                continue
            members = holders.get(r, [])
            if len(members) < capacities.get(r, 0):
                blocking.append((m, r))
            elif any(r_rank[r][m] < r_rank[r].get(h, len(r_rank[r])) for h in members):
                blocking.append((m, r))
    blocking.sort()
    return StabilityReport(stable=not blocking and not violations, blocking_pairs=blocking, violations=violations)


def staged_coda(
    app: StreamApplication,
    topology: Topology,
    config: MatchRunConfig | None = None,
) -> Matching:
    """Rank and match the whole application.

    ``staged`` mode plays one game per DAG level, so that every upstream of a
    candidate already has a resource when the candidate is scored; capacity
    consumed by earlier levels is not available to later ones. ``static``
    mode scores everything from the source gateway and plays a single game.
    The games are kept in ``Matching.stages`` for auditing.
    """
    config = config or MatchRunConfig()
    caps = topology.capacities()
    if config.mode == "static":
        levels = [sorted(app.microservices)]
    else:
        levels = dag_levels(app)

    result = Matching(alloc={r: [] for r in caps})
    scores: dict[tuple[str, str], float] = {}
    step = 0
    for i, level in enumerate(levels):
        open_ = {r: caps[r] - len(result.alloc[r]) for r in caps if caps[r] > len(result.alloc[r])}
        tables = build_tables(app, topology, result.assignment, level, config.mode, open_)
        game = coda_match(tables, open_, config, step_offset=step)
        if game.trace:
            step = game.trace[-1].step
        for r, lst in tables.mpl.items():
            for m, s in lst:
                scores[(m, r)] = s
        for m, r in game.assignment.items():
            result.assignment[m] = r
            result.alloc[r].append(m)
            result.alloc[r].sort(key=lambda x, r=r: (-scores[(x, r)], x))
        result.unplaced.extend(game.unplaced)
        result.trace.extend(game.trace)
        result.stages.append(Stage(i, list(level), tables, open_, game))
    return result


def format_trace(matching: Matching) -> str:
    return "".join(line + "\n" for line in matching.trace_lines())


def parse_trace(text: str) -> list[TraceEvent]:
    events = []
    for line in text.splitlines():
        if not line.strip():
            continue
        step, state, m, r = line.split()
        events.append(TraceEvent(int(step), state, m, r))
    return events
