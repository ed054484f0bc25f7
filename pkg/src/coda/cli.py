"""Command line entry point: ``coda run | generate | verify | trace``.

Set ``CODA_LOG`` (DEBUG, INFO, WARNING, ...) to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .baselines import ALGORITHMS as BASELINES
from .harness import (
    ALGORITHM_NAMES,
    Sweep,
    emit_results,
    generate_scenario,
    preferences_from_dict,
    read_document,
    run_sweep,
    scenario_from_dict,
)
from .matching import MatchRunConfig, coda_match, format_trace, staged_coda, verify_stability
from .model import CodaError

log = logging.getLogger("coda")


def _load(path: str, mode: str):
    """Run CODA on either a bare preference instance or a full scenario.

    Returns ``(matching, [(tables, capacities, game)], scenario or None)``.
    """
    doc = read_document(path)
    if "preferences" in doc:
        tables, caps = preferences_from_dict(doc)
        game = coda_match(tables, caps)
        return game, [(tables, caps, game)], None
    app, topology = scenario_from_dict(doc)
    matching = staged_coda(app, topology, MatchRunConfig(mode=mode))
    return matching, [(st.tables, st.capacities, st.matching) for st in matching.stages], (app, topology)


def cmd_run(args) -> int:
    app, topology = scenario_from_dict(read_document(args.scenario))
    sweep = Sweep.cpu() if args.sweep == "cpu" else Sweep.data()
    algorithms = [a for a in args.algorithms.split(",") if a]
    unknown = [a for a in algorithms if a not in ALGORITHM_NAMES]
    if unknown:
        raise SystemExit(f"unknown algorithms: {', '.join(unknown)}")
    rows = run_sweep(app, topology, sweep, algorithms, args.mode)
    emit_results(rows, args.format, args.out)
    log.info("wrote %d rows to %s", len(rows), args.out)
    return 0


def cmd_generate(args) -> int:
    doc = generate_scenario(args.seed, args.microservices, args.resources)
    text = json.dumps(doc, indent=1) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    return 0


def cmd_verify(args) -> int:
    matching, games, scenario = _load(args.scenario, args.mode)
    ok = True
    for i, (tables, caps, game) in enumerate(games):
        for p in tables.problems():
            print(f"game {i}: table problem: {p}")
            ok = False
        report = verify_stability(game, tables, caps)
        for m, r in report.blocking_pairs:
            print(f"game {i}: blocking pair ({m}, {r})")
        for v in report.violations:
            print(f"game {i}: {v}")
        ok &= report.stable
        if game.n_steps > len(tables.rpl) * len(caps):
            print(f"game {i}: {game.n_steps} proposals exceed N_M*N_R")
            ok = False
    if scenario is not None:
        app, topology = scenario
        for p in matching.check_consistency(topology.capacities()):
            print(f"coda: {p}")
            ok = False
        for name, algo in BASELINES.items():
            try:
                placed = algo(app, topology)
            except CodaError as exc:
                print(f"{name}: {exc}")
                continue
            for p in placed.check_consistency(topology.capacities()):
                print(f"{name}: {p}")
                ok = False
    if matching.unplaced:
        print("unplaced: " + ", ".join(matching.unplaced))
    print("OK" if ok else "FAILED")
    return 0 if ok else 1


def cmd_trace(args) -> int:
    matching, _, _ = _load(args.scenario, args.mode)
    sys.stdout.write(format_trace(matching))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coda", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a cpu or data sweep and write results")
    p.add_argument("--scenario", required=True)
    p.add_argument("--sweep", choices=("cpu", "data"), default="cpu")
    p.add_argument("--mode", choices=("staged", "static"), default="staged")
    p.add_argument("--algorithms", default=",".join(ALGORITHM_NAMES))
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("generate", help="write a random scenario")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--microservices", type=int, default=7)
    p.add_argument("--resources", type=int, default=7)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_generate)

    for name, func, text in (
        ("verify", cmd_verify, "audit stability and placement invariants"),
        ("trace", cmd_trace, "print the matching state transitions"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--scenario", required=True)
        p.add_argument("--mode", choices=("staged", "static"), default="staged")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("CODA_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CodaError as exc:
        print(f"coda: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
