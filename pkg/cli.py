"""
Command line driver for mechkit.

This module exposes the library as the commands decompose, check, search,
run and enumerate. Every command reads an instance file, writes a text or a
machine-readable report to standard output and returns an exit code: 0 when
everything holds, 1 when an axiom fails or two mechanism sets differ, 2 for
unusable input, 3 for exhausted budgets.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Sequence

from mechkit.axioms import Axiom, Engine, check
from mechkit.blocks import decompose
from mechkit.config import get_node_budget, get_seconds_budget, get_threads
from mechkit.constraint import Constraint, project, relabel_agents
from mechkit.exceptions import (
    EXIT_FAILED,
    EXIT_OK,
    EXIT_RESOURCE,
    ArgumentError,
    ParseError,
    SearchIncompleteError,
    exit_code_on_error,
)
from mechkit.formats import (
    InstanceFile,
    load_instance,
    load_mechanism,
    parse_profile,
    table_file,
    write_mechanism_file,
)
from mechkit.logger import log
from mechkit.mechanisms import tabulate
from mechkit.render import (
    check_document,
    check_text,
    decomposition_document,
    decomposition_text,
    mechanism_set_document,
    mechanism_set_text,
    render_grid,
)
from mechkit.search import (
    MechanismSet,
    SearchSpec,
    SetComparison,
    enumerate_gsd,
    enumerate_local_dictatorships,
    search,
    set_equal,
)
from metrics import initiate_metrics, track_command_usage, write_metrics

COMMANDS = ["decompose", "check", "search", "run", "enumerate"]
FAMILIES = ["local_dictatorships", "gsd"]


def emit(args: argparse.Namespace, document: dict[str, Any], text: str) -> None:
    """
    Write a command's report.

    Machine output is a single JSON document on standard output; with
    --quiet-split the text report additionally goes to standard error.
    Otherwise the text report goes to standard output.
    """
    if args.format == "machine":
        sys.stdout.write(json.dumps(document, indent=2) + "\n")
        if args.quiet_split:
            sys.stderr.write(text)
    else:
        sys.stdout.write(text)


def parse_axioms(text: str) -> list[Axiom]:
    axioms = []
    for name in (part.strip().lower().replace("-", "_") for part in text.split(",")):
        if not name:
            continue
        try:
            axioms.append(Axiom(name))
        except ValueError as e:
            raise ParseError(
                f"unknown axiom {name!r}; choose from {', '.join(a.value for a in Axiom)}",
                field="axioms",
            ) from e
    if not axioms:
        raise ParseError("no axioms given", field="axioms")
    return axioms


def parse_pair(text: str, n: int) -> tuple[int, int]:
    try:
        i, j = (int(x) for x in text.split(","))
    except ValueError as e:
        raise ParseError(f"expected two agents 'i,j', got {text!r}", field="pair") from e
    if i == j or not (0 <= i < n and 0 <= j < n):
        raise ArgumentError(f"pair ({i},{j}) must name two distinct agents in [0, {n})")
    return i, j


def pair_constraint(c: Constraint, pair: tuple[int, int]) -> Constraint:
    """Projection on `pair` with the pair's first agent as agent 0."""
    projected = project(c, pair)
    return projected if pair[0] < pair[1] else relabel_agents(projected, (1, 0))


def write_tables(directory: str | None, found: MechanismSet, names: Sequence[str]) -> None:
    if not directory:
        return
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    for k, mech in enumerate(found):
        (target / f"mechanism-{k}.txt").write_text(write_mechanism_file(table_file(mech, names)), encoding="utf-8")
    log.info("Wrote %d mechanism files to %s", len(found), target)


def compare_with(family: str, c: Constraint) -> MechanismSet:
    if family == "local_dictatorships":
        return enumerate_local_dictatorships(c)
    if family == "gsd":
        return enumerate_gsd(c)
    raise ArgumentError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")


@exit_code_on_error
@track_command_usage()
def cmd_decompose(args: argparse.Namespace) -> int:
    """
    Print the block structure of an instance's constraint.

    For instances with more than two agents the constraint is first projected
    on the pair given by --pair.

    Args:
        args: Parsed command line with instance, pair and format.

    Returns:
        int: EXIT_OK on success.
    """
    log.info("Decomposing instance %s", args.instance)
    instance = load_instance(args.instance)
    c = instance.constraint()
    pair = parse_pair(args.pair, instance.n)
    d = decompose(pair_constraint(c, pair))
    grid = render_grid(d, instance.objects)
    document = decomposition_document(d, instance.objects)
    document["pair"] = list(pair)
    document["grid"] = grid.splitlines()
    if args.format == "grid":
        text = grid
    else:
        text = decomposition_text(d, instance.objects) + grid
    emit(args, document, text)
    log.info("Successfully decomposed %s into %d blocks", args.instance, len(d.blocks))
    return EXIT_OK


@exit_code_on_error
@track_command_usage()
def cmd_check(args: argparse.Namespace) -> int:
    """
    Check a mechanism against a list of axioms.

    Args:
        args: Parsed command line with instance, mechanism, axioms and engine.

    Returns:
        int: EXIT_OK if every axiom holds, EXIT_FAILED otherwise.
    """
    log.info("Checking %s against %s", args.mechanism, args.axioms)
    instance = load_instance(args.instance)
    axioms = parse_axioms(args.axioms)
    f = load_mechanism(args.mechanism, instance)
    mech = tabulate(f, threads=args.threads)
    results = check(mech, axioms, Engine(args.engine))
    document = check_document(results, instance.objects)
    for entry, result in zip(document["results"], results):
        if result.witness is not None:
            entry["witness"]["replayed"] = result.witness.replay(f)
    if args.write_table:
        Path(args.write_table).write_text(write_mechanism_file(table_file(mech, instance.objects)), encoding="utf-8")
    emit(args, document, check_text(results, instance.objects))
    failed = [str(r.axiom) for r in results if not r.passed]
    log.info("Successfully checked %s: %d of %d axioms hold", args.mechanism, len(results) - len(failed), len(results))
    return EXIT_FAILED if failed else EXIT_OK


def report_set(
    args: argparse.Namespace,
    instance: InstanceFile,
    found: MechanismSet,
    comparison: SetComparison | None,
) -> None:
    document = mechanism_set_document(found, instance.objects, comparison, args.show_tables)
    text = mechanism_set_text(found, instance.objects, comparison, args.show_tables)
    write_tables(args.write_dir, found, instance.objects)
    emit(args, document, text)


@exit_code_on_error
@track_command_usage()
def cmd_search(args: argparse.Namespace) -> int:
    """
    Find every mechanism on the instance satisfying the given axioms.

    Args:
        args: Parsed command line with instance, axioms, compare mode and budgets.

    Returns:
        int: EXIT_OK when the search completes and any comparison finds equal
            sets, EXIT_FAILED when the sets differ, EXIT_RESOURCE when a budget
            runs out.
    """
    log.info("Searching instance %s for %s", args.instance, args.axioms)
    instance = load_instance(args.instance)
    c = instance.constraint()
    spec = SearchSpec(
        c,
        frozenset(parse_axioms(args.axioms)),
        node_budget=args.budget_nodes or get_node_budget(),
        seconds_budget=args.budget_seconds or get_seconds_budget(),
    )
    try:
        found = search(spec)
    except SearchIncompleteError as e:
        log.warning("Search incomplete: %s", str(e))
        report_set(args, instance, e.partial, None)
        return EXIT_RESOURCE

    comparison = None
    if args.compare != "none":
        comparison = set_equal(found, compare_with(args.compare, c))
    report_set(args, instance, found, comparison)
    log.info("Successfully searched %s: %d mechanisms", args.instance, len(found))
    return EXIT_FAILED if comparison is not None and not comparison.equal else EXIT_OK


@exit_code_on_error
@track_command_usage()
def cmd_run(args: argparse.Namespace) -> int:
    """
    Evaluate a mechanism at one profile.

    Args:
        args: Parsed command line with instance, mechanism and one --profile per agent.

    Returns:
        int: EXIT_OK on success.
    """
    log.info("Running %s", args.mechanism)
    instance = load_instance(args.instance)
    profile = parse_profile(args.profile or [], instance.objects, instance.n)
    f = load_mechanism(args.mechanism, instance)
    allocation = f.assign(profile)
    named = [instance.objects[x] for x in allocation]
    document = {
        "profile": [">".join(instance.objects[x] for x in p.order) for p in profile],
        "allocation": named,
    }
    text = " ".join(f"agent{i}:{name}" for i, name in enumerate(named)) + "\n"
    emit(args, document, text)
    log.info("Successfully ran %s", args.mechanism)
    return EXIT_OK


@exit_code_on_error
@track_command_usage()
def cmd_enumerate(args: argparse.Namespace) -> int:
    """Tabulate every member of a mechanism family on the instance."""
    log.info("Enumerating %s on %s", args.family, args.instance)
    instance = load_instance(args.instance)
    found = compare_with(args.family, instance.constraint())
    report_set(args, instance, found, None)
    log.info("Successfully enumerated %d %s", len(found), args.family)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--instance", required=True, help="Instance file")
    common.add_argument("--format", choices=["text", "grid", "machine"], default="text")
    common.add_argument("--quiet-split", action="store_true", help="With machine output, copy the text report to stderr")
    common.add_argument("--threads", type=int, default=None, help="Worker count (default: MECHKIT_THREADS or CPU count)")
    common.add_argument("--metrics-file", default=None, help="Write prometheus metrics to this file on exit")

    parser = argparse.ArgumentParser(prog="mechkit", description="Analyze allocation mechanisms under constraints.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", parents=[common], help="Show the block structure of a constraint")
    p.add_argument("--pair", default="0,1", help="Agents to project on, 'i,j'")
    p.set_defaults(handler=cmd_decompose)

    p = sub.add_parser("check", parents=[common], help="Check a mechanism against axioms")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--axioms", required=True, help="Comma separated, e.g. gsp,pe")
    p.add_argument("--engine", choices=[e.value for e in Engine], default=Engine.FAST.value)
    p.add_argument("--write-table", default=None, help="Also write the tabulated mechanism to this file")
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("search", parents=[common], help="Find all mechanisms satisfying axioms")
    p.add_argument("--axioms", required=True)
    p.add_argument("--compare", choices=["none", *FAMILIES], default="none")
    p.add_argument("--budget-nodes", type=int, default=None)
    p.add_argument("--budget-seconds", type=float, default=None)
    p.add_argument("--show-tables", action="store_true")
    p.add_argument("--write-dir", default=None, help="Write every found mechanism as a table file")
    p.set_defaults(handler=cmd_search)

    p = sub.add_parser("run", parents=[common], help="Evaluate a mechanism at one profile")
    p.add_argument("--mechanism", required=True)
    p.add_argument("--profile", action="append", help="One ranking per agent in agent order, e.g. a>b>c")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("enumerate", parents=[common], help="Tabulate a mechanism family")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--show-tables", action="store_true")
    p.add_argument("--write-dir", default=None)
    p.set_defaults(handler=cmd_enumerate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is None:
        args.threads = get_threads()
    initiate_metrics(COMMANDS)
    code = args.handler(args)
    if args.metrics_file:
        write_metrics(args.metrics_file)
    return code


if __name__ == "__main__":
    sys.exit(main())
