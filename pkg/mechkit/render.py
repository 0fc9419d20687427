"""
Human-readable and machine-readable reports.

Machine documents are plain dicts ready for `json.dumps`; text reports are
strings. Objects always appear under their instance names.
"""

import string
from typing import Any, Sequence

from mechkit.axioms import CheckResult, Witness
from mechkit.blocks import BlockDecomposition, block_diagonal_order, count_sp_pe
from mechkit.constraint import Allocation
from mechkit.mechanisms import TabulatedMechanism
from mechkit.preferences import Profile, preference_space
from mechkit.search import MechanismSet, SetComparison

FEASIBLE = "."
ALWAYS_INFEASIBLE = "#"
BLOCK_LETTERS = string.ascii_uppercase + string.ascii_lowercase
OVERFLOW_LETTER = "+"


def block_letter(k: int) -> str:
    return BLOCK_LETTERS[k] if k < len(BLOCK_LETTERS) else OVERFLOW_LETTER


def show_allocation(allocation: Allocation | None, names: Sequence[str]) -> str:
    if allocation is None:
        return "-"
    return "(" + ", ".join(names[x] for x in allocation) + ")"


def show_profile(profile: Profile, names: Sequence[str]) -> str:
    return " | ".join(">".join(names[x] for x in p.order) for p in profile)


def render_grid(d: BlockDecomposition, names: Sequence[str]) -> str:
    """
    Draw a two-agent constraint with its blocks on the diagonal.

    Rows are agent 0's objects and columns agent 1's, both in block diagonal
    order. Feasible cells are '.', cells in an always-infeasible row or column
    are '#', and every other infeasible cell carries its block's letter. Rows
    and columns of always-infeasible objects are marked with 'R'.

    Returns:
        str: The grid followed by a legend, newline terminated.
    """
    rows, cols = block_diagonal_order(d)
    grid = d.constraint.grid
    width = max(len(name) for name in names)
    margin = " " * (2 + width + 1)

    lines = [margin + " ".join(names[y].rjust(width) for y in cols)]
    if d.r2:
        lines.append(margin + " ".join(("R" if y in d.r2 else "").rjust(width) for y in cols).rstrip())
    for x in rows:
        cells = []
        for y in cols:
            if grid[x, y]:
                mark = FEASIBLE
            elif x in d.r1 or y in d.r2:
                mark = ALWAYS_INFEASIBLE
            else:
                block = d.block_of((x, y))
                mark = block_letter(block) if block is not None else ALWAYS_INFEASIBLE
            cells.append(mark.rjust(width))
        marker = "R" if x in d.r1 else " "
        lines.append(f"{marker} {names[x].rjust(width)} " + " ".join(cells))
    for k, block in enumerate(d.blocks):
        lines.append(f"{block_letter(k)} = {block.label}")
    return "\n".join(lines) + "\n"


def decomposition_document(d: BlockDecomposition, names: Sequence[str]) -> dict[str, Any]:
    rows, cols = block_diagonal_order(d)
    return {
        "r1": [names[x] for x in sorted(d.r1)],
        "r2": [names[y] for y in sorted(d.r2)],
        "cstar": [[names[x], names[y]] for x, y in d.cstar],
        "blocks": [
            {
                "label": block.label,
                "cells": [[names[x], names[y]] for x, y in block.cells],
                "rows": [names[x] for x in block.rows],
                "cols": [names[y] for y in block.cols],
            }
            for block in d.blocks
        ],
        "row_order": [names[x] for x in rows],
        "col_order": [names[y] for y in cols],
        "count_sp_pe": count_sp_pe(d),
    }


def decomposition_text(d: BlockDecomposition, names: Sequence[str]) -> str:
    def cells(items: Sequence[tuple[int, int]]) -> str:
        return " ".join(f"({names[x]},{names[y]})" for x, y in items) or "none"

    lines = [
        "R1: " + (" ".join(names[x] for x in sorted(d.r1)) or "none"),
        "R2: " + (" ".join(names[y] for y in sorted(d.r2)) or "none"),
        "C*: " + cells(d.cstar),
        f"blocks: {len(d.blocks)}",
    ]
    lines.extend(f"  {block.label}: {cells(block.cells)}" for block in d.blocks)
    lines.append(f"strategy-proof and efficient mechanisms: {count_sp_pe(d)}")
    return "\n".join(lines) + "\n"


def witness_document(w: Witness, names: Sequence[str]) -> dict[str, Any]:
    def allocation(a: Allocation | None) -> list[str] | None:
        return None if a is None else [names[x] for x in a]

    def profile(p: Profile | None) -> list[str] | None:
        return None if p is None else [">".join(names[x] for x in pref.order) for pref in p]

    return {
        "axiom": str(w.kind),
        "profile": profile(w.profile),
        "coalition": list(w.coalition),
        "misreport": profile(w.misreport),
        "before": allocation(w.before),
        "after": allocation(w.after),
        "alternative": allocation(w.alternative),
    }


def check_document(results: Sequence[CheckResult], names: Sequence[str]) -> dict[str, Any]:
    return {
        "passed": all(results),
        "results": [
            {
                "axiom": str(r.axiom),
                "passed": r.passed,
                "witness": witness_document(r.witness, names) if r.witness else None,
            }
            for r in results
        ],
    }


def check_text(results: Sequence[CheckResult], names: Sequence[str]) -> str:
    lines = []
    for r in results:
        if r.passed:
            lines.append(f"{r.axiom}: pass")
        else:
            assert r.witness is not None
            lines.append(f"{r.axiom}: FAIL")
            lines.append(f"  {r.witness.describe(names)}")
    return "\n".join(lines) + "\n"


def table_rows(mech: TabulatedMechanism, names: Sequence[str]) -> list[str]:
    """One "profile -> allocation" line per profile, in profile index order."""
    space = preference_space(mech.m)
    c = mech.constraint
    return [
        f"{show_profile(space.profile_at(k, mech.n), names)} -> {show_allocation(c.allocation_at(int(v)), names)}"
        for k, v in enumerate(mech.flat.tolist())
    ]


def compact_table(mech: TabulatedMechanism, names: Sequence[str]) -> str:
    """The table as a single line of allocations in profile index order."""
    c = mech.constraint
    return " ".join(",".join(names[x] for x in c.allocation_at(int(v))) for v in mech.flat.tolist())


def mechanism_set_document(
    found: MechanismSet,
    names: Sequence[str],
    comparison: SetComparison | None = None,
    show_tables: bool = False,
) -> dict[str, Any]:
    document: dict[str, Any] = {"count": len(found), "complete": found.complete}
    if comparison is not None:
        document["equal"] = comparison.equal
        document["only_found"] = [compact_table(m, names) for m in comparison.only_left]
        document["only_expected"] = [compact_table(m, names) for m in comparison.only_right]
    if show_tables:
        document["tables"] = [compact_table(m, names) for m in found]
    return document


def mechanism_set_text(
    found: MechanismSet,
    names: Sequence[str],
    comparison: SetComparison | None = None,
    show_tables: bool = False,
) -> str:
    lines = [f"mechanisms: {len(found)}" + ("" if found.complete else " (incomplete)")]
    if comparison is not None:
        lines.append("sets equal" if comparison.equal else "sets differ")
        for label, items in (("only found", comparison.only_left), ("only expected", comparison.only_right)):
            for m in items:
                lines.append(f"  {label}: {compact_table(m, names)}")
    if show_tables:
        for k, m in enumerate(found):
            lines.append(f"[{k}] {m.source}")
            lines.extend(f"  {row}" for row in table_rows(m, names))
    return "\n".join(lines) + "\n"
