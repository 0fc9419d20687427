"""
Unit tests for the render module.
"""

import json

from mechkit.axioms import check
from mechkit.blocks import decompose
from mechkit.mechanisms import SerialDictatorship, tabulate
from mechkit.render import (
    OVERFLOW_LETTER,
    block_letter,
    check_document,
    check_text,
    compact_table,
    decomposition_document,
    decomposition_text,
    mechanism_set_document,
    mechanism_set_text,
    render_grid,
    show_allocation,
    table_rows,
)
from mechkit.search import MechanismSet, enumerate_local_dictatorships, set_equal
from tests.test_utils import (
    create_test_bossy_mechanism,
    create_test_constraint,
    create_test_three_block_constraint,
)

NAMES = ["a", "b", "c"]
DIGIT_NAMES = [str(k) for k in range(8)]

HOUSE_GRID = """\
    a b c
  a A . .
  b . B .
  c . . C
A = E1
B = E2
C = E3
"""

THREE_BLOCK_GRID = """\
    3 5 1 0 2 7 4 6
    R R
R 3 # # # # # # # #
  0 # # A . . . . .
  1 # # . B B . . .
  5 # # . . B B . .
  2 # # . . . . C .
  4 # # . . . . C C
  6 # # . . . . . .
  7 # # . . . . . .
A = E1
B = E2
C = E3
"""


class TestRenderGrid:
    """Test cases for the block-diagonal grid."""

    def test_house_allocation(self) -> None:
        """Test that the diagonal cells are three blocks."""
        d = decompose(create_test_constraint("house_allocation", 2, 3))
        assert render_grid(d, NAMES) == HOUSE_GRID

    def test_three_block_constraint(self) -> None:
        """Test the always-infeasible markers and block letters."""
        d = decompose(create_test_three_block_constraint())
        assert render_grid(d, DIGIT_NAMES) == THREE_BLOCK_GRID

    def test_wide_names_are_aligned(self) -> None:
        """Test that cells are padded to the longest object name and columns follow the blocks."""
        d = decompose(create_test_constraint("social_choice", 2, 2))
        lines = render_grid(d, ["x", "yy"]).splitlines()
        assert lines[0] == "     yy  x"
        assert lines[1] == "   x  A  ."
        assert lines[2] == "  yy  .  B"

    def test_block_letters(self) -> None:
        """Test that letters run through both cases before overflowing."""
        assert block_letter(0) == "A"
        assert block_letter(26) == "a"
        assert block_letter(52) == OVERFLOW_LETTER


class TestDecompositionReports:
    """Test cases for decomposition reports."""

    def test_document(self) -> None:
        """Test the machine-readable decomposition."""
        document = decomposition_document(decompose(create_test_three_block_constraint()), DIGIT_NAMES)
        assert document["r1"] == ["3"]
        assert document["r2"] == ["3", "5"]
        assert [b["label"] for b in document["blocks"]] == ["E1", "E2", "E3"]
        assert document["blocks"][0]["cells"] == [["0", "1"]]
        assert document["row_order"] == ["3", "0", "1", "5", "2", "4", "6", "7"]
        assert document["count_sp_pe"] == 8
        assert json.loads(json.dumps(document)) == document

    def test_text(self) -> None:
        """Test the text summary of a decomposition."""
        text = decomposition_text(decompose(create_test_constraint("house_allocation", 2, 3)), NAMES)
        assert text.splitlines() == [
            "R1: none",
            "R2: none",
            "C*: (a,a) (b,b) (c,c)",
            "blocks: 3",
            "  E1: (a,a)",
            "  E2: (b,b)",
            "  E3: (c,c)",
            "strategy-proof and efficient mechanisms: 8",
        ]


class TestCheckReports:
    """Test cases for check reports."""

    def test_text(self) -> None:
        """Test one line per axiom and a description per failure."""
        results = check(create_test_bossy_mechanism(), ["sp", "nonbossy"])
        lines = check_text(results, NAMES).splitlines()
        assert lines[0] == "sp: pass"
        assert lines[1] == "nonbossy: FAIL"
        assert lines[2].startswith("  nonbossy violated at profile [a>b>c | a>b>c]")

    def test_document(self) -> None:
        """Test the machine-readable check results."""
        results = check(create_test_bossy_mechanism(), ["sp", "nonbossy"])
        document = check_document(results, NAMES)
        assert document["passed"] is False
        assert document["results"][0] == {"axiom": "sp", "passed": True, "witness": None}
        witness = document["results"][1]["witness"]
        assert witness["profile"] == ["a>b>c", "a>b>c"]
        assert witness["misreport"] == ["a>c>b", "a>b>c"]
        assert witness["before"] == ["a", "b"]
        assert witness["after"] == ["a", "c"]
        assert witness["alternative"] is None


class TestTableReports:
    """Test cases for table and set reports."""

    def test_table_rows(self) -> None:
        """Test the per-profile listing."""
        mech = tabulate(SerialDictatorship(create_test_constraint("house_allocation", 2, 3), [0, 1]))
        rows = table_rows(mech, NAMES)
        assert len(rows) == 36
        assert rows[0] == "a>b>c | a>b>c -> (a, b)"
        assert show_allocation(None, NAMES) == "-"

    def test_compact_table(self) -> None:
        """Test the single-line table."""
        mech = tabulate(SerialDictatorship(create_test_constraint("house_allocation", 2, 2), [1, 0]))
        assert compact_table(mech, ["a", "b"]) == "b,a a,b b,a a,b"

    def test_set_reports(self) -> None:
        """Test counts, comparison and tables in both formats."""
        c = create_test_constraint("house_allocation", 2, 3)
        expected = enumerate_local_dictatorships(c)
        found = MechanismSet(c, list(expected)[:7])
        comparison = set_equal(found, expected)
        document = mechanism_set_document(found, NAMES, comparison, show_tables=True)
        assert document["count"] == 7
        assert document["complete"] is True
        assert document["equal"] is False
        assert document["only_found"] == []
        assert len(document["only_expected"]) == 1
        assert len(document["tables"]) == 7
        text = mechanism_set_text(found, NAMES, comparison)
        assert text.splitlines()[:2] == ["mechanisms: 7", "sets differ"]
        assert text.splitlines()[2].startswith("  only expected: ")

    def test_incomplete_set(self) -> None:
        """Test that incomplete results are flagged."""
        c = create_test_constraint("house_allocation", 2, 3)
        assert mechanism_set_text(MechanismSet(c, complete=False), NAMES) == "mechanisms: 0 (incomplete)\n"
