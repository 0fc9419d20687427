"""
Unit tests for the blocks module.
"""

import pytest

from mechkit.blocks import UnionFind, block_diagonal_order, count_sp_pe, decompose
from mechkit.constraint import all_constraints, full_constraint
from mechkit.exceptions import ArgumentError
from tests.test_utils import (
    THREE_BLOCK_CELLS,
    create_test_constraint,
    create_test_three_block_constraint,
)


class TestUnionFind:
    """Test cases for the disjoint-set structure."""

    def test_union_and_find(self) -> None:
        """Test that unions merge components."""
        uf = UnionFind(5)
        uf.union(0, 1)
        uf.union(3, 4)
        uf.union(1, 4)
        assert uf.find(0) == uf.find(3)
        assert uf.find(2) != uf.find(0)
        assert sorted(sorted(c) for c in uf.components()) == [[0, 1, 3, 4], [2]]

    def test_union_is_idempotent(self) -> None:
        """Test that repeated unions change nothing."""
        uf = UnionFind(2)
        uf.union(0, 1)
        uf.union(1, 0)
        assert len(uf.components()) == 1


class TestDecompose:
    """Test cases for the block decomposition."""

    def test_three_block_sets(self) -> None:
        """Test the always-infeasible objects and relevant cells."""
        d = decompose(create_test_three_block_constraint())
        assert d.r1 == frozenset({3})
        assert d.r2 == frozenset({3, 5})
        assert len(d.cstar) == 8

    def test_three_block_cells(self) -> None:
        """Test that the blocks are labeled in order of their smallest cell."""
        d = decompose(create_test_three_block_constraint())
        assert [b.label for b in d.blocks] == ["E1", "E2", "E3"]
        assert [sorted(b.cells) for b in d.blocks] == [sorted(cells) for cells in THREE_BLOCK_CELLS]
        assert d.block_of((5, 7)) == 1
        assert d.block_of((0, 0)) is None
        assert d.block_by_label("E3") == 2

    def test_unknown_block_label(self) -> None:
        """Test that unknown labels are rejected."""
        d = decompose(create_test_three_block_constraint())
        with pytest.raises(ArgumentError) as exc_info:
            d.block_by_label("E9")
        assert "E9" in str(exc_info.value)

    def test_three_block_diagonal_order(self) -> None:
        """Test the row and column orders that make blocks contiguous."""
        rows, cols = block_diagonal_order(decompose(create_test_three_block_constraint()))
        assert rows == [3, 0, 1, 5, 2, 4, 6, 7]
        assert cols == [3, 5, 1, 0, 2, 7, 4, 6]

    def test_blocks_share_no_row_or_column(self) -> None:
        """Test that distinct blocks never share a coordinate."""
        d = decompose(create_test_three_block_constraint())
        for a in d.blocks:
            for b in d.blocks:
                if a is not b:
                    assert not set(a.rows) & set(b.rows)
                    assert not set(a.cols) & set(b.cols)

    def test_block_diagonal_order_is_contiguous(self) -> None:
        """Test that every block occupies consecutive rows and columns for all three-object constraints."""
        for c in all_constraints(2, 3):
            d = decompose(c)
            rows, cols = block_diagonal_order(d)
            assert sorted(rows) == sorted(cols) == [0, 1, 2]
            for block in d.blocks:
                row_at = sorted(rows.index(x) for x in block.rows)
                col_at = sorted(cols.index(y) for y in block.cols)
                assert row_at == list(range(row_at[0], row_at[0] + len(row_at)))
                assert col_at == list(range(col_at[0], col_at[0] + len(col_at)))

    def test_house_allocation_has_diagonal_blocks(self) -> None:
        """Test that every diagonal cell is its own block."""
        d = decompose(create_test_constraint("house_allocation", 2, 3))
        assert [b.cells for b in d.blocks] == [((0, 0),), ((1, 1),), ((2, 2),)]
        assert count_sp_pe(d) == 8

    def test_social_choice_has_one_block(self) -> None:
        """Test that all off-diagonal cells form a single block."""
        d = decompose(create_test_constraint("social_choice", 2, 3))
        assert len(d.blocks) == 1
        assert len(d.blocks[0].cells) == 6
        assert count_sp_pe(d) == 2

    @pytest.mark.parametrize(
        "kind,blocks",
        [("social_choice", 1), ("house_allocation", 10)],
    )
    def test_ten_objects(self, kind: str, blocks: int) -> None:
        """Test block counts over ten objects."""
        d = decompose(create_test_constraint(kind, 2, 10))
        assert len(d.blocks) == blocks
        assert count_sp_pe(d) == 2**blocks

    def test_full_constraint_has_no_blocks(self) -> None:
        """Test that an unconstrained pair has a single efficient strategy-proof mechanism."""
        d = decompose(full_constraint(2, 3))
        assert d.blocks == ()
        assert count_sp_pe(d) == 1

    def test_needs_two_agents(self) -> None:
        """Test that decomposition is defined for two agents only."""
        with pytest.raises(ArgumentError):
            decompose(create_test_constraint("house_allocation", 3, 3))
