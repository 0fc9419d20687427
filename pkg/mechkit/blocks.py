"""
Block structure of two-agent constraints.

Infeasible cells whose coordinates are not always infeasible are linked
when they share a row or a column; the connected components are the
blocks. Each block gets its own local dictator.
"""

from dataclasses import dataclass, field
from functools import cached_property

from mechkit.constraint import Constraint, ObjectId, always_infeasible
from mechkit.exceptions import ArgumentError
from mechkit.logger import log

Cell = tuple[ObjectId, ObjectId]


class UnionFind:
    """Disjoint sets with path compression and union by rank."""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size

    def find(self, x: int) -> int:
        root = x
        while root != self.parent[root]:
            root = self.parent[root]
        while x != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        px = self.find(x)
        py = self.find(y)
        if px == py:
            return
        if self.rank[px] < self.rank[py]:
            px, py = py, px
        self.parent[py] = px
        if self.rank[px] == self.rank[py]:
            self.rank[px] += 1

    def components(self) -> list[list[int]]:
        groups: dict[int, list[int]] = {}
        for x in range(len(self.parent)):
            groups.setdefault(self.find(x), []).append(x)
        return list(groups.values())


@dataclass(frozen=True)
class Block:
    label: str
    cells: tuple[Cell, ...]

    @property
    def rows(self) -> tuple[ObjectId, ...]:
        return tuple(sorted({x for x, _ in self.cells}))

    @property
    def cols(self) -> tuple[ObjectId, ...]:
        return tuple(sorted({y for _, y in self.cells}))

    def __contains__(self, cell: object) -> bool:
        return cell in self.cells


@dataclass(frozen=True)
class BlockDecomposition:
    """Always-infeasible objects, the cells between them and their blocks.

    Attributes:
        constraint: The decomposed two-agent constraint.
        r1: Objects agent 0 never receives.
        r2: Objects agent 1 never receives.
        cstar: Infeasible cells with neither coordinate always infeasible, sorted.
        blocks: Components of `cstar`, ordered by their smallest cell.
    """

    constraint: Constraint
    r1: frozenset[ObjectId]
    r2: frozenset[ObjectId]
    cstar: tuple[Cell, ...]
    blocks: tuple[Block, ...] = field(default=())

    @cached_property
    def _block_index(self) -> dict[Cell, int]:
        return {cell: k for k, block in enumerate(self.blocks) for cell in block.cells}

    def block_of(self, cell: Cell) -> int | None:
        """Position of the block holding `cell`, or None outside `cstar`."""
        return self._block_index.get(cell)

    def block_by_label(self, label: str) -> int:
        for k, block in enumerate(self.blocks):
            if block.label == label:
                return k
        raise ArgumentError(f"no block labelled {label!r}; blocks are {[b.label for b in self.blocks]}")


def decompose(c: Constraint) -> BlockDecomposition:
    """
    Compute the blocks of a two-agent constraint.

    Args:
        c: A constraint over exactly two agents.

    Returns:
        BlockDecomposition: R_1, R_2, the relevant infeasible cells and their blocks.

    Raises:
        ArgumentError: If the constraint does not have two agents.
    """
    if c.n != 2:
        raise ArgumentError(f"block decomposition needs two agents, got n={c.n}")
    r1 = always_infeasible(c, 0)
    r2 = always_infeasible(c, 1)
    grid = c.grid
    cstar = [
        (x, y)
        for x in range(c.m)
        for y in range(c.m)
        if not grid[x, y] and x not in r1 and y not in r2
    ]

    uf = UnionFind(len(cstar))
    first_in_row: dict[int, int] = {}
    first_in_col: dict[int, int] = {}
    for k, (x, y) in enumerate(cstar):
        uf.union(first_in_row.setdefault(x, k), k)
        uf.union(first_in_col.setdefault(y, k), k)

    components = sorted(uf.components(), key=min)
    blocks = tuple(
        Block(label=f"E{k + 1}", cells=tuple(cstar[i] for i in sorted(members)))
        for k, members in enumerate(components)
    )
    log.debug("Decomposed %d infeasible cells into %d blocks", len(cstar), len(blocks))
    return BlockDecomposition(c, r1, r2, tuple(cstar), blocks)


def block_diagonal_order(d: BlockDecomposition) -> tuple[list[ObjectId], list[ObjectId]]:
    """
    Row and column orders that display each block as a contiguous rectangle.

    Always-infeasible objects come first in ascending order, then the rows
    (columns) of each block in block order, then the remaining objects. Blocks
    never share a row or a column, so the layout is always contiguous.

    Returns:
        tuple: (row order, column order) as lists of objects.
    """
    m = d.constraint.m
    rows = sorted(d.r1)
    cols = sorted(d.r2)
    for block in d.blocks:
        rows.extend(block.rows)
        cols.extend(block.cols)
    rows.extend(x for x in range(m) if x not in rows)
    cols.extend(y for y in range(m) if y not in cols)
    return rows, cols


def count_sp_pe(d: BlockDecomposition) -> int:
    """Number of strategy-proof and efficient mechanisms: one dictator choice per block."""
    return 2 ** len(d.blocks)
