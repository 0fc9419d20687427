"""
Agents, objects, allocations and feasibility constraints.

A constraint is stored extensionally as a boolean bitmap over the m^n
allocation indices in mixed-radix order (agent 0 is the most significant
digit), together with the sorted array of its feasible allocations.
"""

from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property
from itertools import permutations, product
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from mechkit.exceptions import ArgumentError
from mechkit.logger import log

AgentId = int
ObjectId = int
Allocation = tuple[ObjectId, ...]

# Explicit bitmaps beyond this many cells are refused
MAX_CELLS = 10**8


class ConstraintKind(StrEnum):
    """Constraints with a closed-form definition."""

    HOUSE_ALLOCATION = "house_allocation"
    ROOMMATES = "roommates"
    SOCIAL_CHOICE = "social_choice"
    COMPLEMENT_DIAGONAL = "complement_diagonal"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Suballocation:
    """A partial assignment of objects to a subset of agents.

    The assignment is kept as (agent, object) pairs sorted by agent so that
    equal suballocations compare and hash equal.
    """

    pairs: tuple[tuple[AgentId, ObjectId], ...] = ()

    def __post_init__(self) -> None:
        pairs = tuple(sorted((int(a), int(x)) for a, x in self.pairs))
        agents = [a for a, _ in pairs]
        if len(set(agents)) != len(agents):
            raise ArgumentError(f"agent assigned twice in suballocation {pairs}")
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def from_mapping(cls, assignment: Mapping[AgentId, ObjectId]) -> "Suballocation":
        return cls(tuple(assignment.items()))

    @classmethod
    def from_key(cls, key: str) -> "Suballocation":
        """Parse the "agent:object,..." serialization produced by `key`."""
        key = key.strip()
        if not key or key == "-":
            return cls()
        try:
            pairs = [tuple(int(v) for v in item.split(":")) for item in key.split(",")]
        except ValueError as e:
            raise ArgumentError(f"malformed suballocation key {key!r}") from e
        if any(len(p) != 2 for p in pairs):
            raise ArgumentError(f"malformed suballocation key {key!r}")
        return cls(tuple(pairs))  # type: ignore[arg-type]

    @property
    def domain(self) -> frozenset[AgentId]:
        return frozenset(a for a, _ in self.pairs)

    @property
    def assignment(self) -> dict[AgentId, ObjectId]:
        return dict(self.pairs)

    def key(self) -> str:
        """Serialize as "agent:object,..." in ascending agent order."""
        return ",".join(f"{a}:{x}" for a, x in self.pairs)

    def extend(self, agent: AgentId, obj: ObjectId) -> "Suballocation":
        return Suballocation(self.pairs + ((agent, obj),))

    def agrees_with(self, allocation: Sequence[ObjectId]) -> bool:
        return all(allocation[a] == x for a, x in self.pairs)

    def is_complete(self, n: int) -> bool:
        return len(self.pairs) == n

    def __len__(self) -> int:
        return len(self.pairs)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{a}->{x}" for a, x in self.pairs) + "}"


class Constraint:
    """A nonempty set of feasible allocations for n agents over m objects.

    Args:
        n: Number of agents.
        m: Number of objects.
        mask: Boolean array of length m**n; entry k is True iff the allocation
            with mixed-radix index k is feasible.
    """

    def __init__(self, n: int, m: int, mask: np.ndarray):
        if n < 1 or m < 1:
            raise ArgumentError(f"need at least one agent and one object, got n={n}, m={m}")
        if m**n > MAX_CELLS:
            raise ArgumentError(f"m^n = {m**n} allocations is too large for an explicit constraint")
        mask = np.asarray(mask, dtype=bool).reshape(-1)
        if mask.shape[0] != m**n:
            raise ArgumentError(f"bitmap has {mask.shape[0]} cells, expected {m**n}")
        if not mask.any():
            raise ArgumentError("constraint must contain at least one feasible allocation")
        mask = mask.copy()
        mask.flags.writeable = False
        self.n = n
        self.m = m
        self.mask = mask

    @classmethod
    def from_allocations(
        cls, n: int, m: int, allocations: Iterable[Sequence[ObjectId]]
    ) -> "Constraint":
        mask = np.zeros(m**n, dtype=bool)
        for allocation in allocations:
            mask[allocation_index(allocation, n, m)] = True
        return cls(n, m, mask)

    @cached_property
    def radix(self) -> np.ndarray:
        """Place values of each agent's digit in an allocation index."""
        return self.m ** np.arange(self.n - 1, -1, -1, dtype=np.int64)

    @cached_property
    def indices(self) -> np.ndarray:
        """Sorted allocation indices of the feasible set."""
        idx = np.flatnonzero(self.mask).astype(np.int64)
        idx.flags.writeable = False
        return idx

    @cached_property
    def allocations(self) -> np.ndarray:
        """Feasible allocations as a (|C|, n) array, sorted by index."""
        arr = (self.indices[:, None] // self.radix[None, :]) % self.m
        arr.flags.writeable = False
        return arr

    @property
    def grid(self) -> np.ndarray:
        """The bitmap viewed as an n-dimensional (m, ..., m) array."""
        return self.mask.reshape((self.m,) * self.n)

    def index_of(self, allocation: Sequence[ObjectId]) -> int:
        return allocation_index(allocation, self.n, self.m)

    def allocation_at(self, index: int) -> Allocation:
        return index_allocation(index, self.n, self.m)

    def __contains__(self, allocation: object) -> bool:
        if not isinstance(allocation, (tuple, list)) or len(allocation) != self.n:
            return False
        if any(not 0 <= int(x) < self.m for x in allocation):
            return False
        return bool(self.mask[self.index_of(allocation)])

    def __iter__(self) -> Iterator[Allocation]:
        return (tuple(int(x) for x in row) for row in self.allocations)

    def __len__(self) -> int:
        return int(self.indices.shape[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Constraint):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and bool(np.array_equal(self.mask, other.mask))
        )

    def __hash__(self) -> int:
        return hash((self.n, self.m, self.mask.tobytes()))

    def __repr__(self) -> str:
        return f"Constraint(n={self.n}, m={self.m}, feasible={len(self)})"

    def __getstate__(self) -> dict:
        return {"n": self.n, "m": self.m, "mask": np.array(self.mask)}

    def __setstate__(self, state: dict) -> None:
        self.__init__(state["n"], state["m"], state["mask"])  # type: ignore[misc]

    def extension_mask(self, mu: Suballocation) -> np.ndarray:
        """Boolean selector over `allocations` of the rows agreeing with `mu`."""
        selector = np.ones(len(self), dtype=bool)
        for agent, obj in mu.pairs:
            if not 0 <= agent < self.n:
                raise ArgumentError(f"agent {agent} outside [0, {self.n})")
            selector &= self.allocations[:, agent] == obj
        return selector

    def options(self, agent: AgentId, mu: Suballocation) -> tuple[ObjectId, ...]:
        """Objects `agent` can receive in some feasible extension of `mu`."""
        rows = self.allocations[self.extension_mask(mu)]
        return tuple(int(x) for x in np.unique(rows[:, agent]))


def allocation_index(allocation: Sequence[ObjectId], n: int, m: int) -> int:
    """Mixed-radix index of an allocation, agent 0 most significant."""
    if len(allocation) != n:
        raise ArgumentError(f"allocation {tuple(allocation)} does not have length {n}")
    index = 0
    for x in allocation:
        x = int(x)
        if not 0 <= x < m:
            raise ArgumentError(f"object {x} outside [0, {m})")
        index = index * m + x
    return index


def index_allocation(index: int, n: int, m: int) -> Allocation:
    digits = []
    for _ in range(n):
        index, x = divmod(int(index), m)
        digits.append(x)
    return tuple(reversed(digits))


def full_constraint(n: int, m: int) -> Constraint:
    """The unconstrained set O^n."""
    return Constraint(n, m, np.ones(m**n, dtype=bool))


def builtin_constraint(
    kind: ConstraintKind | str,
    n: int,
    m: int,
    allocations: Iterable[Sequence[ObjectId]] | None = None,
) -> Constraint:
    """
    Build one of the closed-form constraints.

    Args:
        kind: Which constraint to build; `custom` requires `allocations`.
        n: Number of agents.
        m: Number of objects.
        allocations: Feasible allocations for the `custom` kind.

    Returns:
        Constraint: The feasible set matching the definition of `kind`.

    Raises:
        ArgumentError: If the kind's preconditions on n and m do not hold.
    """
    kind = ConstraintKind(kind)
    if n < 1 or m < 1:
        raise ArgumentError(f"need at least one agent and one object, got n={n}, m={m}")
    grid = np.indices((m,) * n).reshape(n, -1).T
    if kind is ConstraintKind.HOUSE_ALLOCATION:
        if m < n:
            raise ArgumentError(f"house allocation needs m >= n, got n={n}, m={m}")
        mask = np.array([len(set(row)) == n for row in grid.tolist()], dtype=bool)
    elif kind is ConstraintKind.ROOMMATES:
        if m != n:
            raise ArgumentError(f"roommates needs m == n, got n={n}, m={m}")
        if n % 2:
            raise ArgumentError(f"roommates needs an even number of agents, got {n}")
        agents = np.arange(n)
        fixed_point_free = (grid != agents[None, :]).all(axis=1)
        involution = (np.take_along_axis(grid, grid, axis=1) == agents[None, :]).all(axis=1)
        mask = fixed_point_free & involution
    elif kind is ConstraintKind.SOCIAL_CHOICE:
        mask = (grid == grid[:, :1]).all(axis=1)
    elif kind is ConstraintKind.COMPLEMENT_DIAGONAL:
        if m**n <= m:
            raise ArgumentError(f"complement of the diagonal is empty for n={n}, m={m}")
        mask = ~(grid == grid[:, :1]).all(axis=1)
    else:
        if allocations is None:
            raise ArgumentError("custom constraints need an explicit list of allocations")
        return Constraint.from_allocations(n, m, allocations)
    log.debug("Built %s constraint n=%d m=%d with %d allocations", kind, n, m, int(mask.sum()))
    return Constraint(n, m, mask)


def project(c: Constraint, agents: Iterable[AgentId]) -> Constraint:
    """
    Projection C^M of a constraint on a subset of agents.

    The result's agent k is the k-th smallest original index in `agents`;
    the order and repetitions of `agents` are ignored. Callers mapping
    results back use `sorted(set(agents))`.

    Raises:
        ArgumentError: If `agents` is empty or contains an index outside [0, n).
    """
    kept = sorted(set(int(a) for a in agents))
    if not kept:
        raise ArgumentError("projection needs a nonempty agent set")
    if kept[0] < 0 or kept[-1] >= c.n:
        raise ArgumentError(f"agents {kept} outside [0, {c.n})")
    if len(kept) == c.n:
        return c
    dropped = tuple(a for a in range(c.n) if a not in kept)
    mask = c.grid.any(axis=dropped)
    return Constraint(len(kept), c.m, mask.reshape(-1))


def feasible_extensions(c: Constraint, mu: Suballocation) -> frozenset[Allocation]:
    """The set C(mu) of feasible complete allocations agreeing with `mu`."""
    rows = c.allocations[c.extension_mask(mu)]
    return frozenset(tuple(int(x) for x in row) for row in rows)


def always_infeasible(c: Constraint, i: AgentId) -> frozenset[ObjectId]:
    """R_i: the objects no feasible allocation assigns to agent `i`."""
    if not 0 <= i < c.n:
        raise ArgumentError(f"agent {i} outside [0, {c.n})")
    used = set(int(x) for x in np.unique(c.allocations[:, i]))
    return frozenset(x for x in range(c.m) if x not in used)


def is_single_compromising(c: Constraint) -> bool:
    """True iff every agent can unilaterally repair every infeasible allocation."""
    grid = c.grid
    infeasible = ~grid
    for agent in range(c.n):
        repairable = grid.any(axis=agent, keepdims=True)
        if (infeasible & ~repairable).any():
            return False
    return True


def relabel_objects(c: Constraint, perm: Sequence[ObjectId]) -> Constraint:
    """Image of `c` under the object relabeling x -> perm[x]."""
    perm_arr = np.asarray(perm, dtype=np.int64)
    if sorted(perm_arr.tolist()) != list(range(c.m)):
        raise ArgumentError(f"{tuple(perm)} is not a permutation of {c.m} objects")
    return Constraint.from_allocations(c.n, c.m, perm_arr[c.allocations].tolist())


def relabel_agents(c: Constraint, perm: Sequence[AgentId]) -> Constraint:
    """Constraint whose agent k plays the role of agent perm[k] in `c`."""
    if sorted(perm) != list(range(c.n)):
        raise ArgumentError(f"{tuple(perm)} is not a permutation of {c.n} agents")
    return Constraint(c.n, c.m, np.transpose(c.grid, tuple(perm)).reshape(-1))


def product_constraint(first: Constraint, second: Constraint) -> Constraint:
    """Constraint of a direct sum: the first block's agents followed by the second's."""
    if first.m != second.m:
        raise ArgumentError(f"object sets differ: {first.m} vs {second.m}")
    mask = np.logical_and.outer(first.mask, second.mask)
    return Constraint(first.n + second.n, first.m, mask.reshape(-1))


def orbit_representatives(n: int, m: int) -> list[Constraint]:
    """
    One constraint per object-relabeling orbit of all nonempty constraints.

    The representative is the member whose bitmap, read as a binary number with
    cell 0 as the least significant bit, is smallest.
    """
    cells = m**n
    if cells > 16:
        raise ArgumentError(f"2^{cells} constraints is too many to sweep")
    grid = np.indices((m,) * n).reshape(n, -1).T
    relabelings = []
    for perm in permutations(range(m)):
        perm_arr = np.asarray(perm)
        target = (perm_arr[grid] * (m ** np.arange(n - 1, -1, -1))).sum(axis=1)
        relabelings.append(target)
    seen: set[int] = set()
    representatives = []
    for code in range(1, 2**cells):
        if code in seen:
            continue
        bits = [(code >> k) & 1 for k in range(cells)]
        orbit = set()
        for target in relabelings:
            image = 0
            for k, bit in enumerate(bits):
                if bit:
                    image |= 1 << int(target[k])
            orbit.add(image)
        seen |= orbit
        rep = min(orbit)
        mask = np.array([(rep >> k) & 1 for k in range(cells)], dtype=bool)
        representatives.append(Constraint(n, m, mask))
    log.info("Found %d relabeling orbits among %d constraints", len(representatives), 2**cells - 1)
    return representatives


def all_constraints(n: int, m: int) -> Iterator[Constraint]:
    """Every nonempty constraint over n agents and m objects."""
    cells = m**n
    if cells > 16:
        raise ArgumentError(f"2^{cells} constraints is too many to enumerate")
    for bits in product((False, True), repeat=cells):
        if any(bits):
            yield Constraint(n, m, np.array(bits, dtype=bool))
