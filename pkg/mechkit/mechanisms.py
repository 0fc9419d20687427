"""
Mechanisms mapping preference profiles to feasible allocations.

Every mechanism can be evaluated on a single profile with `assign` and
tabulated over all profiles with `tabulate`. Tabulation works on arrays of
per-agent preference indices; the dictatorship families override the
generic row-by-row evaluation with vectorized tree walks.
"""

from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property, lru_cache
from typing import Callable, ClassVar, Iterable, Mapping, Sequence

import numpy as np

from mechkit.blocks import BlockDecomposition, decompose
from mechkit.config import get_table_budget
from mechkit.constraint import (
    AgentId,
    Allocation,
    Constraint,
    ObjectId,
    Suballocation,
    is_single_compromising,
    product_constraint,
    project,
    relabel_agents,
)
from mechkit.exceptions import ArgumentError, DefectError, ResourceError, ValidationError
from mechkit.logger import log
from mechkit.preferences import Preference, Profile, merge_profiles, preference_space
from metrics import TABULATION_LATENCY

# Tables smaller than this are never split across workers
PARALLEL_MIN_ROWS = 50_000


class Mechanism(ABC):
    """A deterministic map from profiles to allocations of `constraint`."""

    kind: ClassVar[str] = "mechanism"

    def __init__(self, constraint: Constraint):
        self.constraint = constraint

    @property
    def n(self) -> int:
        return self.constraint.n

    @property
    def m(self) -> int:
        return self.constraint.m

    @abstractmethod
    def assign(self, profile: Profile) -> Allocation:
        """Evaluate the mechanism at one profile."""

    def __call__(self, profile: Profile) -> Allocation:
        return self.assign(profile)

    def tabulate_rows(self, prefs: np.ndarray) -> np.ndarray:
        """
        Evaluate the mechanism on many profiles at once.

        Args:
            prefs: (K, n) array of per-agent preference indices.

        Returns:
            np.ndarray: K allocation indices.
        """
        space = preference_space(self.m)
        out = np.empty(len(prefs), dtype=np.int64)
        for k, row in enumerate(prefs.tolist()):
            profile = Profile(tuple(space[p] for p in row))
            out[k] = self.constraint.index_of(self.assign(profile))
        return out

    def _check_profile(self, profile: Profile) -> None:
        if profile.n != self.n or profile.m != self.m:
            raise ArgumentError(
                f"profile over {profile.n} agents and {profile.m} objects, "
                f"mechanism expects {self.n} and {self.m}"
            )

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.constraint!r})"


class TabulatedMechanism(Mechanism):
    """A mechanism given extensionally by its allocation index per profile.

    Attributes:
        table: Array of shape (P,)*n holding allocation indices, where P = m!.
        source: Kind of the mechanism this table was produced from.
    """

    kind = "table"

    def __init__(self, constraint: Constraint, table: np.ndarray, source: str = "table"):
        super().__init__(constraint)
        size = preference_space(constraint.m).size
        shape = (size,) * constraint.n
        table = np.asarray(table, dtype=np.int64)
        if table.size != size**constraint.n:
            raise ArgumentError(f"table has {table.size} entries, expected {size**constraint.n}")
        table = table.reshape(shape).copy()
        if table.min() < 0 or table.max() >= constraint.m**constraint.n:
            raise ValidationError("table holds an entry outside the allocation range")
        infeasible = np.flatnonzero(~constraint.mask[table.reshape(-1)])
        if infeasible.size:
            bad = constraint.allocation_at(int(table.reshape(-1)[infeasible[0]]))
            raise ValidationError(
                f"table entry at profile {int(infeasible[0])} is infeasible", allocation=bad
            )
        table.flags.writeable = False
        self.table = table
        self.source = source

    @property
    def flat(self) -> np.ndarray:
        return self.table.reshape(-1)

    @cached_property
    def outcomes(self) -> np.ndarray:
        """Objects per agent, shape (n,) + table.shape."""
        radix = self.constraint.radix
        return np.stack([(self.table // r) % self.m for r in radix.tolist()])

    def image(self) -> np.ndarray:
        """Sorted allocation indices the mechanism ever selects."""
        return np.unique(self.flat)

    def key(self) -> bytes:
        return self.flat.tobytes()

    def assign(self, profile: Profile) -> Allocation:
        self._check_profile(profile)
        space = preference_space(self.m)
        digits = tuple(space.index_of(p) for p in profile)
        return self.constraint.allocation_at(int(self.table[digits]))

    def tabulate_rows(self, prefs: np.ndarray) -> np.ndarray:
        return self.table[tuple(prefs.T)]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TabulatedMechanism):
            return NotImplemented
        return self.constraint == other.constraint and bool(np.array_equal(self.table, other.table))

    def __hash__(self) -> int:
        return hash((self.constraint, self.key()))

    def __repr__(self) -> str:
        return f"TabulatedMechanism({self.constraint!r}, source={self.source})"


def tabulate(
    f: Mechanism, budget: int | None = None, threads: int = 1
) -> TabulatedMechanism:
    """
    Evaluate a mechanism on every profile.

    Args:
        f: The mechanism.
        budget: Maximal number of table entries; defaults to MECHKIT_TABLE_BUDGET.
        threads: Workers the profile range is partitioned across.

    Returns:
        TabulatedMechanism: The table; `f` itself if it is already tabulated.

    Raises:
        ResourceError: If (m!)^n exceeds the budget.
        DefectError: If the mechanism produced an infeasible allocation.
    """
    if isinstance(f, TabulatedMechanism):
        return f
    c = f.constraint
    space = preference_space(c.m)
    required = space.profile_count(c.n)
    budget = budget or get_table_budget()
    if required > budget:
        raise ResourceError(f"tabulating {f.kind} over {c.n} agents and {c.m} objects", required, budget)

    prefs = space.profile_grid(c.n)
    with TABULATION_LATENCY.labels(mechanism=f.kind).time():
        if threads > 1 and required >= PARALLEL_MIN_ROWS:
            chunks = np.array_split(prefs, threads)
            with ThreadPoolExecutor(max_workers=threads) as pool:
                table = np.concatenate(list(pool.map(f.tabulate_rows, chunks)))
        else:
            table = f.tabulate_rows(prefs)

    if (table < 0).any() or not c.mask[table].all():
        raise DefectError(f"{f.kind} produced an infeasible allocation")
    log.debug("Tabulated %s: %d profiles, %d distinct outcomes", f.kind, required, np.unique(table).size)
    return TabulatedMechanism(c, table, source=f.kind)


class GsdOrdering:
    """Chooses the next dictator given the suballocation built so far.

    Args:
        default: Agents in priority order; the first one not yet assigned is next.
        overrides: Next agent per suballocation, keyed by `Suballocation.key()`.
    """

    def __init__(
        self,
        default: Sequence[AgentId],
        overrides: Mapping[str | Suballocation, AgentId] | None = None,
    ):
        self.default = tuple(int(a) for a in default)
        if len(set(self.default)) != len(self.default):
            raise ArgumentError(f"default order {self.default} repeats an agent")
        self.overrides: dict[str, AgentId] = {}
        for key, agent in (overrides or {}).items():
            mu = key if isinstance(key, Suballocation) else Suballocation.from_key(key)
            self.overrides[mu.key()] = int(agent)

    def next(self, mu: Suballocation) -> AgentId:
        agent = self.overrides.get(mu.key())
        if agent is not None:
            return agent
        for agent in self.default:
            if agent not in mu.domain:
                return agent
        raise DefectError(f"ordering has no agent left at {mu}")

    def validate(self, c: Constraint, roots: Iterable[Suballocation] = (Suballocation(),)) -> int:
        """
        Check the ordering on every suballocation reachable from `roots`.

        Returns:
            int: Number of reachable decision points visited.

        Raises:
            ValidationError: If the ordering names an assigned or unknown agent.
        """
        stack = list(roots)
        visited = 0
        while stack:
            mu = stack.pop()
            if len(mu) >= c.n:
                continue
            selector = c.extension_mask(mu)
            if not selector.any():
                continue
            visited += 1
            try:
                agent = self.next(mu)
            except DefectError as e:
                raise ValidationError(f"ordering names no agent at {mu}") from e
            if not 0 <= agent < c.n or agent in mu.domain:
                raise ValidationError(f"ordering returns agent {agent} at {mu}", agent=agent)
            for x in np.unique(c.allocations[selector, agent]).tolist():
                stack.append(mu.extend(agent, x))
        return visited

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GsdOrdering):
            return NotImplemented
        return self.default == other.default and self.overrides == other.overrides

    def __repr__(self) -> str:
        return f"GsdOrdering(default={self.default}, overrides={len(self.overrides)})"


class Gsd(Mechanism):
    """Generalized serial dictatorship driven by a `GsdOrdering`."""

    kind = "gsd"

    def __init__(self, constraint: Constraint, zeta: GsdOrdering, validate: bool = True):
        super().__init__(constraint)
        self.zeta = zeta
        if validate:
            zeta.validate(constraint, self._roots())

    def _roots(self) -> Iterable[Suballocation]:
        return (Suballocation(),)

    def assign(self, profile: Profile) -> Allocation:
        self._check_profile(profile)
        return self._complete(profile, Suballocation())

    def _complete(self, profile: Profile, mu: Suballocation) -> Allocation:
        c = self.constraint
        while len(mu) < c.n:
            agent = self.zeta.next(mu)
            options = c.options(agent, mu)
            if not options:
                raise DefectError(f"no feasible extension of {mu}")
            mu = mu.extend(agent, profile[agent].best(options))
        return tuple(x for _, x in mu.pairs)

    def tabulate_rows(self, prefs: np.ndarray) -> np.ndarray:
        out = np.full(len(prefs), -1, dtype=np.int64)
        feasible = np.arange(len(self.constraint), dtype=np.int64)
        self._walk(prefs, np.arange(len(prefs)), feasible, Suballocation(), out)
        return out

    def _walk(
        self,
        prefs: np.ndarray,
        rows: np.ndarray,
        feasible: np.ndarray,
        mu: Suballocation,
        out: np.ndarray,
    ) -> None:
        # feasible: positions in constraint.allocations agreeing with mu
        c = self.constraint
        if feasible.size == 1:
            out[rows] = c.indices[feasible[0]]
            return
        agent = self.zeta.next(mu)
        column = c.allocations[feasible, agent]
        options = np.unique(column)
        if options.size == 1:
            chosen = np.full(rows.size, options[0])
        else:
            ranks = preference_space(c.m).ranks[prefs[rows, agent]][:, options]
            chosen = options[np.argmin(ranks, axis=1)]
        for x in options.tolist():
            selected = rows[chosen == x]
            if selected.size:
                self._walk(prefs, selected, feasible[column == x], mu.extend(agent, x), out)


class SerialDictatorship(Gsd):
    """Agents choose in a fixed order among objects that keep feasibility."""

    kind = "serial_dictatorship"

    def __init__(self, constraint: Constraint, order: Sequence[AgentId]):
        order = tuple(int(a) for a in order)
        if sorted(order) != list(range(constraint.n)):
            raise ArgumentError(f"{order} is not a permutation of {constraint.n} agents")
        self.order = order
        super().__init__(constraint, GsdOrdering(order), validate=False)


class Extend(Gsd):
    """Allocate to `agents` with a sub-mechanism, then continue as a GSD.

    Args:
        sub: Mechanism over the projection of `constraint` on `agents`.
        agents: The agents the sub-mechanism serves, ascending.
        constraint: The full constraint.
        zeta: Ordering over the remaining agents.
    """

    kind = "extend"

    def __init__(
        self,
        sub: Mechanism,
        agents: Iterable[AgentId],
        constraint: Constraint,
        zeta: GsdOrdering,
        validate: bool = True,
    ):
        self.agents = tuple(sorted(set(int(a) for a in agents)))
        if not self.agents or self.agents[0] < 0 or self.agents[-1] >= constraint.n:
            raise ArgumentError(f"agents {self.agents} are not a nonempty subset of [0, {constraint.n})")
        if sub.constraint != project(constraint, self.agents):
            raise ArgumentError(f"sub-mechanism must map into the projection on agents {self.agents}")
        self.sub = sub
        super().__init__(constraint, zeta, validate)

    def _roots(self) -> Iterable[Suballocation]:
        return [Suballocation(tuple(zip(self.agents, a))) for a in self.sub.constraint]

    @cached_property
    def sub_table(self) -> TabulatedMechanism:
        return tabulate(self.sub)

    def assign(self, profile: Profile) -> Allocation:
        self._check_profile(profile)
        head = self.sub.assign(profile.restrict(self.agents))
        mu0 = Suballocation(tuple(zip(self.agents, head)))
        if not self.constraint.extension_mask(mu0).any():
            raise DefectError(f"sub-mechanism chose {mu0}, which has no feasible extension")
        return self._complete(profile, mu0)

    def tabulate_rows(self, prefs: np.ndarray) -> np.ndarray:
        c = self.constraint
        heads = self.sub_table.tabulate_rows(prefs[:, list(self.agents)])
        out = np.full(len(prefs), -1, dtype=np.int64)
        for value in np.unique(heads).tolist():
            rows = np.flatnonzero(heads == value)
            mu0 = Suballocation(tuple(zip(self.agents, self.sub.constraint.allocation_at(value))))
            feasible = np.flatnonzero(c.extension_mask(mu0))
            if feasible.size == 0:
                raise DefectError(f"sub-mechanism chose {mu0}, which has no feasible extension")
            self._walk(prefs, rows, feasible, mu0, out)
        return out


def serial_dictatorship(c: Constraint, order: Sequence[AgentId]) -> SerialDictatorship:
    return SerialDictatorship(c, order)


def gsd(c: Constraint, zeta: GsdOrdering) -> Gsd:
    return Gsd(c, zeta)


def extend(
    f_m: Mechanism, m_agents: Iterable[AgentId], c: Constraint, zeta: GsdOrdering
) -> Extend:
    return Extend(f_m, m_agents, c, zeta)


class LocalDictatorship(Mechanism):
    """Two-agent mechanism with one dictator per block of infeasible cells.

    Each agent's effective top is her best object that she can ever receive.
    A feasible pair of effective tops is returned as is; otherwise the pair
    lies in some block, whose dictator keeps her top while the other agent
    takes her best object compatible with it.
    """

    kind = "local_dictatorship"

    def __init__(
        self,
        constraint: Constraint,
        dictators: Mapping[int, AgentId],
        decomposition: BlockDecomposition | None = None,
    ):
        if constraint.n != 2:
            raise ArgumentError(f"local dictatorships need two agents, got n={constraint.n}")
        super().__init__(constraint)
        d = decomposition or decompose(constraint)
        if d.constraint != constraint:
            raise ArgumentError("decomposition belongs to a different constraint")
        missing = [b.label for k, b in enumerate(d.blocks) if k not in dictators]
        if missing:
            raise ArgumentError(f"no dictator assigned to blocks {missing}")
        unknown = sorted(set(dictators) - set(range(len(d.blocks))))
        if unknown:
            raise ArgumentError(f"dictators given for unknown blocks {unknown}")
        if any(agent not in (0, 1) for agent in dictators.values()):
            raise ArgumentError(f"dictators must be agent 0 or 1, got {dict(dictators)}")
        self.decomposition = d
        self.dictators = {k: int(dictators[k]) for k in range(len(d.blocks))}

    @cached_property
    def _lookup(self) -> tuple[np.ndarray, ...]:
        c = self.constraint
        m = c.m
        ranks = preference_space(m).ranks
        grid = c.grid
        dictator_grid = np.full((m, m), -1, dtype=np.int64)
        for k, block in enumerate(self.decomposition.blocks):
            for x, y in block.cells:
                dictator_grid[x, y] = self.dictators[k]

        def best_of(candidates: np.ndarray) -> np.ndarray:
            return candidates[np.argmin(ranks[:, candidates], axis=1)]

        tops = [
            best_of(np.array([x for x in range(m) if x not in excluded]))
            for excluded in (self.decomposition.r1, self.decomposition.r2)
        ]
        # reply[i][k, z]: agent i's best object under preference k given the other holds z
        reply = [np.full((ranks.shape[0], m), -1, dtype=np.int64) for _ in range(2)]
        for z in range(m):
            rows_for_col = np.flatnonzero(grid[:, z])
            if rows_for_col.size:
                reply[0][:, z] = best_of(rows_for_col)
            cols_for_row = np.flatnonzero(grid[z, :])
            if cols_for_row.size:
                reply[1][:, z] = best_of(cols_for_row)
        return tops[0], tops[1], reply[0], reply[1], dictator_grid

    def tabulate_rows(self, prefs: np.ndarray) -> np.ndarray:
        top0, top1, reply0, reply1, dictator_grid = self._lookup
        p0 = prefs[:, 0]
        p1 = prefs[:, 1]
        a = top0[p0]
        b = top1[p1]
        feasible = self.constraint.grid[a, b]
        dictator = dictator_grid[a, b]
        first = np.where(feasible | (dictator == 0), a, reply0[p0, b])
        second = np.where(feasible | (dictator == 1), b, reply1[p1, a])
        return first * self.m + second

    def assign(self, profile: Profile) -> Allocation:
        self._check_profile(profile)
        space = preference_space(self.m)
        row = np.array([[space.index_of(p) for p in profile]], dtype=np.int64)
        return self.constraint.allocation_at(int(self.tabulate_rows(row)[0]))


def local_dictatorship(
    c: Constraint, d: BlockDecomposition, dictators: Mapping[int, AgentId]
) -> LocalDictatorship:
    return LocalDictatorship(c, dictators, d)


class CompromiserAssignment:
    """Local compromisers of infeasible allocations.

    Args:
        entries: Compromising agents per allocation.
        default: Compromiser of every infeasible allocation missing from `entries`.
    """

    def __init__(
        self,
        entries: Mapping[Sequence[ObjectId], Iterable[AgentId]] | None = None,
        default: AgentId | None = None,
    ):
        self.entries: dict[Allocation, frozenset[AgentId]] = {
            tuple(int(x) for x in a): frozenset(int(i) for i in agents)
            for a, agents in (entries or {}).items()
        }
        self.default = default

    def of(self, c: Constraint, allocation: Allocation) -> frozenset[AgentId]:
        if allocation in self.entries:
            return self.entries[allocation]
        if self.default is not None and allocation not in c:
            return frozenset({self.default})
        return frozenset()


def validate_compromisers(c: Constraint, alpha: CompromiserAssignment) -> None:
    """
    Check that (c, alpha) define a constraint-traversing mechanism.

    The constraint must be single-compromising; every infeasible allocation
    needs exactly one compromiser and every feasible one none; and a
    compromiser must stay the compromiser while only she moves through
    infeasible allocations.

    Raises:
        ValidationError: Naming the first violating allocation and agent.
    """
    if not is_single_compromising(c):
        raise ValidationError("constraint is not single-compromising")
    for a, agents in alpha.entries.items():
        if len(a) != c.n or any(not 0 <= x < c.m for x in a):
            raise ValidationError(f"compromiser entry for malformed allocation {a}", allocation=a)
        if any(not 0 <= i < c.n for i in agents):
            raise ValidationError(f"compromiser outside [0, {c.n}) at {a}", allocation=a)
        if a in c and agents:
            raise ValidationError(f"feasible allocation {a} has compromisers", allocation=a)
    if alpha.default is not None and not 0 <= alpha.default < c.n:
        raise ValidationError(f"default compromiser {alpha.default} outside [0, {c.n})", agent=alpha.default)

    for index in np.flatnonzero(~c.mask).tolist():
        a = c.allocation_at(index)
        agents = alpha.of(c, a)
        if not agents:
            raise ValidationError(f"infeasible allocation {a} has no compromiser", allocation=a)
        if len(agents) > 1:
            raise ValidationError(
                f"infeasible allocation {a} has {len(agents)} compromisers", allocation=a
            )
        (agent,) = agents
        for x in range(c.m):
            moved = a[:agent] + (x,) + a[agent + 1 :]
            if moved in c:
                continue
            if alpha.of(c, moved) != agents:
                raise ValidationError(
                    f"agent {agent} compromises at {a} but not at {moved}",
                    allocation=moved,
                    agent=agent,
                )


class ConstraintTraversing(Mechanism):
    """Start from everyone's top and demote local compromisers until feasible."""

    kind = "constraint_traversing"

    def __init__(self, constraint: Constraint, alpha: CompromiserAssignment, validate: bool = True):
        super().__init__(constraint)
        if validate:
            validate_compromisers(constraint, alpha)
        self.alpha = alpha

    def assign(self, profile: Profile) -> Allocation:
        self._check_profile(profile)
        c = self.constraint
        positions = [0] * c.n
        current = list(profile.top(1))
        while tuple(current) not in c:
            agents = self.alpha.of(c, tuple(current))
            if len(agents) != 1:
                raise DefectError(f"{len(agents)} compromisers at {tuple(current)}")
            (agent,) = agents
            positions[agent] += 1
            if positions[agent] >= c.m:
                raise DefectError(f"agent {agent} exhausted her preference list")
            current[agent] = profile[agent].order[positions[agent]]
        return tuple(current)


def constraint_traversing(c: Constraint, alpha: CompromiserAssignment) -> ConstraintTraversing:
    return ConstraintTraversing(c, alpha)


class DirectSum(Mechanism):
    """Run `first` on the leading agents and `second` on the rest."""

    kind = "direct_sum"

    def __init__(self, first: Mechanism, second: Mechanism):
        if first.m != second.m:
            raise ArgumentError(f"object sets differ: {first.m} vs {second.m}")
        super().__init__(product_constraint(first.constraint, second.constraint))
        self.first = first
        self.second = second

    def assign(self, profile: Profile) -> Allocation:
        self._check_profile(profile)
        split = self.first.n
        return self.first.assign(Profile(profile[:split])) + self.second.assign(
            Profile(profile[split:])
        )

    def tabulate_rows(self, prefs: np.ndarray) -> np.ndarray:
        split = self.first.n
        head = tabulate(self.first).tabulate_rows(prefs[:, :split])
        tail = tabulate(self.second).tabulate_rows(prefs[:, split:])
        return head * self.m**self.second.n + tail


def direct_sum(f: Mechanism, g: Mechanism) -> DirectSum:
    return DirectSum(f, g)


class ParameterizedDirectSum(Mechanism):
    """Direct sum whose two parts are chosen by the other group's preferences.

    Args:
        constraint: Constraint over all agents.
        n_first: Size of the leading group.
        first_of: Maps the trailing group's profile to a mechanism on the leading group.
        second_of: Maps the leading group's profile to a mechanism on the trailing group.
    """

    kind = "parameterized_direct_sum"

    def __init__(
        self,
        constraint: Constraint,
        n_first: int,
        first_of: Callable[[Profile], Mechanism],
        second_of: Callable[[Profile], Mechanism],
    ):
        if not 0 < n_first < constraint.n:
            raise ArgumentError(f"leading group size {n_first} outside (0, {constraint.n})")
        super().__init__(constraint)
        self.n_first = n_first
        self.first_of = first_of
        self.second_of = second_of

    def assign(self, profile: Profile) -> Allocation:
        self._check_profile(profile)
        head = Profile(profile[: self.n_first])
        tail = Profile(profile[self.n_first :])
        return self.first_of(tail).assign(head) + self.second_of(head).assign(tail)


class PermutedMechanism(Mechanism):
    """The mechanism `f` with agent k of the result playing agent perm[k] of `f`."""

    kind = "permuted"

    def __init__(self, f: Mechanism, perm: Sequence[AgentId]):
        perm = tuple(int(a) for a in perm)
        if sorted(perm) != list(range(f.n)):
            raise ArgumentError(f"{perm} is not a permutation of {f.n} agents")
        super().__init__(relabel_agents(f.constraint, perm))
        self.f = f
        self.perm = perm

    def assign(self, profile: Profile) -> Allocation:
        self._check_profile(profile)
        original = merge_profiles({self.perm[k]: profile[k] for k in range(self.n)}, self.n)
        a = self.f.assign(original)
        return tuple(a[self.perm[k]] for k in range(self.n))

    def tabulate_rows(self, prefs: np.ndarray) -> np.ndarray:
        original = np.empty_like(prefs)
        original[:, list(self.perm)] = prefs
        old = tabulate(self.f).tabulate_rows(original)
        return self._reindex[old]

    @cached_property
    def _reindex(self) -> np.ndarray:
        cells = self.m**self.n
        moved = np.arange(cells).reshape((self.m,) * self.n).transpose(self.perm).reshape(-1)
        reindex = np.empty(cells, dtype=np.int64)
        reindex[moved] = np.arange(cells)
        return reindex


def permute_agents(f: Mechanism, perm: Sequence[AgentId]) -> PermutedMechanism:
    return PermutedMechanism(f, perm)


def _fixed_preferences(
    n: int, agents: Sequence[AgentId], fixed: Mapping[AgentId, Preference] | Sequence[Preference]
) -> dict[AgentId, Preference]:
    complement = [a for a in range(n) if a not in agents]
    if isinstance(fixed, Mapping):
        prefs = {int(a): p for a, p in fixed.items()}
    else:
        fixed = list(fixed)
        if len(fixed) != len(complement):
            raise ArgumentError(f"{len(fixed)} fixed preferences for {len(complement)} agents")
        prefs = dict(zip(complement, fixed))
    if sorted(prefs) != complement:
        raise ArgumentError(f"fixed preferences must cover agents {complement}, got {sorted(prefs)}")
    return {a: p if isinstance(p, Preference) else Preference(tuple(p)) for a, p in prefs.items()}


class Marginal(Mechanism):
    """The mechanism induced on `agents` with everyone else's preferences held fixed."""

    kind = "marginal"

    def __init__(
        self,
        f: Mechanism,
        agents: Iterable[AgentId],
        fixed: Mapping[AgentId, Preference] | Sequence[Preference],
    ):
        self.agents = tuple(sorted(set(int(a) for a in agents)))
        if not self.agents or len(self.agents) >= f.n:
            raise ArgumentError(f"agents {self.agents} must be a proper nonempty subset of [0, {f.n})")
        if self.agents[0] < 0 or self.agents[-1] >= f.n:
            raise ArgumentError(f"agents {self.agents} outside [0, {f.n})")
        super().__init__(project(f.constraint, self.agents))
        self.f = f
        self.fixed = _fixed_preferences(f.n, self.agents, fixed)

    def assign(self, profile: Profile) -> Allocation:
        self._check_profile(profile)
        parts = dict(self.fixed)
        parts.update(zip(self.agents, profile))
        a = self.f.assign(merge_profiles(parts, self.f.n))
        return tuple(a[i] for i in self.agents)

    def tabulate_rows(self, prefs: np.ndarray) -> np.ndarray:
        space = preference_space(self.m)
        full = np.empty((len(prefs), self.f.n), dtype=np.int64)
        full[:, list(self.agents)] = prefs
        for agent, pref in self.fixed.items():
            full[:, agent] = space.index_of(pref)
        outcomes = tabulate(self.f).tabulate_rows(full)
        digits = (outcomes[:, None] // self.f.constraint.radix[None, :]) % self.m
        return digits[:, list(self.agents)] @ self.constraint.radix


def marginal(
    f: Mechanism,
    m_agents: Iterable[AgentId],
    fixed: Mapping[AgentId, Preference] | Sequence[Preference],
) -> Marginal:
    return Marginal(f, m_agents, fixed)


def option_set(
    f: Mechanism,
    m_agents: Iterable[AgentId],
    fixed: Mapping[AgentId, Preference] | Sequence[Preference],
) -> frozenset[Suballocation]:
    """The suballocations `m_agents` can jointly induce with the others held fixed."""
    g = Marginal(f, m_agents, fixed)
    image = tabulate(g).image()
    return frozenset(
        Suballocation(tuple(zip(g.agents, g.constraint.allocation_at(int(k))))) for k in image
    )


def option_correspondence(
    f: Mechanism,
    i: AgentId,
    fixed: Mapping[AgentId, Preference] | Sequence[Preference],
) -> frozenset[ObjectId]:
    """Objects agent `i` can obtain by varying only her own report."""
    if not 0 <= i < f.n:
        raise ArgumentError(f"agent {i} outside [0, {f.n})")
    if f.n == 1:
        return frozenset(int(x) for x in tabulate(f).image())
    return frozenset(s.assignment[i] for s in option_set(f, [i], fixed))


def direct_sum_form(
    f: Mechanism, pair: tuple[AgentId, AgentId]
) -> tuple[PermutedMechanism, Callable[[Profile], TabulatedMechanism], Callable[[Profile], TabulatedMechanism]]:
    """
    Split `f` around a pair of agents.

    The pair is moved to the last two positions. `sigma` maps the other
    agents' profile to the pair's marginal mechanism and `rho` maps the
    pair's profile to the others' marginal mechanism.

    Returns:
        tuple: (the permuted mechanism, sigma, rho).
    """
    i, j = (int(a) for a in pair)
    if i == j or not (0 <= i < f.n and 0 <= j < f.n):
        raise ArgumentError(f"{pair} is not a pair of distinct agents of [0, {f.n})")
    if f.n < 3:
        raise ArgumentError("direct-sum form needs at least three agents")
    others = [a for a in range(f.n) if a not in (i, j)]
    g = PermutedMechanism(tabulate(f), others + [i, j])
    g_table = tabulate(g)
    split = len(others)
    pair_agents = list(range(split, f.n))

    @lru_cache(maxsize=None)
    def sigma(rest: Profile) -> TabulatedMechanism:
        return tabulate(Marginal(g_table, pair_agents, list(rest)))

    @lru_cache(maxsize=None)
    def rho(duo: Profile) -> TabulatedMechanism:
        return tabulate(Marginal(g_table, list(range(split)), list(duo)))

    return g, sigma, rho
