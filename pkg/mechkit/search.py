"""
Exhaustive enumeration of mechanisms satisfying a set of axioms.

The search treats every profile as a variable whose domain is the set of
feasible allocations (a bitmask over the constraint's allocations). Pareto
efficiency removes dominated allocations up front; strategy-proofness and,
for group strategy-proofness, nonbossiness are binary constraints between
profiles that differ in a single agent's preference. Backtracking maintains
arc consistency and picks the variable with the smallest domain next.
"""

import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Iterator

import numpy as np

from mechkit.axioms import (
    Axiom,
    canonical_preferences,
    check_gsp_naive,
    check_pe,
    check_pe_on_image,
    check_sp,
    check_surjective,
)
from mechkit.blocks import decompose
from mechkit.config import (
    DEFAULT_CONSTRAINT_LIMIT,
    get_node_budget,
    get_profile_limit,
    get_seconds_budget,
)
from mechkit.constraint import Constraint, Suballocation, always_infeasible, orbit_representatives
from mechkit.exceptions import ArgumentError, ResourceError, SearchIncompleteError
from mechkit.logger import log
from mechkit.mechanisms import Gsd, GsdOrdering, LocalDictatorship, TabulatedMechanism, tabulate
from mechkit.preferences import preference_space
from metrics import SEARCH_NODES

SEARCH_AXIOMS = frozenset({Axiom.SP, Axiom.GSP, Axiom.PE, Axiom.PE_ON_IMAGE, Axiom.SURJECTIVE})

# Pure enumeration refuses more candidate tables than this
BRUTE_FORCE_LIMIT = 10**8

DEFAULT_TREE_LIMIT = 100_000


@dataclass(frozen=True)
class SearchSpec:
    """What to search for and how much effort to spend.

    Attributes:
        constraint: Feasible set of the mechanisms.
        axioms: Required axioms, a nonempty subset of SEARCH_AXIOMS.
        node_budget: Maximal number of backtracking assignments.
        seconds_budget: Maximal wall time.
        profile_limit: Maximal number of search variables.
    """

    constraint: Constraint
    axioms: frozenset[Axiom]
    node_budget: int = field(default_factory=get_node_budget)
    seconds_budget: float = field(default_factory=get_seconds_budget)
    profile_limit: int = field(default_factory=get_profile_limit)

    def __post_init__(self) -> None:
        axioms = frozenset(Axiom(a) for a in self.axioms)
        if not axioms:
            raise ArgumentError("select at least one axiom to search for")
        unsupported = axioms - SEARCH_AXIOMS
        if unsupported:
            raise ArgumentError(
                f"search supports {sorted(SEARCH_AXIOMS)}, not {sorted(unsupported)}"
            )
        if self.node_budget <= 0 or self.seconds_budget <= 0 or self.profile_limit <= 0:
            raise ArgumentError("search budgets must be positive")
        object.__setattr__(self, "axioms", axioms)


class MechanismSet:
    """Duplicate-free, canonically sorted collection of tabulated mechanisms.

    Attributes:
        complete: False when the producing search ran out of budget.
    """

    def __init__(
        self,
        constraint: Constraint,
        mechanisms: Iterable[TabulatedMechanism] = (),
        complete: bool = True,
    ):
        self.constraint = constraint
        self.complete = complete
        unique: dict[bytes, TabulatedMechanism] = {}
        for mech in mechanisms:
            if mech.constraint != constraint:
                raise ArgumentError("mechanism belongs to a different constraint")
            unique.setdefault(mech.key(), mech)
        self._members = sorted(unique.values(), key=lambda t: tuple(t.flat.tolist()))
        self._keys = frozenset(unique)

    def __len__(self) -> int:
        return len(self._members)

    def __iter__(self) -> Iterator[TabulatedMechanism]:
        return iter(self._members)

    def __getitem__(self, index: int) -> TabulatedMechanism:
        return self._members[index]

    def __contains__(self, mech: object) -> bool:
        return isinstance(mech, TabulatedMechanism) and mech.key() in self._keys

    def keys(self) -> frozenset[bytes]:
        return self._keys

    def __repr__(self) -> str:
        state = "" if self.complete else ", incomplete"
        return f"MechanismSet({len(self)} mechanisms{state})"


@dataclass(frozen=True)
class SetComparison:
    """Result of `set_equal`; truthy iff both sides hold the same tables."""

    only_left: tuple[TabulatedMechanism, ...]
    only_right: tuple[TabulatedMechanism, ...]

    @property
    def equal(self) -> bool:
        return not self.only_left and not self.only_right

    def __bool__(self) -> bool:
        return self.equal


def set_equal(a: MechanismSet, b: MechanismSet) -> SetComparison:
    """Compare two sets of tables and report their symmetric difference."""
    if a.constraint != b.constraint:
        raise ArgumentError("mechanism sets over different constraints")
    return SetComparison(
        tuple(t for t in a if t.key() not in b.keys()),
        tuple(t for t in b if t.key() not in a.keys()),
    )


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


class _Search:
    """Backtracking state of one search."""

    def __init__(self, spec: SearchSpec):
        self.spec = spec
        c = spec.constraint
        self.c = c
        self.space = preference_space(c.m)
        self.gsp = Axiom.GSP in spec.axioms
        self.k = len(c)
        if self.k > DEFAULT_CONSTRAINT_LIMIT:
            raise ResourceError("search over a large feasible set", self.k, DEFAULT_CONSTRAINT_LIMIT)

        # Efficient group strategy-proof mechanisms ignore how always-infeasible
        # objects are ranked, so those rankings collapse to one representative.
        reduce = {Axiom.GSP, Axiom.PE} <= spec.axioms and any(
            always_infeasible(c, i) for i in range(c.n)
        )
        self.canon = [
            canonical_preferences(c, i) if reduce else np.arange(self.space.size)
            for i in range(c.n)
        ]
        self.reps = [np.unique(canon) for canon in self.canon]
        self.shape = tuple(len(r) for r in self.reps)
        self.V = int(np.prod(self.shape))
        if self.V > spec.profile_limit:
            raise ResourceError(f"search over {self.V} profiles", self.V, spec.profile_limit)
        if reduce:
            log.info("Ranking always-infeasible objects last: %d profiles to search", self.V)

        positions = np.indices(self.shape).reshape(c.n, -1).T
        self.prefs = np.stack([self.reps[i][positions[:, i]] for i in range(c.n)], axis=1)
        self.neighbours = self._neighbours(positions)
        self.initial = self._initial_domains()
        self._support_cache: dict[tuple[int, int, int], list[int]] = {}
        self._supported_cache: dict[tuple[int, int, int, int], int] = {}
        self.nodes = 0
        self.started = time.monotonic()
        self.found: list[TabulatedMechanism] = []

    def _neighbours(self, positions: np.ndarray) -> list[list[tuple[int, int]]]:
        radix = [int(np.prod(self.shape[i + 1 :])) for i in range(self.c.n)]
        neighbours = []
        for v, pos in enumerate(positions.tolist()):
            row = []
            for i in range(self.c.n):
                for r in range(self.shape[i]):
                    if r != pos[i]:
                        row.append((v + (r - pos[i]) * radix[i], i))
            neighbours.append(row)
        return neighbours

    def _initial_domains(self) -> list[int]:
        full = (1 << self.k) - 1
        if Axiom.PE not in self.spec.axioms:
            return [full] * self.V
        A = self.c.allocations
        ranks = self.space.ranks[self.prefs]  # (V, n, m)
        held = ranks[:, np.arange(self.c.n)[None, :], A]  # (V, k, n)
        weakly = np.all(held[:, :, None, :] <= held[:, None, :, :], axis=3)  # [v, b, a]
        diagonal = np.arange(self.k)
        weakly[:, diagonal, diagonal] = False
        dominated = weakly.any(axis=1)  # (V, a)
        domains = []
        for row in (~dominated).tolist():
            domains.append(sum(1 << a for a, ok in enumerate(row) if ok))
        return domains

    def _support_masks(self, i: int, p: int, q: int) -> list[int]:
        """For agent i moving from p to q: compatible allocations at q per allocation at p."""
        key = (i, p, q)
        masks = self._support_cache.get(key)
        if masks is None:
            A = self.c.allocations
            own = A[:, i]
            rp = self.space.ranks[p][own]
            rq = self.space.ranks[q][own]
            same = own[:, None] == own[None, :]
            swap = (rp[:, None] < rp[None, :]) & (rq[None, :] < rq[:, None])
            if self.gsp:
                identical = np.arange(self.k)[:, None] == np.arange(self.k)[None, :]
                compatible = (same & identical) | swap
            else:
                compatible = same | swap
            masks = [sum(1 << b for b in np.flatnonzero(row).tolist()) for row in compatible]
            self._support_cache[key] = masks
        return masks

    def _supported(self, v: int, w: int, i: int, dw: int) -> int:
        p = int(self.prefs[v, i])
        q = int(self.prefs[w, i])
        key = (i, p, q, dw)
        mask = self._supported_cache.get(key)
        if mask is None:
            masks = self._support_masks(i, p, q)
            mask = sum(1 << a for a in range(self.k) if masks[a] & dw)
            self._supported_cache[key] = mask
        return mask

    def _propagate(self, domains: list[int], queue: deque[int]) -> bool:
        pending = set(queue)
        while queue:
            w = queue.popleft()
            pending.discard(w)
            dw = domains[w]
            for v, i in self.neighbours[w]:
                dv = domains[v]
                revised = dv & self._supported(v, w, i, dw)
                if revised != dv:
                    if not revised:
                        return False
                    domains[v] = revised
                    if v not in pending:
                        pending.add(v)
                        queue.append(v)
        return True

    def _check_budget(self) -> None:
        if self.nodes > self.spec.node_budget:
            raise SearchIncompleteError(
                "search node budget exhausted", self.nodes, self.spec.node_budget, self._partial()
            )
        if self.nodes % 1024 == 0:
            elapsed = time.monotonic() - self.started
            if elapsed > self.spec.seconds_budget:
                raise SearchIncompleteError(
                    "search time budget exhausted", round(elapsed, 1), self.spec.seconds_budget, self._partial()
                )

    def _partial(self) -> MechanismSet:
        return MechanismSet(self.c, self.found, complete=False)

    def _expand(self, domains: list[int]) -> TabulatedMechanism:
        reduced = np.array([self.c.indices[d.bit_length() - 1] for d in domains], dtype=np.int64)
        reduced = reduced.reshape(self.shape)
        lookup = [np.searchsorted(self.reps[i], self.canon[i]) for i in range(self.c.n)]
        return TabulatedMechanism(self.c, reduced[np.ix_(*lookup)], source="search")

    def _accept(self, mech: TabulatedMechanism) -> bool:
        if Axiom.SURJECTIVE in self.spec.axioms and not check_surjective(mech):
            return False
        if Axiom.PE_ON_IMAGE in self.spec.axioms and not check_pe_on_image(mech):
            return False
        return True

    def run(self) -> MechanismSet:
        domains = list(self.initial)
        if any(d == 0 for d in domains):
            return MechanismSet(self.c)
        if self._propagate(domains, deque(range(self.V))):
            self._backtrack(domains)
        return MechanismSet(self.c, self.found)

    def _backtrack(self, domains: list[int]) -> None:
        best_v = -1
        best_size = self.k + 1
        for v, d in enumerate(domains):
            size = d.bit_count()
            if 1 < size < best_size:
                best_v, best_size = v, size
                if size == 2:
                    break
        if best_v < 0:
            mech = self._expand(domains)
            if self._accept(mech):
                self.found.append(mech)
            return
        for a in _bits(domains[best_v]):
            self.nodes += 1
            self._check_budget()
            trial = list(domains)
            trial[best_v] = 1 << a
            if self._propagate(trial, deque([best_v])):
                self._backtrack(trial)


def search(spec: SearchSpec) -> MechanismSet:
    """
    Find every mechanism on `spec.constraint` satisfying `spec.axioms`.

    Profiles are branched smallest-domain-first, ties to the lowest index,
    so the nodes charged against `spec.node_budget` follow that order and
    not the profile order.

    Returns:
        MechanismSet: All satisfying tables, sorted and duplicate-free.

    Raises:
        ResourceError: If the instance exceeds the profile or feasible-set limits.
        SearchIncompleteError: If a budget runs out; carries the partial set.
    """
    log.info(
        "Searching %s for %s", spec.constraint, ", ".join(sorted(a.value for a in spec.axioms))
    )
    state = _Search(spec)
    try:
        result = state.run()
    finally:
        SEARCH_NODES.inc(state.nodes)
    log.info("Found %d mechanisms after %d nodes", len(result), state.nodes)
    return result


def brute_force(spec: SearchSpec) -> MechanismSet:
    """
    Enumerate every table and keep those passing the checkers.

    No propagation or reduction is applied; the result is the reference
    `search` is compared against on tiny instances.
    """
    c = spec.constraint
    profiles = preference_space(c.m).profile_count(c.n)
    candidates = len(c) ** profiles
    if candidates > BRUTE_FORCE_LIMIT:
        raise ResourceError("brute-force enumeration", candidates, BRUTE_FORCE_LIMIT)
    checkers = {
        Axiom.SP: check_sp,
        Axiom.GSP: check_gsp_naive,
        Axiom.PE: check_pe,
        Axiom.PE_ON_IMAGE: check_pe_on_image,
        Axiom.SURJECTIVE: check_surjective,
    }
    selected = [checkers[a] for a in sorted(spec.axioms)]
    found = []
    for entries in product(c.indices.tolist(), repeat=profiles):
        mech = TabulatedMechanism(c, np.array(entries), source="brute_force")
        if all(check(mech) for check in selected):
            found.append(mech)
    log.info("Brute force kept %d of %d tables", len(found), candidates)
    return MechanismSet(c, found)


def enumerate_local_dictatorships(c: Constraint) -> MechanismSet:
    """Tabulate the local dictatorship of every dictator choice over the blocks."""
    if c.n != 2:
        raise ArgumentError(f"local dictatorships need two agents, got n={c.n}")
    d = decompose(c)
    tables = [
        tabulate(LocalDictatorship(c, dict(enumerate(choice)), d))
        for choice in product((0, 1), repeat=len(d.blocks))
    ]
    log.info("Enumerated %d local dictatorships over %d blocks", len(tables), len(d.blocks))
    return MechanismSet(c, tables)


def _count_trees(c: Constraint, mu: Suballocation, limit: int) -> int:
    selector = c.extension_mask(mu)
    if selector.sum() <= 1 or len(mu) >= c.n - 1:
        return 1
    total = 0
    for agent in range(c.n):
        if agent in mu.domain:
            continue
        count = 1
        for x in np.unique(c.allocations[selector, agent]).tolist():
            count *= _count_trees(c, mu.extend(agent, x), limit)
            if count > limit:
                return limit + 1
        total += count
        if total > limit:
            return limit + 1
    return total


def _trees(c: Constraint, mu: Suballocation) -> Iterator[dict[str, int]]:
    """Every choice of next dictator on the suballocations reachable from `mu`."""
    selector = c.extension_mask(mu)
    if selector.sum() <= 1 or len(mu) >= c.n - 1:
        yield {}
        return
    for agent in range(c.n):
        if agent in mu.domain:
            continue
        options = np.unique(c.allocations[selector, agent]).tolist()
        subtrees = [list(_trees(c, mu.extend(agent, x))) for x in options]
        for combo in product(*subtrees):
            overrides = {mu.key(): agent}
            for sub in combo:
                overrides.update(sub)
            yield overrides


def enumerate_gsd(c: Constraint, limit: int = DEFAULT_TREE_LIMIT) -> MechanismSet:
    """
    Tabulate every generalized serial dictatorship on `c`.

    Only decisions on reachable suballocations matter; decisions where at most
    one feasible completion or one unassigned agent remains are forced.

    Raises:
        ResourceError: If there are more than `limit` decision trees.
    """
    count = _count_trees(c, Suballocation(), limit)
    if count > limit:
        raise ResourceError("enumerating dictator orderings", count, limit)
    default = tuple(range(c.n))
    tables = [
        tabulate(Gsd(c, GsdOrdering(default, overrides), validate=False))
        for overrides in _trees(c, Suballocation())
    ]
    result = MechanismSet(c, tables)
    log.info("Enumerated %d orderings, %d distinct tables", count, len(result))
    return result


@dataclass(frozen=True)
class SweepResult:
    constraint: Constraint
    searched: int
    local_dictatorships: int
    equal: bool


def _sweep_one(c: Constraint, node_budget: int, seconds_budget: float) -> SweepResult:
    spec = SearchSpec(c, frozenset({Axiom.SP, Axiom.PE}), node_budget, seconds_budget)
    found = search(spec)
    expected = enumerate_local_dictatorships(c)
    return SweepResult(c, len(found), len(expected), bool(set_equal(found, expected)))


def sweep_two_agent(
    m: int,
    threads: int = 1,
    node_budget: int | None = None,
    seconds_budget: float | None = None,
) -> list[SweepResult]:
    """
    Compare strategy-proof efficient mechanisms with local dictatorships on
    every two-agent constraint over `m` objects, one per relabeling orbit.
    """
    constraints = orbit_representatives(2, m)
    node_budget = node_budget or get_node_budget()
    seconds_budget = seconds_budget or get_seconds_budget()
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(
                pool.map(
                    _sweep_one,
                    constraints,
                    [node_budget] * len(constraints),
                    [seconds_budget] * len(constraints),
                )
            )
    else:
        results = [_sweep_one(c, node_budget, seconds_budget) for c in constraints]
    mismatches = sum(not r.equal for r in results)
    log.info("Swept %d constraints over %d objects, %d mismatches", len(results), m, mismatches)
    return results
