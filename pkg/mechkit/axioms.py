"""
Exhaustive axiom checks over tabulated mechanisms.

Every checker tabulates its mechanism, evaluates the axiom on all profiles
with numpy broadcasting (axis i of a table is agent i's preference index)
and returns a `CheckResult`. A failed result carries a `Witness` at the
smallest violating profile index, which can be replayed against the
mechanism.
"""

from dataclasses import dataclass
from enum import StrEnum
from functools import lru_cache, wraps
from itertools import combinations, product
from typing import Callable, Iterable, ParamSpec, Sequence

import numpy as np

from mechkit.config import get_coalition_budget
from mechkit.constraint import (
    AgentId,
    Allocation,
    Constraint,
    ConstraintKind,
    always_infeasible,
    builtin_constraint,
)
from mechkit.exceptions import ArgumentError, ResourceError
from mechkit.logger import log
from mechkit.mechanisms import (
    Mechanism,
    ParameterizedDirectSum,
    direct_sum_form,
    tabulate,
)
from mechkit.preferences import Profile, contour, preference_space
from metrics import CHECK_LATENCY


class Axiom(StrEnum):
    SP = "sp"
    GSP = "gsp"
    WEAK_GSP = "weak_gsp"
    PE = "pe"
    PE_ON_IMAGE = "pe_on_image"
    NONBOSSY = "nonbossy"
    MASKIN = "maskin"
    IRRELEVANT_OBJECTS = "irrelevant_objects"
    MUTUALLY_BEST = "mutually_best"
    SURJECTIVE = "surjective"


class Engine(StrEnum):
    NAIVE = "naive"
    FAST = "fast"


@dataclass(frozen=True)
class Witness:
    """A concrete violation of an axiom.

    Attributes:
        kind: The violated axiom.
        profile: The truthful profile, absent for image-level violations.
        coalition: Deviating or offended agents.
        misreport: The profile after the deviation or preference change.
        before: The mechanism's allocation at `profile`.
        after: The mechanism's allocation at `misreport`.
        alternative: A dominating or missing allocation.
    """

    kind: Axiom
    profile: Profile | None = None
    coalition: tuple[AgentId, ...] = ()
    misreport: Profile | None = None
    before: Allocation | None = None
    after: Allocation | None = None
    alternative: Allocation | None = None

    def replay(self, f: Mechanism) -> bool:
        """Re-evaluate `f` and confirm the reported violation."""
        if self.kind is Axiom.SURJECTIVE:
            image = {f.constraint.allocation_at(int(k)) for k in tabulate(f).image()}
            return self.alternative is not None and self.alternative not in image
        assert self.profile is not None
        before = f.assign(self.profile)
        if before != self.before:
            return False
        if self.kind in (Axiom.PE, Axiom.PE_ON_IMAGE):
            a = self.alternative
            return (
                a is not None
                and a in f.constraint
                and a != before
                and all(not p.prefers(x, a_i) for p, x, a_i in zip(self.profile, before, a))
            )
        if self.kind is Axiom.MUTUALLY_BEST:
            i, j = self.coalition
            return (
                self.profile[i].top() == j and self.profile[j].top() == i and before[i] != j
            )
        assert self.misreport is not None
        after = f.assign(self.misreport)
        if after != self.after:
            return False
        truth = self.profile
        if self.kind is Axiom.SP:
            (i,) = self.coalition
            return truth[i].prefers(after[i], before[i])
        if self.kind is Axiom.GSP:
            return all(not truth[i].prefers(before[i], after[i]) for i in self.coalition) and any(
                truth[i].prefers(after[i], before[i]) for i in self.coalition
            )
        if self.kind is Axiom.WEAK_GSP:
            return all(truth[i].prefers(after[i], before[i]) for i in self.coalition)
        if self.kind is Axiom.NONBOSSY:
            (i,) = self.coalition
            return after[i] == before[i] and after != before
        if self.kind is Axiom.MASKIN:
            return after != before and all(
                contour(new, x, "lower") >= contour(old, x, "lower")
                for old, new, x in zip(truth, self.misreport, before)
            )
        if self.kind is Axiom.IRRELEVANT_OBJECTS:
            c = f.constraint
            same_order = all(
                old.restricted(set(range(c.m)) - always_infeasible(c, i))
                == new.restricted(set(range(c.m)) - always_infeasible(c, i))
                for i, (old, new) in enumerate(zip(truth, self.misreport))
            )
            return same_order and after != before
        return False

    def describe(self, names: Sequence[str] | None = None) -> str:
        def show(a: Allocation | None) -> str:
            if a is None:
                return "-"
            return "(" + ", ".join(names[x] if names else str(x) for x in a) + ")"

        parts = [f"{self.kind} violated"]
        if self.profile is not None:
            parts.append(f"at profile [{_show_profile(self.profile, names)}]")
        if self.coalition:
            parts.append(f"by agents {list(self.coalition)}")
        if self.misreport is not None:
            parts.append(f"reporting [{_show_profile(self.misreport, names)}]")
        parts.append(f"allocation {show(self.before)}")
        if self.after is not None:
            parts.append(f"becomes {show(self.after)}")
        if self.alternative is not None:
            parts.append(f"alternative {show(self.alternative)}")
        return " ".join(parts)


def _show_profile(profile: Profile, names: Sequence[str] | None) -> str:
    if not names:
        return str(profile)
    return " | ".join(">".join(names[x] for x in p.order) for p in profile)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one axiom check; truthy iff the axiom holds."""

    axiom: Axiom
    witness: Witness | None = None

    @property
    def passed(self) -> bool:
        return self.witness is None

    def __bool__(self) -> bool:
        return self.passed


P = ParamSpec("P")


def timed(axiom: Axiom) -> Callable[[Callable[P, CheckResult]], Callable[P, CheckResult]]:
    """Record the checker's duration and log its verdict."""

    def decorator(func: Callable[P, CheckResult]) -> Callable[P, CheckResult]:
        @wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> CheckResult:
            with CHECK_LATENCY.labels(axiom=axiom.value).time():
                result = func(*args, **kwargs)
            log.debug("%s: %s", func.__name__, "pass" if result else "fail")
            return result

        return wrapper

    return decorator


class _Tables:
    """Array views of a tabulated mechanism shared by the checkers."""

    def __init__(self, f: Mechanism, budget: int | None = None):
        self.mech = tabulate(f, budget)
        self.c = self.mech.constraint
        self.n = self.c.n
        self.m = self.c.m
        self.space = preference_space(self.m)
        self.P = self.space.size
        self.T = self.mech.table
        self.O = self.mech.outcomes
        self.own_rank = np.stack([self.rank_of(i, self.O[i]) for i in range(self.n)])

    def along(self, i: int, values: np.ndarray) -> np.ndarray:
        """Reshape a length-P vector to broadcast along agent i's axis."""
        shape = [1] * self.n
        shape[i] = values.shape[0]
        return values.reshape(shape)

    def rank_of(self, i: int, objects: np.ndarray | int) -> np.ndarray:
        """Agent i's true rank of `objects` at every profile."""
        prefs = self.along(i, np.arange(self.P))
        return self.space.ranks[prefs, objects]

    def profile(self, index: int) -> Profile:
        return self.space.profile_at(index, self.n)

    def allocation(self, index: int) -> Allocation:
        return self.c.allocation_at(int(self.T.reshape(-1)[index]))

    def at(self, digits: Sequence[int]) -> Allocation:
        return self.c.allocation_at(int(self.T[tuple(digits)]))


def _first(mask: np.ndarray) -> int | None:
    hits = np.flatnonzero(mask.reshape(-1))
    return int(hits[0]) if hits.size else None


def _unilateral_witness(t: _Tables, kind: Axiom, violation: Callable[[int, int], np.ndarray]) -> Witness | None:
    best: tuple[int, int, int] | None = None
    for i in range(t.n):
        for q in range(t.P):
            hit = _first(violation(i, q))
            if hit is not None and (best is None or (hit, i, q) < best):
                best = (hit, i, q)
    if best is None:
        return None
    index, i, q = best
    profile = t.profile(index)
    misreport = profile.replace(i, t.space[q])
    return Witness(
        kind,
        profile,
        (i,),
        misreport,
        t.allocation(index),
        t.at(_digits_with(np.unravel_index(index, t.T.shape), {i: q})),
    )


def _digits_with(digits: Iterable, replaced: dict[int, int]) -> list[int]:
    out = [int(d) for d in digits]
    for i, q in replaced.items():
        out[i] = q
    return out


@timed(Axiom.SP)
def check_sp(f: Mechanism, budget: int | None = None) -> CheckResult:
    """
    Strategy-proofness: no agent gains by misreporting.

    Args:
        f: Mechanism to check.
        budget: Tabulation budget.

    Returns:
        CheckResult: Failing with the misreport that strictly improves the deviator.
    """
    t = _Tables(f, budget)

    def violation(i: int, q: int) -> np.ndarray:
        misreported = np.take(t.O[i], [q], axis=i)
        return t.rank_of(i, misreported) < t.own_rank[i]

    return CheckResult(Axiom.SP, _unilateral_witness(t, Axiom.SP, violation))


@timed(Axiom.NONBOSSY)
def check_nonbossy(f: Mechanism, budget: int | None = None) -> CheckResult:
    """Nonbossiness: keeping one's own object keeps the whole allocation."""
    t = _Tables(f, budget)

    def violation(i: int, q: int) -> np.ndarray:
        same_own = np.take(t.O[i], [q], axis=i) == t.O[i]
        return same_own & (np.take(t.T, [q], axis=i) != t.T)

    return CheckResult(Axiom.NONBOSSY, _unilateral_witness(t, Axiom.NONBOSSY, violation))


@lru_cache(maxsize=None)
def _monotone_moves(m: int, strict: bool) -> np.ndarray:
    """(P, m, P) boolean; [p, x, q] iff moving from p to q keeps everything below x below it."""
    lower = preference_space(m).lower_contours
    old = lower[:, :, None, :]
    new = lower.transpose(1, 0, 2)[None, :, :, :]
    moves = np.all(new | ~old, axis=3)
    if strict:
        moves &= np.any(new & ~old, axis=3)
    return moves


@timed(Axiom.MASKIN)
def check_maskin(
    f: Mechanism,
    chain: bool = True,
    strict: bool = False,
    budget: int | None = None,
) -> CheckResult:
    """
    Maskin monotonicity.

    With `chain` the check changes one agent's preference at a time, which
    is equivalent to the two-profile definition; without it every pair of
    profiles is compared. `strict` requires every agent's lower contour set
    to grow strictly instead of weakly; a one-agent step never grows the
    others' sets, so the strict reading always compares pairs of profiles
    and is weaker than the weak one.
    """
    t = _Tables(f, budget)
    moves = _monotone_moves(t.m, strict)

    if chain and not strict:

        def violation(i: int, q: int) -> np.ndarray:
            prefs = t.along(i, np.arange(t.P))
            allowed = moves[prefs, t.O[i], q]
            return allowed & (np.take(t.T, [q], axis=i) != t.T)

        return CheckResult(Axiom.MASKIN, _unilateral_witness(t, Axiom.MASKIN, violation))

    total = t.P ** (2 * t.n)
    limit = get_coalition_budget()
    if total > limit:
        raise ResourceError("two-profile monotonicity sweep", total, limit)
    flat = t.T.reshape(-1)
    for index in range(flat.size):
        digits = np.unravel_index(index, t.T.shape)
        allowed = np.ones(t.T.shape, dtype=bool)
        for i in range(t.n):
            allowed = allowed & t.along(i, moves[digits[i], t.O[i][digits], :])
        hit = _first(allowed & (t.T != flat[index]))
        if hit is not None:
            return CheckResult(
                Axiom.MASKIN,
                Witness(
                    Axiom.MASKIN,
                    t.profile(index),
                    tuple(range(t.n)),
                    t.profile(hit),
                    t.allocation(index),
                    t.allocation(hit),
                ),
            )
    return CheckResult(Axiom.MASKIN)


def _pe_against(t: _Tables, kind: Axiom, candidates: np.ndarray) -> CheckResult:
    best: tuple[int, int] | None = None
    for a_index in candidates.tolist():
        a = t.c.allocation_at(a_index)
        dominates = t.T != a_index
        for i in range(t.n):
            dominates = dominates & (t.rank_of(i, np.asarray(a[i])) <= t.own_rank[i])
        hit = _first(dominates)
        if hit is not None and (best is None or (hit, a_index) < best):
            best = (hit, a_index)
    if best is None:
        return CheckResult(kind)
    index, a_index = best
    return CheckResult(
        kind,
        Witness(
            kind,
            t.profile(index),
            before=t.allocation(index),
            alternative=t.c.allocation_at(a_index),
        ),
    )


@timed(Axiom.PE)
def check_pe(f: Mechanism, c: Constraint | None = None, budget: int | None = None) -> CheckResult:
    """
    Pareto efficiency with respect to the feasible set.

    Args:
        f: Mechanism to check.
        c: Feasible set to compare against, `f`'s own constraint by default.
        budget: Tabulation budget.

    Returns:
        CheckResult: Failing with a feasible allocation every agent weakly prefers.
    """
    t = _Tables(f, budget)
    c = c or t.c
    if (c.n, c.m) != (t.n, t.m):
        raise ArgumentError("constraint does not match the mechanism's agents and objects")
    return _pe_against(t, Axiom.PE, c.indices)


@timed(Axiom.PE_ON_IMAGE)
def check_pe_on_image(f: Mechanism, budget: int | None = None) -> CheckResult:
    """Pareto efficiency with respect to the allocations the mechanism ever selects."""
    t = _Tables(f, budget)
    return _pe_against(t, Axiom.PE_ON_IMAGE, t.mech.image())


@timed(Axiom.SURJECTIVE)
def check_surjective(f: Mechanism, budget: int | None = None) -> CheckResult:
    mech = tabulate(f, budget)
    missing = np.setdiff1d(mech.constraint.indices, mech.image())
    if missing.size == 0:
        return CheckResult(Axiom.SURJECTIVE)
    return CheckResult(
        Axiom.SURJECTIVE,
        Witness(Axiom.SURJECTIVE, alternative=mech.constraint.allocation_at(int(missing[0]))),
    )


def canonical_preferences(c: Constraint, i: AgentId) -> np.ndarray:
    """
    Index of each preference with agent i's always-infeasible objects moved last.

    The moved objects are placed in ascending order, the others keep their
    relative order.
    """
    space = preference_space(c.m)
    excluded = always_infeasible(c, i)
    tail = sorted(excluded)
    return np.array(
        [
            space.index_of(tuple(x for x in order if x not in excluded) + tuple(tail))
            for order in space.perms.tolist()
        ],
        dtype=np.int64,
    )


@timed(Axiom.IRRELEVANT_OBJECTS)
def check_irrelevant_objects(
    f: Mechanism, c: Constraint | None = None, budget: int | None = None
) -> CheckResult:
    """Reordering only always-infeasible objects never changes the allocation."""
    t = _Tables(f, budget)
    c = c or t.c
    best: tuple[int, int] | None = None
    for i in range(t.n):
        if not always_infeasible(c, i):
            continue
        canon = canonical_preferences(c, i)
        hit = _first(np.take(t.T, canon, axis=i) != t.T)
        if hit is not None and (best is None or (hit, i) < best):
            best = (hit, i)
    if best is None:
        return CheckResult(Axiom.IRRELEVANT_OBJECTS)
    index, i = best
    profile = t.profile(index)
    canon_index = int(canonical_preferences(c, i)[profile[i].index])
    misreport = profile.replace(i, t.space[canon_index])
    return CheckResult(
        Axiom.IRRELEVANT_OBJECTS,
        Witness(
            Axiom.IRRELEVANT_OBJECTS,
            profile,
            (i,),
            misreport,
            t.allocation(index),
            t.mech.assign(misreport),
        ),
    )


@timed(Axiom.MUTUALLY_BEST)
def check_mutually_best(f: Mechanism, budget: int | None = None) -> CheckResult:
    """Agents ranking each other first must be matched."""
    c = f.constraint
    if c.n != c.m or c.n % 2 or c != builtin_constraint(ConstraintKind.ROOMMATES, c.n, c.m):
        raise ArgumentError("mutually-best check needs the roommates constraint")
    t = _Tables(f, budget)
    tops = t.space.perms[:, 0]
    best: tuple[int, int, int] | None = None
    for i, j in combinations(range(t.n), 2):
        top_i = t.along(i, tops)
        top_j = t.along(j, tops)
        hit = _first((top_i == j) & (top_j == i) & (t.O[i] != j))
        if hit is not None and (best is None or (hit, i, j) < best):
            best = (hit, i, j)
    if best is None:
        return CheckResult(Axiom.MUTUALLY_BEST)
    index, i, j = best
    return CheckResult(
        Axiom.MUTUALLY_BEST,
        Witness(Axiom.MUTUALLY_BEST, t.profile(index), (i, j), before=t.allocation(index)),
    )


def _coalition_violation(t: _Tables, coalition: tuple[int, ...], strict_all: bool) -> np.ndarray:
    """Profiles where `coalition` can jointly misreport into an improving outcome."""
    codes = np.zeros(t.T.shape, dtype=np.int64)
    for i in coalition:
        codes = codes * t.m + t.O[i]
    violation = np.zeros(t.T.shape, dtype=bool)
    for value in np.unique(codes).tolist():
        reachable = np.any(codes == value, axis=coalition, keepdims=True)
        objects = []
        for _ in coalition:
            value, x = divmod(value, t.m)
            objects.append(x)
        objects.reverse()
        weak = np.ones(t.T.shape, dtype=bool)
        strict = np.zeros(t.T.shape, dtype=bool) if not strict_all else np.ones(t.T.shape, dtype=bool)
        for i, x in zip(coalition, objects):
            rank = t.rank_of(i, np.asarray(x))
            weak = weak & (rank <= t.own_rank[i])
            better = rank < t.own_rank[i]
            strict = (strict & better) if strict_all else (strict | better)
        violation |= reachable & weak & strict
    return violation


def _coalition_witness(t: _Tables, kind: Axiom, coalition: tuple[int, ...], index: int, strict_all: bool) -> Witness:
    digits = [int(d) for d in np.unravel_index(index, t.T.shape)]
    before = t.allocation(index)
    profile = t.profile(index)
    for reports in product(range(t.P), repeat=len(coalition)):
        after = t.at(_digits_with(digits, dict(zip(coalition, reports))))
        gains = [profile[i].prefers(after[i], before[i]) for i in coalition]
        losses = [profile[i].prefers(before[i], after[i]) for i in coalition]
        improving = all(gains) if strict_all else (any(gains) and not any(losses))
        if improving:
            misreport = profile
            for i, q in zip(coalition, reports):
                misreport = misreport.replace(i, t.space[q])
            return Witness(kind, profile, coalition, misreport, before, after)
    raise AssertionError(f"coalition {coalition} has no improving report at profile {index}")


def _coalition_check(
    f: Mechanism,
    kind: Axiom,
    coalitions: list[tuple[int, ...]],
    strict_all: bool,
    budget: int | None,
) -> CheckResult:
    t = _Tables(f, budget)
    work = sum(min(t.m ** len(s), len(t.c)) for s in coalitions) * t.T.size
    limit = get_coalition_budget()
    if work > limit:
        raise ResourceError(f"coalition sweep over {len(coalitions)} coalitions", work, limit)
    for coalition in coalitions:
        hit = _first(_coalition_violation(t, coalition, strict_all))
        if hit is not None:
            return CheckResult(kind, _coalition_witness(t, kind, coalition, hit, strict_all))
    return CheckResult(kind)


def _all_coalitions(n: int) -> list[tuple[int, ...]]:
    return [s for size in range(1, n + 1) for s in combinations(range(n), size)]


@timed(Axiom.GSP)
def check_gsp_naive(f: Mechanism, budget: int | None = None) -> CheckResult:
    """
    Group strategy-proofness over every coalition, smallest coalitions first.

    Raises:
        ResourceError: When the coalition sweep exceeds MECHKIT_COALITION_BUDGET.
    """
    return _coalition_check(f, Axiom.GSP, _all_coalitions(f.n), False, budget)


@timed(Axiom.GSP)
def check_gsp_fast(f: Mechanism, budget: int | None = None) -> CheckResult:
    """
    Group strategy-proofness through singletons and pairs only.

    A mechanism is group strategy-proof exactly when every two-agent marginal
    is strategy-proof and efficient on its image, so coalitions beyond pairs
    never need to be examined.
    """
    coalitions = [s for size in (1, 2) for s in combinations(range(f.n), size)]
    return _coalition_check(f, Axiom.GSP, coalitions, False, budget)


@timed(Axiom.WEAK_GSP)
def check_weak_gsp(f: Mechanism, budget: int | None = None) -> CheckResult:
    """No coalition can misreport so that every member strictly gains."""
    return _coalition_check(f, Axiom.WEAK_GSP, _all_coalitions(f.n), True, budget)


def check(
    f: Mechanism,
    axioms: Iterable[Axiom | str],
    engine: Engine | str = Engine.NAIVE,
    budget: int | None = None,
) -> list[CheckResult]:
    """Run several checkers against one tabulation."""
    mech = tabulate(f, budget)
    engine = Engine(engine)
    results = []
    for axiom in (Axiom(a) for a in axioms):
        if axiom is Axiom.GSP:
            checker = check_gsp_fast if engine is Engine.FAST else check_gsp_naive
            results.append(checker(mech))
        else:
            results.append(CHECKERS[axiom](mech))
    return results


CHECKERS: dict[Axiom, Callable[[Mechanism], CheckResult]] = {
    Axiom.SP: check_sp,
    Axiom.GSP: check_gsp_naive,
    Axiom.WEAK_GSP: check_weak_gsp,
    Axiom.PE: check_pe,
    Axiom.PE_ON_IMAGE: check_pe_on_image,
    Axiom.NONBOSSY: check_nonbossy,
    Axiom.MASKIN: check_maskin,
    Axiom.IRRELEVANT_OBJECTS: check_irrelevant_objects,
    Axiom.MUTUALLY_BEST: check_mutually_best,
    Axiom.SURJECTIVE: check_surjective,
}


def check_direct_sum_form(f: Mechanism, pair: tuple[AgentId, AgentId]) -> bool:
    """
    Whether `f` is a parameterized direct sum around `pair`.

    Every marginal of the pair must be group strategy-proof, which for two
    agents means strategy-proof and efficient on its image, and recombining
    the pair's and the others' marginals must reproduce `f` exactly.
    """
    g, sigma, rho = direct_sum_form(f, pair)
    space = preference_space(f.m)
    rest_count = f.n - 2
    for digits in product(range(space.size), repeat=rest_count):
        rest = Profile(tuple(space[d] for d in digits))
        pair_mechanism = sigma(rest)
        if not (check_sp(pair_mechanism) and check_pe_on_image(pair_mechanism)):
            log.debug("Pair %s marginal at [%s] is not group strategy-proof", pair, rest)
            return False
    # rebuilt rows may fall outside the constraint
    rebuilt = ParameterizedDirectSum(g.constraint, rest_count, rho, sigma)
    rows = rebuilt.tabulate_rows(space.profile_grid(f.n))
    return bool(np.array_equal(rows, tabulate(g).flat))


def is_gsp(f: Mechanism, engine: Engine | str = Engine.FAST) -> bool:
    checker = check_gsp_fast if Engine(engine) is Engine.FAST else check_gsp_naive
    return bool(checker(f))
