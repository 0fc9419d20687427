"""
Strict preferences over objects and preference profiles.

Preferences are permutations of the objects stored best-first. All m!
preferences over m objects are indexed in lexicographic order of their
best-first sequences, and profiles are indexed mixed-radix over those
preference indices with agent 0 as the most significant digit.
"""

from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property, lru_cache
from itertools import permutations, product
from math import factorial
from typing import Iterable, Iterator, Sequence, overload

import numpy as np

from mechkit.constraint import Allocation, ObjectId
from mechkit.exceptions import ArgumentError


class ContourSide(StrEnum):
    LOWER = "lower"
    UPPER = "upper"


@dataclass(frozen=True)
class Preference:
    """A strict linear order over objects, best first."""

    order: tuple[ObjectId, ...]

    def __post_init__(self) -> None:
        order = tuple(int(x) for x in self.order)
        if not order or sorted(order) != list(range(len(order))):
            raise ArgumentError(f"{order} is not a permutation of objects")
        object.__setattr__(self, "order", order)

    @property
    def m(self) -> int:
        return len(self.order)

    @cached_property
    def rank(self) -> tuple[int, ...]:
        """rank[x] is the position of x, 0 for the top object."""
        inverse = [0] * self.m
        for position, x in enumerate(self.order):
            inverse[x] = position
        return tuple(inverse)

    @property
    def index(self) -> int:
        return preference_space(self.m).index_of(self)

    def top(self, k: int = 1) -> ObjectId:
        if not 1 <= k <= self.m:
            raise ArgumentError(f"rank {k} outside [1, {self.m}]")
        return self.order[k - 1]

    def prefers(self, x: ObjectId, y: ObjectId) -> bool:
        """True iff x is strictly better than y."""
        return self.rank[x] < self.rank[y]

    def best(self, objects: Iterable[ObjectId]) -> ObjectId:
        """The best object of a nonempty set."""
        candidates = list(objects)
        if not candidates:
            raise ArgumentError("cannot pick the best object of an empty set")
        return min(candidates, key=lambda x: self.rank[x])

    def restricted(self, objects: Iterable[ObjectId]) -> tuple[ObjectId, ...]:
        """The relative order of a subset of objects."""
        keep = set(objects)
        return tuple(x for x in self.order if x in keep)

    def __str__(self) -> str:
        return ">".join(str(x) for x in self.order)


@dataclass(frozen=True)
class Profile(Sequence[Preference]):
    """One preference per agent, all over the same objects."""

    prefs: tuple[Preference, ...]

    def __post_init__(self) -> None:
        prefs = tuple(p if isinstance(p, Preference) else Preference(p) for p in self.prefs)
        if not prefs:
            raise ArgumentError("a profile needs at least one agent")
        if len({p.m for p in prefs}) != 1:
            raise ArgumentError("all preferences of a profile must rank the same objects")
        object.__setattr__(self, "prefs", prefs)

    @classmethod
    def of(cls, *orders: Sequence[ObjectId]) -> "Profile":
        """Build a profile from best-first object sequences."""
        return cls(tuple(Preference(tuple(o)) for o in orders))

    @property
    def n(self) -> int:
        return len(self.prefs)

    @property
    def m(self) -> int:
        return self.prefs[0].m

    def top(self, k: int = 1) -> Allocation:
        return tuple(p.top(k) for p in self.prefs)

    def replace(self, agent: int, pref: Preference) -> "Profile":
        if not 0 <= agent < self.n:
            raise ArgumentError(f"agent {agent} outside [0, {self.n})")
        prefs = list(self.prefs)
        prefs[agent] = pref
        return Profile(tuple(prefs))

    def restrict(self, agents: Iterable[int]) -> "Profile":
        return Profile(tuple(self.prefs[a] for a in sorted(set(agents))))

    @overload
    def __getitem__(self, item: int) -> Preference: ...

    @overload
    def __getitem__(self, item: slice) -> tuple[Preference, ...]: ...

    def __getitem__(self, item):
        return self.prefs[item]

    def __len__(self) -> int:
        return len(self.prefs)

    def __iter__(self) -> Iterator[Preference]:
        return iter(self.prefs)

    def __str__(self) -> str:
        return " | ".join(str(p) for p in self.prefs)


def merge_profiles(parts: dict[int, Preference], n: int) -> Profile:
    """Assemble a profile from a per-agent mapping covering [0, n)."""
    if sorted(parts) != list(range(n)):
        raise ArgumentError(f"preferences given for agents {sorted(parts)}, expected 0..{n - 1}")
    return Profile(tuple(parts[a] for a in range(n)))


class PreferenceSpace:
    """All m! preferences over m objects with array views for vectorized checks.

    Attributes:
        perms: (P, m) array; row k is preference k best-first.
        ranks: (P, m) array; ranks[k, x] is the position of x in preference k.
    """

    def __init__(self, m: int):
        if m < 1:
            raise ArgumentError(f"need at least one object, got m={m}")
        if m > 8:
            raise ArgumentError(f"{factorial(m)} preferences over {m} objects is beyond desk scale")
        self.m = m
        self.size = factorial(m)
        perms = np.array(list(permutations(range(m))), dtype=np.int64).reshape(self.size, m)
        ranks = np.argsort(perms, axis=1)
        perms.flags.writeable = False
        ranks.flags.writeable = False
        self.perms = perms
        self.ranks = ranks
        self._lookup = {tuple(row): k for k, row in enumerate(perms.tolist())}

    @cached_property
    def preferences(self) -> tuple[Preference, ...]:
        return tuple(Preference(tuple(row)) for row in self.perms.tolist())

    def index_of(self, pref: Preference | Sequence[ObjectId]) -> int:
        order = pref.order if isinstance(pref, Preference) else tuple(int(x) for x in pref)
        try:
            return self._lookup[order]
        except KeyError as e:
            raise ArgumentError(f"{order} is not a preference over {self.m} objects") from e

    def __getitem__(self, index: int) -> Preference:
        return self.preferences[index]

    def __len__(self) -> int:
        return self.size

    @cached_property
    def lower_contours(self) -> np.ndarray:
        """(P, m, m) boolean; [k, x, y] iff y is strictly below x in preference k."""
        r = self.ranks
        return r[:, None, :] > r[:, :, None]

    def profile_count(self, n: int) -> int:
        return self.size**n

    def profile_grid(self, n: int) -> np.ndarray:
        """(P^n, n) array of preference indices, row k being profile k."""
        return np.indices((self.size,) * n).reshape(n, -1).T

    def profile_at(self, index: int, n: int) -> Profile:
        digits = np.unravel_index(int(index), (self.size,) * n)
        return Profile(tuple(self.preferences[int(d)] for d in digits))


@lru_cache(maxsize=None)
def preference_space(m: int) -> PreferenceSpace:
    return PreferenceSpace(m)


@overload
def top(p: Preference, k: int = 1) -> ObjectId: ...


@overload
def top(p: Profile, k: int = 1) -> Allocation: ...


def top(p, k=1):
    """The k-th best object of a preference, or componentwise for a profile."""
    return p.top(k)


def contour(p: Preference, x: ObjectId, side: ContourSide | str) -> frozenset[ObjectId]:
    """
    Strict lower or upper contour set of `x`.

    Args:
        p: The preference.
        x: Reference object.
        side: `lower` for objects worse than x, `upper` for objects better.

    Returns:
        frozenset[ObjectId]: The contour set, never containing x.
    """
    if not 0 <= x < p.m:
        raise ArgumentError(f"object {x} outside [0, {p.m})")
    position = p.rank[x]
    if ContourSide(side) is ContourSide.LOWER:
        return frozenset(p.order[position + 1 :])
    return frozenset(p.order[:position])


def all_preferences(m: int) -> Iterator[Preference]:
    """All m! preferences in index order."""
    return iter(preference_space(m).preferences)


def all_profiles(n: int, m: int) -> Iterator[Profile]:
    """All (m!)^n profiles in index order."""
    if n < 1:
        raise ArgumentError(f"need at least one agent, got n={n}")
    prefs = preference_space(m).preferences
    return (Profile(combo) for combo in product(prefs, repeat=n))


def profile_index(profile: Profile) -> int:
    space = preference_space(profile.m)
    index = 0
    for pref in profile:
        index = index * space.size + space.index_of(pref)
    return index


def profile_from_index(index: int, n: int, m: int) -> Profile:
    space = preference_space(m)
    if not 0 <= index < space.profile_count(n):
        raise ArgumentError(f"profile index {index} outside [0, {space.profile_count(n)})")
    return space.profile_at(index, n)


def lex_preference(groups: Sequence[Iterable[ObjectId]], m: int) -> frozenset[Preference]:
    """
    All preferences ranking the first group above the second, and so on.

    Objects outside every group come last in any order; within a group any
    order is allowed.

    Args:
        groups: Ordered, pairwise disjoint object sets.
        m: Number of objects.

    Returns:
        frozenset[Preference]: The matching preferences.

    Raises:
        ArgumentError: If groups overlap or name objects outside [0, m).
    """
    blocks = [sorted(set(int(x) for x in g)) for g in groups]
    seen: set[int] = set()
    for block in blocks:
        if seen & set(block):
            raise ArgumentError(f"groups overlap on {sorted(seen & set(block))}")
        if block and not (0 <= block[0] and block[-1] < m):
            raise ArgumentError(f"group {block} names objects outside [0, {m})")
        seen |= set(block)
    blocks.append([x for x in range(m) if x not in seen])
    result = set()
    for parts in product(*(permutations(b) for b in blocks)):
        result.add(Preference(tuple(x for part in parts for x in part)))
    return frozenset(result)
