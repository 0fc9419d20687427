"""
Unit tests for the constraint module.
"""

import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mechkit.constraint import (
    Constraint,
    Suballocation,
    all_constraints,
    allocation_index,
    always_infeasible,
    builtin_constraint,
    feasible_extensions,
    full_constraint,
    index_allocation,
    is_single_compromising,
    orbit_representatives,
    product_constraint,
    project,
    relabel_agents,
    relabel_objects,
)
from mechkit.exceptions import ArgumentError
from tests.test_utils import create_test_constraint


def constraint_from_bits(bits: int, n: int = 2, m: int = 3) -> Constraint:
    return Constraint(n, m, np.array([(bits >> k) & 1 for k in range(m**n)], dtype=bool))


class TestIndexing:
    """Test cases for allocation indexing."""

    def test_allocation_index_agent_zero_most_significant(self) -> None:
        """Test that agent 0 is the most significant digit."""
        assert allocation_index((1, 2), 2, 3) == 5
        assert allocation_index((2, 0, 1), 3, 3) == 19

    def test_index_allocation_inverts_allocation_index(self) -> None:
        """Test that decoding returns the encoded allocation."""
        assert index_allocation(19, 3, 3) == (2, 0, 1)

    def test_allocation_index_rejects_out_of_range_object(self) -> None:
        """Test that objects outside the object set are rejected."""
        with pytest.raises(ArgumentError):
            allocation_index((0, 3), 2, 3)

    def test_allocation_index_rejects_wrong_length(self) -> None:
        """Test that allocations of the wrong length are rejected."""
        with pytest.raises(ArgumentError) as exc_info:
            allocation_index((0,), 2, 3)
        assert "length 2" in str(exc_info.value)


class TestBuiltinConstraints:
    """Test cases for the closed-form constraints."""

    def test_house_allocation_has_distinct_objects(self) -> None:
        """Test that house allocation holds exactly the injective allocations."""
        c = create_test_constraint("house_allocation", 2, 3)
        assert len(c) == 6
        assert (0, 0) not in c
        assert (0, 1) in c

    def test_roommates_four_agents_has_three_matchings(self) -> None:
        """Test that four roommates can be matched in three ways."""
        c = create_test_constraint("roommates", 4, 4)
        assert set(c) == {(1, 0, 3, 2), (2, 3, 0, 1), (3, 2, 1, 0)}

    def test_social_choice_is_the_diagonal(self) -> None:
        """Test that social choice gives everyone the same object."""
        c = create_test_constraint("social_choice", 2, 3)
        assert set(c) == {(0, 0), (1, 1), (2, 2)}

    def test_complement_diagonal(self) -> None:
        """Test that the complement of the diagonal drops the unanimous allocations."""
        c = create_test_constraint("complement_diagonal", 3, 2)
        assert len(c) == 6
        assert (0, 0, 0) not in c
        assert (1, 1, 1) not in c

    def test_custom_requires_allocations(self) -> None:
        """Test that a custom constraint without allocations is rejected."""
        with pytest.raises(ArgumentError):
            builtin_constraint("custom", 2, 3)

    def test_custom_from_allocations(self) -> None:
        """Test building an explicit constraint."""
        c = builtin_constraint("custom", 2, 2, [(0, 1), (1, 1)])
        assert set(c) == {(0, 1), (1, 1)}

    @pytest.mark.parametrize(
        "kind,n,m",
        [
            ("house_allocation", 3, 2),
            ("roommates", 3, 3),
            ("roommates", 4, 3),
            ("complement_diagonal", 1, 3),
        ],
    )
    def test_preconditions(self, kind: str, n: int, m: int) -> None:
        """Test that violated size preconditions raise ArgumentError."""
        with pytest.raises(ArgumentError):
            builtin_constraint(kind, n, m)

    def test_empty_constraint_rejected(self) -> None:
        """Test that a constraint must hold at least one allocation."""
        with pytest.raises(ArgumentError) as exc_info:
            Constraint(2, 2, np.zeros(4, dtype=bool))
        assert "at least one feasible allocation" in str(exc_info.value)


class TestConstraint:
    """Test cases for Constraint behavior."""

    def test_allocations_sorted_by_index(self) -> None:
        """Test that feasible allocations come in index order."""
        c = create_test_constraint("house_allocation", 2, 3)
        assert [tuple(row) for row in c.allocations.tolist()] == [
            (0, 1),
            (0, 2),
            (1, 0),
            (1, 2),
            (2, 0),
            (2, 1),
        ]

    def test_mask_is_read_only(self) -> None:
        """Test that the feasibility bitmap cannot be modified."""
        c = full_constraint(2, 2)
        with pytest.raises(ValueError):
            c.mask[0] = False

    def test_contains_rejects_malformed_allocations(self) -> None:
        """Test membership for malformed allocations."""
        c = full_constraint(2, 2)
        assert (0, 5) not in c
        assert (0,) not in c
        assert "ab" not in c

    def test_equality_and_hash(self) -> None:
        """Test that constraints with the same bitmap are equal."""
        a = create_test_constraint("house_allocation", 2, 3)
        b = builtin_constraint("custom", 2, 3, list(a))
        assert a == b
        assert hash(a) == hash(b)

    def test_pickle_round_trip(self) -> None:
        """Test that constraints survive pickling for process pools."""
        c = create_test_constraint("roommates", 4, 4)
        assert pickle.loads(pickle.dumps(c)) == c

    def test_options_follow_suballocation(self) -> None:
        """Test the objects an agent can still receive."""
        c = create_test_constraint("house_allocation", 3, 3)
        assert c.options(1, Suballocation.from_mapping({0: 2})) == (0, 1)

    def test_feasible_extensions(self) -> None:
        """Test the feasible completions of a suballocation."""
        c = create_test_constraint("roommates", 4, 4)
        assert feasible_extensions(c, Suballocation.from_mapping({0: 2})) == frozenset({(2, 3, 0, 1)})


class TestSuballocation:
    """Test cases for suballocations."""

    def test_key_is_sorted_by_agent(self) -> None:
        """Test that the key lists agents in ascending order."""
        mu = Suballocation.from_key("2:0,0:1")
        assert mu.key() == "0:1,2:0"
        assert mu.domain == frozenset({0, 2})

    def test_empty_key(self) -> None:
        """Test that '-' and '' both denote the empty suballocation."""
        assert Suballocation.from_key("-") == Suballocation()
        assert len(Suballocation.from_key("")) == 0

    def test_duplicate_agent_rejected(self) -> None:
        """Test that an agent cannot be assigned twice."""
        with pytest.raises(ArgumentError):
            Suballocation(((0, 1), (0, 2)))

    def test_malformed_key_rejected(self) -> None:
        """Test that malformed keys raise ArgumentError."""
        with pytest.raises(ArgumentError):
            Suballocation.from_key("0-1")

    def test_extend_and_agrees_with(self) -> None:
        """Test extending a suballocation and matching it against allocations."""
        mu = Suballocation().extend(1, 2)
        assert mu.agrees_with((0, 2, 1))
        assert not mu.agrees_with((2, 0, 1))
        assert mu.extend(0, 0).is_complete(2)


class TestDerivedConstraints:
    """Test cases for projections, relabelings and products."""

    def test_project_house_allocation(self) -> None:
        """Test that projecting house allocation keeps it a house allocation."""
        c = create_test_constraint("house_allocation", 3, 3)
        assert project(c, [0, 2]) == create_test_constraint("house_allocation", 2, 3)

    def test_project_rejects_empty_agent_set(self) -> None:
        """Test that a projection needs agents."""
        with pytest.raises(ArgumentError):
            project(full_constraint(2, 2), [])

    def test_project_keeps_original_agent_order(self) -> None:
        """Test that projected agents follow increasing original index whatever order is passed."""
        c = builtin_constraint("custom", 3, 2, [(0, 1, 1), (0, 0, 1)])
        projected = project(c, [2, 0, 2])
        assert projected == project(c, [0, 2])
        assert (0, 1) in projected
        assert (1, 0) not in projected

    def test_always_infeasible_roommates(self) -> None:
        """Test that roommates are never matched with themselves."""
        c = create_test_constraint("roommates", 4, 4)
        for i in range(4):
            assert always_infeasible(c, i) == frozenset({i})

    def test_single_compromising(self) -> None:
        """Test single-compromising detection."""
        assert is_single_compromising(create_test_constraint("complement_diagonal", 3, 2))
        assert is_single_compromising(create_test_constraint("house_allocation", 2, 3))
        assert not is_single_compromising(create_test_constraint("social_choice", 3, 3))

    def test_relabel_agents_transposes(self) -> None:
        """Test that the relabeled agent 0 plays the old agent 1."""
        c = builtin_constraint("custom", 2, 2, [(0, 1)])
        assert set(relabel_agents(c, (1, 0))) == {(1, 0)}

    def test_relabel_objects(self) -> None:
        """Test that relabeling objects maps every allocation."""
        c = builtin_constraint("custom", 2, 3, [(0, 1), (2, 2)])
        assert set(relabel_objects(c, (1, 2, 0))) == {(1, 2), (0, 0)}

    def test_relabel_rejects_non_permutation(self) -> None:
        """Test that relabelings must be permutations."""
        with pytest.raises(ArgumentError):
            relabel_objects(full_constraint(2, 3), (0, 0, 1))

    def test_product_constraint(self) -> None:
        """Test that a product pairs every feasible allocation of both parts."""
        c = product_constraint(create_test_constraint("house_allocation", 2, 3), full_constraint(1, 3))
        assert c.n == 3
        assert len(c) == 18
        assert (0, 1, 1) in c
        assert (1, 1, 0) not in c

    def test_all_constraints_counts(self) -> None:
        """Test that every nonempty bitmap is enumerated."""
        assert sum(1 for _ in all_constraints(2, 2)) == 15

    def test_orbit_representatives_counts(self) -> None:
        """Test the number of relabeling orbits for two agents."""
        assert len(orbit_representatives(2, 2)) == 9
        assert len(orbit_representatives(2, 3)) == 103

    def test_orbit_representatives_too_large(self) -> None:
        """Test that sweeping too many cells is refused."""
        with pytest.raises(ArgumentError):
            orbit_representatives(2, 5)

    @settings(max_examples=50, deadline=None)
    @given(bits=st.integers(min_value=1, max_value=511), perm=st.permutations(range(3)))
    def test_relabel_objects_moves_always_infeasible_sets(self, bits: int, perm: list[int]) -> None:
        """Test that always-infeasible sets follow an object relabeling."""
        c = constraint_from_bits(bits)
        relabeled = relabel_objects(c, perm)
        assert len(relabeled) == len(c)
        for i in range(2):
            assert always_infeasible(relabeled, i) == frozenset(perm[x] for x in always_infeasible(c, i))
