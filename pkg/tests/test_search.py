"""
Unit tests for the search module.
"""

import pytest

from mechkit.axioms import Axiom, check, check_irrelevant_objects, check_mutually_best
from mechkit.constraint import builtin_constraint, full_constraint
from mechkit.exceptions import ArgumentError, ResourceError, SearchIncompleteError
from mechkit.mechanisms import SerialDictatorship, tabulate
from mechkit.preferences import Profile
from mechkit.search import (
    MechanismSet,
    SearchSpec,
    brute_force,
    enumerate_gsd,
    enumerate_local_dictatorships,
    search,
    set_equal,
    sweep_two_agent,
)
from tests.test_utils import (
    create_test_constant_mechanism,
    create_test_constraint,
    create_test_mixed_extension,
    create_test_random_table,
)

SP_PE = frozenset({Axiom.SP, Axiom.PE})
GSP_PE = frozenset({Axiom.GSP, Axiom.PE})


class TestSearchSpec:
    """Test cases for search specifications."""

    def test_axioms_are_normalized(self) -> None:
        """Test that axiom names are accepted."""
        spec = SearchSpec(create_test_constraint(), frozenset({"sp", "pe"}))
        assert spec.axioms == SP_PE

    def test_empty_axioms_rejected(self) -> None:
        """Test that at least one axiom is required."""
        with pytest.raises(ArgumentError):
            SearchSpec(create_test_constraint(), frozenset())

    def test_unsupported_axiom_rejected(self) -> None:
        """Test that only searchable axioms are accepted."""
        with pytest.raises(ArgumentError) as exc_info:
            SearchSpec(create_test_constraint(), frozenset({Axiom.MASKIN}))
        assert "maskin" in str(exc_info.value)

    def test_nonpositive_budget_rejected(self) -> None:
        """Test that budgets must be positive."""
        with pytest.raises(ArgumentError):
            SearchSpec(create_test_constraint(), SP_PE, node_budget=0)


class TestMechanismSet:
    """Test cases for mechanism sets."""

    def test_duplicates_removed(self) -> None:
        """Test that equal tables are kept once."""
        c = create_test_constraint()
        sd = tabulate(SerialDictatorship(c, [0, 1]))
        result = MechanismSet(c, [sd, tabulate(SerialDictatorship(c, [0, 1])), sd])
        assert len(result) == 1
        assert sd in result
        assert result.complete

    def test_other_constraint_rejected(self) -> None:
        """Test that members share the set's constraint."""
        with pytest.raises(ArgumentError):
            MechanismSet(create_test_constraint(), [create_test_constant_mechanism(full_constraint(2, 3))])

    def test_set_equal_reports_difference(self) -> None:
        """Test the symmetric difference report."""
        c = create_test_constraint()
        first = tabulate(SerialDictatorship(c, [0, 1]))
        second = tabulate(SerialDictatorship(c, [1, 0]))
        comparison = set_equal(MechanismSet(c, [first]), MechanismSet(c, [first, second]))
        assert not comparison
        assert comparison.only_left == ()
        assert comparison.only_right == (second,)
        assert set_equal(MechanismSet(c, [second, first]), MechanismSet(c, [first, second])).equal

    def test_set_equal_needs_same_constraint(self) -> None:
        """Test that sets over different constraints cannot be compared."""
        with pytest.raises(ArgumentError):
            set_equal(MechanismSet(create_test_constraint()), MechanismSet(full_constraint(2, 3)))


class TestSearch:
    """Test cases for the exhaustive search."""

    @pytest.mark.parametrize(
        "kind,m,expected",
        [
            ("social_choice", 2, 4),
            ("social_choice", 3, 2),
            ("house_allocation", 3, 8),
        ],
    )
    def test_strategy_proof_efficient_counts(self, kind: str, m: int, expected: int) -> None:
        """Test the number of strategy-proof efficient two-agent mechanisms."""
        found = search(SearchSpec(create_test_constraint(kind, 2, m), SP_PE))
        assert len(found) == expected
        assert found.complete

    def test_full_constraint_has_one_mechanism(self) -> None:
        """Test that everyone receiving her top is the only efficient mechanism."""
        found = search(SearchSpec(full_constraint(2, 3), SP_PE))
        assert len(found) == 1
        assert found[0].assign(Profile.of((2, 0, 1), (1, 2, 0))) == (2, 1)

    def test_house_allocation_equals_local_dictatorships(self) -> None:
        """Test that the search finds exactly the local dictatorships."""
        c = create_test_constraint("house_allocation", 2, 3)
        found = search(SearchSpec(c, SP_PE))
        assert set_equal(found, enumerate_local_dictatorships(c))
        assert set_equal(search(SearchSpec(c, GSP_PE)), found)

    def test_every_result_satisfies_axioms(self) -> None:
        """Test that found tables pass the independent checkers."""
        c = create_test_constraint("complement_diagonal", 2, 3)
        for mech in search(SearchSpec(c, SP_PE)):
            assert all(check(mech, ["sp", "pe", "gsp"]))

    @pytest.mark.parametrize(
        "c",
        [
            create_test_constraint("social_choice", 2, 2),
            create_test_constraint("house_allocation", 2, 2),
            builtin_constraint("custom", 2, 2, [(0, 0), (0, 1), (1, 1)]),
        ],
    )
    def test_matches_brute_force(self, c) -> None:
        """Test propagation against plain enumeration on tiny instances."""
        for axioms in (SP_PE, frozenset({Axiom.SP}), frozenset({Axiom.SP, Axiom.SURJECTIVE})):
            spec = SearchSpec(c, axioms)
            assert set_equal(search(spec), brute_force(spec))

    def test_brute_force_refuses_large_instances(self) -> None:
        """Test that brute force has a hard limit."""
        with pytest.raises(ResourceError):
            brute_force(SearchSpec(create_test_constraint("house_allocation", 2, 3), SP_PE))

    def test_irrelevant_object_reduction_is_exact(self) -> None:
        """Test that collapsing rankings of unreachable objects loses nothing."""
        c = builtin_constraint("custom", 2, 3, [(0, 1), (0, 2), (1, 0), (1, 2)])
        reduced = search(SearchSpec(c, GSP_PE))
        assert set_equal(reduced, search(SearchSpec(c, SP_PE)))
        assert set_equal(reduced, enumerate_local_dictatorships(c))
        for mech in reduced:
            assert check_irrelevant_objects(mech)

    @pytest.mark.parametrize(
        "c",
        [
            builtin_constraint("custom", 2, 3, [(0, 1), (0, 2), (1, 2), (2, 1)]),
            builtin_constraint("custom", 2, 3, [(1, 0), (2, 0), (1, 2)]),
            create_test_constraint("roommates", 2, 2),
        ],
    )
    def test_reduced_results_ignore_unreachable_objects(self, c) -> None:
        """Test that group strategy-proof efficient results never react to unreachable objects."""
        found = search(SearchSpec(c, GSP_PE))
        assert set_equal(found, enumerate_local_dictatorships(c))
        for mech in found:
            assert check_irrelevant_objects(mech)

    def test_node_budget_keeps_partial_result(self) -> None:
        """Test that running out of nodes reports what was found."""
        spec = SearchSpec(create_test_constraint("house_allocation", 2, 3), SP_PE, node_budget=1)
        with pytest.raises(SearchIncompleteError) as exc_info:
            search(spec)
        partial = exc_info.value.partial
        assert not partial.complete
        assert len(partial) < 8
        assert exc_info.value.required == 2

    def test_node_budget_is_deterministic(self) -> None:
        """Test that the same budget stops at the same partial result."""
        spec = SearchSpec(create_test_constraint("house_allocation", 2, 3), SP_PE, node_budget=5)
        partials = []
        for _ in range(2):
            with pytest.raises(SearchIncompleteError) as exc_info:
                search(spec)
            partials.append(exc_info.value.partial)
        assert set_equal(partials[0], partials[1])

    def test_profile_limit(self) -> None:
        """Test that too many profiles are refused up front."""
        spec = SearchSpec(create_test_constraint("house_allocation", 3, 3), SP_PE, profile_limit=100)
        with pytest.raises(ResourceError) as exc_info:
            search(spec)
        assert exc_info.value.required == 216

    def test_feasible_set_limit(self) -> None:
        """Test that large feasible sets are refused."""
        with pytest.raises(ResourceError):
            search(SearchSpec(full_constraint(3, 5), SP_PE))

    @pytest.mark.slow
    def test_social_choice_three_agents_is_dictatorial(self) -> None:
        """Test that strategy-proof efficient social choice on three objects is dictatorial."""
        c = create_test_constraint("social_choice", 3, 3)
        found = search(SearchSpec(c, SP_PE))
        assert len(found) == 3
        orders = [[0, 1, 2], [1, 0, 2], [2, 0, 1]]
        dictatorships = MechanismSet(c, [tabulate(SerialDictatorship(c, order)) for order in orders])
        assert set_equal(found, dictatorships)

    @pytest.mark.slow
    def test_three_agent_house_allocation_beyond_dictatorships(self) -> None:
        """Test that a block-wise dictatorship extension is found but is no serial dictatorship."""
        c = create_test_constraint("house_allocation", 3, 3)
        found = search(SearchSpec(c, GSP_PE))
        mixed = tabulate(create_test_mixed_extension())
        assert mixed in found
        gsd = enumerate_gsd(c)
        assert mixed not in gsd
        assert all(table in found for table in gsd)

    @pytest.mark.slow
    def test_roommates_are_serial_dictatorships(self) -> None:
        """Test that efficient group strategy-proof roommate mechanisms are dictatorships."""
        c = create_test_constraint("roommates", 4, 4)
        found = search(SearchSpec(c, GSP_PE))
        assert set_equal(found, enumerate_gsd(c))
        assert len(found) == 4
        for mech in found:
            assert not check_mutually_best(mech)
            assert check_irrelevant_objects(mech)


class TestEnumeration:
    """Test cases for the mechanism families."""

    def test_local_dictatorship_counts(self) -> None:
        """Test one table per dictator assignment."""
        assert len(enumerate_local_dictatorships(create_test_constraint("house_allocation", 2, 3))) == 8
        assert len(enumerate_local_dictatorships(create_test_constraint("social_choice", 2, 3))) == 2
        assert len(enumerate_local_dictatorships(full_constraint(2, 3))) == 1

    def test_local_dictatorships_need_two_agents(self) -> None:
        """Test that three agents are rejected."""
        with pytest.raises(ArgumentError):
            enumerate_local_dictatorships(create_test_constraint("house_allocation", 3, 3))

    def test_gsd_counts(self) -> None:
        """Test distinct serial dictatorship tables on small constraints."""
        assert len(enumerate_gsd(create_test_constraint("social_choice", 2, 3))) == 2
        assert len(enumerate_gsd(create_test_constraint("roommates", 4, 4))) == 4
        assert len(enumerate_gsd(full_constraint(1, 3))) == 1

    def test_gsd_tree_limit(self) -> None:
        """Test that too many orderings raise ResourceError."""
        c = create_test_constraint("house_allocation", 3, 3)
        with pytest.raises(ResourceError) as exc_info:
            enumerate_gsd(c, limit=23)
        assert exc_info.value.required == 24
        assert len(enumerate_gsd(c, limit=24)) <= 24

    def test_gsd_tables_pass_axioms(self) -> None:
        """Test that every enumerated ordering is efficient and group strategy-proof."""
        for mech in enumerate_gsd(create_test_constraint("house_allocation", 3, 3)):
            assert all(check(mech, ["gsp", "pe", "maskin"], engine="fast"))

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "kind,n,m",
        [
            ("house_allocation", 2, 2),
            ("house_allocation", 2, 4),
            ("house_allocation", 3, 3),
            ("social_choice", 2, 4),
            ("social_choice", 3, 3),
            ("complement_diagonal", 2, 3),
            ("complement_diagonal", 3, 3),
            ("roommates", 2, 2),
        ],
    )
    def test_every_gsd_is_efficient_and_group_strategy_proof(self, kind: str, n: int, m: int) -> None:
        """Test every enumerated ordering over the small builtin constraints."""
        for mech in enumerate_gsd(create_test_constraint(kind, n, m)):
            assert all(check(mech, ["gsp", "pe"], engine="fast"))

    def test_random_table_is_no_local_dictatorship(self) -> None:
        """Test membership against an arbitrary table."""
        c = create_test_constraint("house_allocation", 2, 3)
        assert create_test_random_table(c, seed=11) not in enumerate_local_dictatorships(c)


class TestSweep:
    """Test cases for the two-agent sweep."""

    def test_two_objects(self) -> None:
        """Test that every two-object constraint matches its local dictatorships."""
        results = sweep_two_agent(2)
        assert len(results) == 9
        assert all(r.equal for r in results)
        assert all(r.searched == r.local_dictatorships for r in results)

    @pytest.mark.slow
    def test_three_objects(self) -> None:
        """Test all relabeling orbits over three objects."""
        results = sweep_two_agent(3, threads=2)
        assert len(results) == 103
        assert all(r.equal for r in results)
