"""
mechkit: exhaustive analysis of allocation mechanisms under feasibility constraints.

This package provides constraints and preference profiles, the block structure
of two-agent constraints, a library of mechanism families, exhaustive axiom
checkers and a search for every mechanism satisfying a set of axioms.
"""

from .axioms import Axiom, CheckResult, Engine, Witness, check
from .blocks import BlockDecomposition, decompose
from .constraint import Constraint, ConstraintKind, Suballocation, builtin_constraint
from .logger import log
from .mechanisms import Mechanism, TabulatedMechanism, tabulate
from .preferences import Preference, Profile
from .search import MechanismSet, SearchSpec, enumerate_gsd, enumerate_local_dictatorships, search

__all__ = [
    "Axiom",
    "BlockDecomposition",
    "CheckResult",
    "Constraint",
    "ConstraintKind",
    "Engine",
    "Mechanism",
    "MechanismSet",
    "Preference",
    "Profile",
    "SearchSpec",
    "Suballocation",
    "TabulatedMechanism",
    "Witness",
    "builtin_constraint",
    "check",
    "decompose",
    "enumerate_gsd",
    "enumerate_local_dictatorships",
    "log",
    "search",
    "tabulate",
]
