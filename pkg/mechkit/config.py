"""
Budget and parallelism settings read from the environment.

Every getter falls back to its default when the variable is unset or not a
valid number. Command line flags take precedence over these values.
"""

import os

from mechkit.logger import log

DEFAULT_NODE_BUDGET = 1_000_000
DEFAULT_SECONDS_BUDGET = 600.0
DEFAULT_TABLE_BUDGET = 10**7
DEFAULT_COALITION_BUDGET = 10**9
DEFAULT_PROFILE_LIMIT = 2000
DEFAULT_CONSTRAINT_LIMIT = 64


def _read_number(name: str, default: float, kind: type = int) -> float:
    raw = os.environ.get(name, "")
    if not raw:
        return default
    try:
        value = kind(raw)
    except ValueError:
        log.warning("Ignoring %s=%r, not a valid %s", name, raw, kind.__name__)
        return default
    if value <= 0:
        log.warning("Ignoring %s=%r, must be positive", name, raw)
        return default
    return value


def get_node_budget() -> int:
    """Search node budget (MECHKIT_BUDGET_NODES)."""
    return int(_read_number("MECHKIT_BUDGET_NODES", DEFAULT_NODE_BUDGET))


def get_seconds_budget() -> float:
    """Search wall time budget in seconds (MECHKIT_BUDGET_SECONDS)."""
    return float(_read_number("MECHKIT_BUDGET_SECONDS", DEFAULT_SECONDS_BUDGET, float))


def get_table_budget() -> int:
    """Maximal number of entries of a tabulated mechanism (MECHKIT_TABLE_BUDGET)."""
    return int(_read_number("MECHKIT_TABLE_BUDGET", DEFAULT_TABLE_BUDGET))


def get_coalition_budget() -> int:
    """Work units allowed for a coalition sweep (MECHKIT_COALITION_BUDGET)."""
    return int(_read_number("MECHKIT_COALITION_BUDGET", DEFAULT_COALITION_BUDGET))


def get_profile_limit() -> int:
    """Maximal number of search variables (MECHKIT_PROFILE_LIMIT)."""
    return int(_read_number("MECHKIT_PROFILE_LIMIT", DEFAULT_PROFILE_LIMIT))


def get_threads() -> int:
    """Worker count (MECHKIT_THREADS), defaulting to the available parallelism."""
    return int(_read_number("MECHKIT_THREADS", os.cpu_count() or 1))
