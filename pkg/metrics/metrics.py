"""
Metrics for mechkit.

This module provides prometheus metrics for commands, checkers, tabulation
and search, and writes them to a text file on request.
"""

from typing import Callable, Any
from functools import wraps

from prometheus_client import REGISTRY, Counter, Histogram, write_to_textfile


# Define counter for command count
COMMAND_COUNT = Counter(
    "mechkit_command_count",
    "Command count",
    ["command"],
)

# Define histogram for command latency
COMMAND_LATENCY = Histogram(
    "mechkit_command_duration",
    "Command latency",
    ["command"],
    buckets=(0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 60.0, 600.0, float("inf")),
)

# Define histogram for checker latency
CHECK_LATENCY = Histogram(
    "mechkit_check_duration_seconds",
    "Duration of an axiom check",
    ["axiom"],
    buckets=(0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, float("inf")),
)

# Define histogram for tabulation latency
TABULATION_LATENCY = Histogram(
    "mechkit_tabulation_duration_seconds",
    "Duration of mechanism tabulation",
    ["mechanism"],
    buckets=(0.001, 0.01, 0.1, 1.0, 10.0, 60.0, float("inf")),
)

# Define counter for explored search nodes
SEARCH_NODES = Counter(
    "mechkit_search_nodes",
    "Backtracking nodes explored by the exhaustive search",
)


def initiate_metrics(commands: list[str]) -> None:
    """Initiate metrics."""
    for command in commands:
        COMMAND_COUNT.labels(command=command).inc(0)
        COMMAND_LATENCY.labels(command=command)


def track_command_usage() -> Callable:
    """Decorate CLI commands with this decorator to track command usage metrics."""

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            command_name = func.__name__.removeprefix("cmd_")
            COMMAND_COUNT.labels(command=command_name).inc()
            with COMMAND_LATENCY.labels(command=command_name).time():
                response = func(*args, **kwargs)
            return response

        return wrapper

    return decorator


def write_metrics(path: str) -> None:
    """Write the default registry in the text exposition format."""
    write_to_textfile(path, REGISTRY)
