"""
Metrics module for mechkit.

This module provides metrics functionality for tracking command usage and performance.
"""

from .metrics import (
    CHECK_LATENCY,
    SEARCH_NODES,
    TABULATION_LATENCY,
    initiate_metrics,
    track_command_usage,
    write_metrics,
)

__all__ = [
    "CHECK_LATENCY",
    "SEARCH_NODES",
    "TABULATION_LATENCY",
    "initiate_metrics",
    "track_command_usage",
    "write_metrics",
]
