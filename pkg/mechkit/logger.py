"""
Logging utilities with compaction of bulky payloads.

This module provides logging configuration and formatting utilities that
keep log records readable when they carry tabulated mechanisms, long
profile dumps or other large integer sequences.
"""

# -*- coding: utf-8 -*-
import logging
import os
import re
import sys


class CompactFormatter(logging.Formatter):
    """Formatter that collapses long integer runs and truncates huge messages."""

    # Default log format used by this formatter
    DEFAULT_FORMAT = "%(asctime)s - %(name)s - %(levelname)-8s - %(thread)d:%(process)d - %(message)s - (%(pathname)s:%(lineno)d)->%(funcName)s"

    # Runs longer than this many comma separated integers are collapsed
    MAX_RUN = 12

    def __init__(self, fmt: str | None = None, max_message: int | None = None) -> None:
        """Initialize with default format and message limit if none provided."""
        if fmt is None:
            fmt = self.DEFAULT_FORMAT
        if max_message is None:
            max_message = get_max_message_length()
        super().__init__(fmt)
        self.max_message = max_message

    @classmethod
    def _filter(cls, s: str) -> str:
        # Integer sequence filter, e.g. "[3, 0, 5, 1, ...]" from a table dump
        pattern = r"(-?\d+)((?:,\s*-?\d+){%d,})" % cls.MAX_RUN

        def _collapse(match: re.Match[str]) -> str:
            count = match.group(0).count(",") + 1
            head = ", ".join(re.split(r",\s*", match.group(0))[:3])
            return f"{head}, ... <{count} values>"

        return re.sub(pattern, _collapse, s)

    def format(self, record: logging.LogRecord) -> str:
        """
        Format log record while compacting bulky payloads.

        Args:
            record: The LogRecord instance to be formatted.

        Returns:
            str: The formatted log message with long runs collapsed.
        """
        original = logging.Formatter.format(self, record)
        compact = self._filter(original)
        if len(compact) > self.max_message:
            omitted = len(compact) - self.max_message
            compact = f"{compact[: self.max_message]}... <{omitted} chars omitted>"
        return compact


def get_logging_level() -> int:
    """
    Get the logging level from environment variable.

    Returns:
        int: The logging level (defaults to INFO if not set or invalid).
    """
    level = os.environ.get("LOGGING_LEVEL", "")
    return getattr(logging, level.upper(), logging.INFO) if level else logging.INFO


def get_max_message_length() -> int:
    """
    Get the maximal formatted message length from environment variable.

    Returns:
        int: The limit (defaults to 4000 if not set or invalid).
    """
    raw = os.environ.get("LOG_MAX_MESSAGE", "")
    try:
        return max(80, int(raw)) if raw else 4000
    except ValueError:
        return 4000


def add_log_file_handler(logger: logging.Logger, filename: str) -> logging.FileHandler:
    """
    Add a file handler to the logger with payload compaction.

    Args:
        logger: The logger instance to add the handler to.
        filename: The path to the log file.

    Returns:
        logging.FileHandler: The created file handler.
    """
    fh = logging.FileHandler(filename)
    fh.setFormatter(CompactFormatter())
    logger.addHandler(fh)
    return fh


def add_stream_handler(logger: logging.Logger) -> None:
    """
    Add a stream handler to the logger with payload compaction.

    Args:
        logger: The logger instance to add the handler to.
    """
    ch = logging.StreamHandler(sys.stderr)
    ch.setFormatter(CompactFormatter())
    logger.addHandler(ch)


logger_name = os.environ.get("LOGGER_NAME", "mechkit")

log = logging.getLogger(logger_name)
log.setLevel(get_logging_level())
log.propagate = False

# Log files are opt-in for a command line tool
log_to_file = os.environ.get("LOG_TO_FILE", "false").lower() == "true"

if log_to_file:
    add_log_file_handler(log, "mechkit.log")

add_stream_handler(log)
