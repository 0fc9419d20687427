"""
Exception hierarchy for mechkit.

This module provides the error classes raised by the library and a decorator
that converts them into command exit codes while logging the failure.
"""

from typing import Any, Callable, TypeVar, ParamSpec
from functools import wraps

from mechkit.logger import log


class MechkitError(Exception):
    """Base class for all mechkit errors."""


class ArgumentError(MechkitError, ValueError):
    """A precondition on an operation's arguments was violated."""


class ValidationError(MechkitError):
    """Mechanism parameters failed construction-time validation.

    Attributes:
        allocation: The violating allocation, if the failure is tied to one.
        agent: The violating agent, if the failure is tied to one.
    """

    def __init__(
        self,
        message: str,
        allocation: tuple[int, ...] | None = None,
        agent: int | None = None,
    ) -> None:
        super().__init__(message)
        self.allocation = allocation
        self.agent = agent


class DefectError(MechkitError):
    """A state that valid inputs can never reach was observed."""


class ResourceError(MechkitError):
    """A configured budget is too small for the requested work."""

    def __init__(self, message: str, required: int | float, budget: int | float) -> None:
        super().__init__(f"{message} (required {required}, budget {budget})")
        self.required = required
        self.budget = budget


class SearchIncompleteError(ResourceError):
    """The search ran out of budget; `partial` holds what was found so far."""

    def __init__(
        self, message: str, required: int | float, budget: int | float, partial: Any
    ) -> None:
        super().__init__(message, required, budget)
        self.partial = partial


class ParseError(MechkitError):
    """An input file or argument could not be parsed."""

    def __init__(
        self, message: str, line: int | None = None, field: str | None = None
    ) -> None:
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
        self.line = line
        self.field = field


EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3
EXIT_DEFECT = 4

# Type variables for the decorator
P = ParamSpec("P")
T = TypeVar("T")


def exit_code_on_error(func: Callable[P, int]) -> Callable[P, int]:
    """
    Decorate a command handler to turn exceptions into exit codes.

    The operation name for logging is automatically derived from the function name.
    Parse and argument problems map to EXIT_USAGE, exhausted budgets to
    EXIT_RESOURCE, anything else to EXIT_DEFECT.

    Returns:
        Decorated function returning the command's exit code
    """

    @wraps(func)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> int:
        operation_name = func.__name__
        try:
            return func(*args, **kwargs)
        except (ParseError, ArgumentError, ValidationError) as e:
            log.error("Invalid input during %s: %s", operation_name, str(e))
            return EXIT_USAGE
        except ResourceError as e:
            log.error(
                "Budget exhausted during %s: %s (suggestion: raise the budget%s)",
                operation_name,
                str(e),
                " or use --engine fast" if "coalition" in str(e) else "",
            )
            return EXIT_RESOURCE
        except OSError as e:
            log.error("I/O error during %s: %s", operation_name, str(e))
            return EXIT_USAGE
        except Exception as e:
            log.exception("Unexpected error during %s: %s", operation_name, str(e))
            return EXIT_DEFECT

    return wrapper
