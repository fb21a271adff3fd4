"""Exception hierarchy shared by every talkit module."""

from __future__ import annotations


class TalError(Exception):
    """Base class for all toolkit errors."""


class DomainError(TalError, ValueError):
    """An argument falls outside the domain of an operation."""


class InputError(TalError, ValueError):
    """Inputs are individually fine but inconsistent with each other."""


class ParseError(TalError):
    """A file could not be read as the expected format."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class ValidationError(TalError):
    """Content parsed fine but violates one or more invariants.

    ``violations`` holds every problem found, not just the first.
    """

    def __init__(self, violations, path=None):
        self.violations = list(violations)
        self.path = path
        head = f"{path}: " if path is not None else ""
        lines = [f"{head}{len(self.violations)} violation(s)"]
        lines += [f"  {v}" for v in self.violations]
        super().__init__("\n".join(lines))


class GenerationError(TalError):
    """A simulator configuration cannot be realised."""
