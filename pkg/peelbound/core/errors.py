"""
Exception hierarchy shared by the solver services, the CLI and the HTTP layer
"""

from typing import Optional


class PeelBoundError(Exception):
    """Base class for every error raised by peelbound"""


class NumericalError(PeelBoundError):
    """An iterative kernel did not converge"""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class DegenerateGeometryError(PeelBoundError):
    """Transfer plane undefined (transfer angle of 0 or pi)"""


class InstanceError(PeelBoundError):
    """Invalid problem instance or tour"""


class InstanceParseError(InstanceError):
    """Malformed instance file"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if column is not None:
            location.append(f"column '{column}'")
        prefix = f"{', '.join(location)}: " if location else ""
        super().__init__(f"{prefix}{message}")
        self.line = line
        self.column = column


class ContractViolation(PeelBoundError):
    """An operation was called outside its precondition"""


class SnapshotError(PeelBoundError):
    """Unreadable or incompatible memo snapshot"""
