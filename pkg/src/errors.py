"""
Exception hierarchy for xbranch.

Library code raises these; only the command layer turns them into exit codes.
"""


class XBranchError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 1


class ConfigError(XBranchError):
    """Invalid or unknown configuration."""


class DimensionError(XBranchError, ValueError):
    """Tensor shapes do not agree."""


class SizeError(XBranchError, ValueError):
    """A requested count does not fit the data (n > N, k > N, ...)."""


class EmptyGroupError(SizeError):
    """Pooling over an empty axis."""


class LabelError(XBranchError, IndexError):
    """Class or part label outside its vocabulary."""


class DuplicatePointError(XBranchError, ValueError):
    """Strict ingest found coincident points."""


class ParseError(XBranchError, ValueError):
    """Malformed XYZ/OFF/manifest input."""

    def __init__(self, message, line=None, column=None, source=None):
        self.line = line
        self.column = column
        self.source = source
        where = []
        if source:
            where.append(str(source))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class DegenerateMeshError(XBranchError, ValueError):
    """Mesh with zero total surface area."""


class CheckpointError(XBranchError):
    """Unreadable checkpoint or checkpoint/model mismatch."""


class NumericError(XBranchError, ArithmeticError):
    """Non-finite values where finite ones are required."""

    exit_code = 2


class ContractError(XBranchError, RuntimeError):
    """API used outside its contract (e.g. backward on a non-scalar)."""

    exit_code = 3


class DeterminismError(ContractError):
    """A closure that should be deterministic returned different values."""


class CheckFailed(XBranchError):
    """A verification (gradient check) did not meet its tolerance."""

    exit_code = 3
