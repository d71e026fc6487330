"""Exception hierarchy shared by every memd module.

Each error class carries the process exit code the CLI maps it to:
2 for input parsing failures, 3 for configuration/data-shape problems,
4 for numeric failures.
"""


class MemdError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 3


class ParseError(MemdError):
    """Malformed input file. Always reports the offending line number."""

    exit_code = 2

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(MemdError):
    """Invalid option combination or data/model mismatch."""

    exit_code = 3


class EmptyClass(MemdError):
    """A class has no training instances (or no samples for a feature)."""

    exit_code = 3


class EmptyVocabulary(MemdError):
    """Pruning removed every word from the corpus vocabulary."""

    exit_code = 3


class InvalidK(MemdError):
    """Requested feature count exceeds the dimensionality (or is < 1)."""

    exit_code = 3


class InvalidFolds(MemdError):
    """Cross-validation fold count incompatible with the dataset."""

    exit_code = 3


class WrongArity(MemdError):
    """Operation requires a specific number of classes."""

    exit_code = 3


class MissingComplementModels(MemdError):
    """One-vs-all scoring requested on a grid without complement marginals."""

    exit_code = 3


class OracleTooLarge(MemdError):
    """Exhaustive subset enumeration refused beyond test scale."""

    exit_code = 3


class StratificationError(MemdError):
    """Could not produce a class-covering internal validation split."""

    exit_code = 3


class InvalidMoment(MemdError):
    """Moment vector outside the feasible set of the support."""

    exit_code = 4


class SolverDiverged(MemdError):
    """Moment-matching solver failed to converge."""

    exit_code = 4


class IncompatibleDensities(MemdError):
    """Divergence between densities with different support or constraints."""

    exit_code = 4
