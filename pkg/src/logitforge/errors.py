"""Exception types raised across the package.

Every error callers are expected to handle by name subclasses
LogitForgeError so CLI-level code can map failures to exit codes.
"""


class LogitForgeError(Exception):
    """Base class for all package errors."""


class ConfigError(LogitForgeError):
    """Invalid or malformed run configuration."""


class DimensionMismatch(LogitForgeError):
    """Operands disagree on a required dimension."""


class NoSamplesForClass(LogitForgeError):
    """A class-conditional reduction found zero samples."""


class EmptyDataset(LogitForgeError):
    """A training step received no samples."""


class NonFiniteLoss(LogitForgeError):
    """Training loss left the finite range (learning rate too high)."""


class InvalidDistribution(LogitForgeError):
    """A row expected to be a probability distribution is not one."""


class InvalidK(LogitForgeError):
    """Cluster count outside the valid range for the point set."""


class ZeroVector(LogitForgeError):
    """A zero-norm vector where a direction is required."""


class NotSymmetric(LogitForgeError):
    """Matrix handed to the symmetric eigensolver is not symmetric."""


class NoConvergence(LogitForgeError):
    """Iterative solver hit its iteration cap before converging."""


class EmptyGroup(LogitForgeError):
    """Entropy of an empty tag list is undefined."""


class TooFewClasses(LogitForgeError):
    """Operation needs at least three logit elements."""


class MissingClass(LogitForgeError):
    """A required class has no samples in the provided labels."""


class UnknownClass(LogitForgeError):
    """A sample references a class the shuffle table does not cover."""


class InsufficientData(LogitForgeError):
    """Dataset too small for the requested split."""


class ArchitectureMismatch(LogitForgeError):
    """Parameter averaging requires identical layer dimensions."""


class NonPositiveTemperature(LogitForgeError):
    """Softmax temperature must be strictly positive."""


class ZeroNormRepresentative(LogitForgeError):
    """Cosine similarity is undefined for a zero-norm representative."""


class BadMagic(LogitForgeError):
    """Binary file does not start with the expected magic number."""


class CountMismatch(LogitForgeError):
    """Paired binary files disagree on their record counts."""


class TruncatedFile(LogitForgeError):
    """Binary file ended before the declared payload."""
