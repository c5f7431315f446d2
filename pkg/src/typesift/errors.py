"""Exception types shared across the package."""


class TypesiftError(Exception):
    """Base class for all typesift-specific errors."""


class EmptyFileError(TypesiftError):
    """Raised when a zero-length input is featurized."""


class DimensionMismatchError(TypesiftError):
    """Shapes of an input do not match a network layer."""


class EmptySupervisedSetError(TypesiftError):
    """Training requested with no supervised samples."""


class FormatError(TypesiftError):
    """A feature-cache file violates the CSV contract.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ChecksumError(TypesiftError):
    """Feature-cache trailer hash does not match the file contents."""


class BadMagicError(TypesiftError):
    """Model file does not start with the expected magic bytes."""


class VersionUnsupportedError(TypesiftError):
    """Model file declares a format version this build cannot read."""


class HashMismatchError(TypesiftError):
    """Model file integrity hash does not verify."""


class CountMismatchError(TypesiftError):
    """Model file parameter payload disagrees with its declared shapes."""
