class HashCFError(Exception):
    """Base class for every error raised by hashcf."""


class InvalidInputError(HashCFError, ValueError):
    pass


class DimensionError(HashCFError, ValueError):
    """Two codes (or a code and a table) disagree on bit length."""


class ConfigurationError(HashCFError, ValueError):
    pass


class ParseError(HashCFError, ValueError):
    def __init__(self, message: str, line_number: int = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EntityLookupError(HashCFError, IndexError):
    pass


class EvaluationError(HashCFError, LookupError):
    pass


class ResourceError(HashCFError, MemoryError):
    pass


class ChecksumMismatchError(HashCFError, RuntimeError):
    pass


class TrainingDivergedError(HashCFError, RuntimeError):
    pass


class ArtifactNotFoundError(HashCFError, FileNotFoundError):
    pass
