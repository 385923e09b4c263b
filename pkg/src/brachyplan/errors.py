"""Exception types shared across the engine."""


class InputError(ValueError):
    """Invalid argument, file content, or precondition violation."""


class ParseError(InputError):
    """Malformed file. Carries a byte or line offset when known."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedFormatError(ParseError):
    """File is well-formed but uses a feature outside the supported subset."""


class InvalidRotationError(InputError):
    """Quaternion or matrix does not describe a proper rotation."""


class DegenerateConfigurationError(InputError):
    """Point configuration does not determine a unique rigid transform."""


class SchemaError(InputError):
    """Serialized plan or config does not match the expected schema version."""


class StageError(RuntimeError):
    """A pipeline or session stage failed or was invoked out of order."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class ConflictError(RuntimeError):
    """Optimistic-concurrency failure: the supplied revision is stale."""
