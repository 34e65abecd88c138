"""Exception types shared across the toolkit."""


class AwaPdError(Exception):
    """Base class for all toolkit errors."""


class MalformedInput(AwaPdError, ValueError):
    """An input file or record violates the documented format."""


class InvalidArgument(AwaPdError, ValueError):
    """A caller-supplied value violates a documented precondition."""


class ModelFormatError(AwaPdError):
    """A serialized model file cannot be loaded (truncated, wrong schema, wrong version)."""


class PipelineError(AwaPdError):
    """A pipeline stage failed; carries the stage name and the original cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
