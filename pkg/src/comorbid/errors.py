"""Exception hierarchy shared across the package."""


class ComorbidError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ComorbidError, ValueError):
    """Input violates a documented precondition or invariant."""


class FormatError(ComorbidError, ValueError):
    """A file does not conform to its declared format."""


class UnmappedCodeError(ComorbidError, KeyError):
    """An ICD-10 category falls outside every chapter range."""

    def __str__(self):
        return self.args[0] if self.args else "unmapped code"


class EmptyIntersectionError(ComorbidError, ValueError):
    """Two vocabularies share no codes."""


class LlmParseError(ComorbidError, ValueError):
    """An LLM response carries no usable JSON answer.

    The offending raw text is kept on the exception for postmortems.
    """

    def __init__(self, message, raw=""):
        super().__init__(message)
        self.raw = raw


class StageError(ComorbidError, RuntimeError):
    """A pipeline stage failed; carries the stage name."""

    def __init__(self, stage, message):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
