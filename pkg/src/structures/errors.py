"""
All exceptions raised by the project.

Each top-level error carries the process exit code used by the command
line tool.
"""


class PromptError(Exception):
    """Base class for every error raised by the project."""

    exit_code: int = 1


class ValidationError(PromptError):
    """Raised when an input, config value or invariant is invalid."""

    exit_code = 1


class CapacityOverflowError(ValidationError):
    """Raised when prompts push the EOS token past the context length."""


class FingerprintMismatchError(ValidationError):
    """Raised when a checkpoint was trained against different weights."""


class DegenerateEnsembleError(ValidationError):
    """Raised when averaged features cancel out to a zero vector."""


class NumericFailure(PromptError):
    """Raised when a NaN or infinite value is produced."""

    exit_code = 2


class ArtifactIOError(PromptError):
    """Raised when an artifact cannot be read or written."""

    exit_code = 3


class LlmClientError(ArtifactIOError):
    """Raised when the LLM client fails after exhausting its retries."""
