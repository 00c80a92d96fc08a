"""
Custom exceptions for the dialogue attention toolkit.
"""


class DialogueError(Exception):
    """Base exception for all dialogue toolkit errors."""


class DimensionError(DialogueError):
    """Operand shapes do not agree."""


class NumericError(DialogueError):
    """A non-finite value reached a numeric routine."""


class ContractError(DialogueError):
    """A caller violated an operation's precondition."""


class ValidationError(DialogueError):
    """Input data or configuration failed validation."""


class ParseError(DialogueError):
    """A text input could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f'line {line_number}: {message}'
        super().__init__(message)
        self.line_number = line_number


class CheckpointError(DialogueError):
    """A checkpoint file could not be read back."""


class ArchitectureMismatchError(CheckpointError):
    """Checkpoint parameters do not match the requested architecture."""


class UsageError(DialogueError):
    """A command-line flag or path is missing or invalid."""
