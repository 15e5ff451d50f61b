"""Exception hierarchy shared across the pipeline.

Exit-code mapping used by the CLI: InputError -> 2, ValidationError -> 3,
BackendError -> 4.
"""


class AirsegError(Exception):
    """Base class for all pipeline errors."""


class InputError(AirsegError):
    """Unreadable, malformed or missing input file."""


class FormatError(InputError):
    """A file does not conform to its declared on-disk format."""


class ValidationError(AirsegError):
    """Data violates a contract (shape mismatch, out-of-range values...)."""


class BackendError(AirsegError):
    """External segmenter backend failed (bad exit status, missing output)."""
