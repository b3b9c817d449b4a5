"""Exception types shared across the library."""


class AdembedError(ValueError):
    """Base class for all library errors."""


class ShapeError(AdembedError):
    """Mismatched or invalid array dimensions."""


class DomainError(AdembedError):
    """Parameter outside its mathematical domain."""


class DegenerateInputError(AdembedError):
    """Input for which the requested operation is undefined (e.g. a zero signal)."""


class FormatError(AdembedError):
    """Malformed binary file. ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
