"""Exception types shared across the toolkit."""


class LimbaError(Exception):
    """Base class for all toolkit errors."""


class DecodeError(LimbaError):
    """Input bytes are not valid UTF-8."""

    def __init__(self, message, record_index=None, byte_offset=None):
        super().__init__(message)
        self.record_index = record_index
        self.byte_offset = byte_offset


class EmptyInputError(LimbaError):
    """An operation received no usable input."""


class DuplicateIdError(LimbaError):
    """Two chunks in one corpus carry the same id."""


class TooSmallError(LimbaError):
    """Input has fewer items than the operation requires."""


class LabelError(LimbaError):
    """A label falls outside the configured label set."""


class CoverageError(LimbaError):
    """A class in the label set has no training examples."""


class ContractError(LimbaError):
    """A model or argument violates an operation's contract."""


class InvalidIdError(LimbaError):
    """A token id is outside the model vocabulary."""


class DivergenceError(LimbaError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class FormatError(LimbaError):
    """A persisted file does not match its expected format."""
