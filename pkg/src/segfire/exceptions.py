"""Exception types shared across the package."""


class SegfireError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SegfireError, ValueError):
    """An argument has the wrong shape, range or vocabulary."""


class InvalidStateError(SegfireError, RuntimeError):
    """An object is not in a state that allows the requested operation."""


class FormatError(SegfireError, ValueError):
    """A file on disk is malformed, truncated or fails its checksum."""


class BuildError(SegfireError, ValueError):
    """A model configuration produces an empty or inconsistent layer."""


class PipelineError(SegfireError, RuntimeError):
    """The detection pipeline could not deliver an event.

    The event that was being delivered is kept on ``pending_event``.
    """

    def __init__(self, message, pending_event=None):
        super().__init__(message)
        self.pending_event = pending_event
