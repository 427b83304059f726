"""Exception types shared across the package."""


class PackingError(Exception):
    """Base class for every error raised by this package."""


class InstanceTooLarge(PackingError):
    pass


class PreconditionViolated(PackingError):
    pass


class UnknownItem(PackingError, KeyError):
    pass


class PotentialViolation(PackingError):
    """The lexicographic potential failed to increase. Always a bug."""


class StepLimitReached(PackingError):
    """Dynamics stopped at ``max_steps`` while improving moves remained.

    The partial configuration and trace are attached so callers can inspect
    or resume the run.
    """

    def __init__(self, message, config=None, trace=None):
        super().__init__(message)
        self.config = config
        self.trace = trace


class SearchSpaceTooLarge(PackingError):
    pass


class BadEpsilon(PackingError, ValueError):
    pass


class BadN(PackingError, ValueError):
    pass


class BadSigmaK(PackingError, ValueError):
    pass


class NotAnEquilibrium(PackingError):
    pass
