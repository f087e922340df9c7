"""Exception hierarchy shared across the package."""


class AiryEvolveError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(AiryEvolveError, ValueError):
    """An argument lies outside the supported evaluation domain."""


class ParameterError(AiryEvolveError, ValueError):
    """A physical or numerical parameter is invalid."""


class StateError(AiryEvolveError, ValueError):
    """A wave field holds non-finite samples."""


class ConfigurationError(AiryEvolveError, ValueError):
    """A scenario or evolution request is inconsistent."""


class MissingKeyError(ConfigurationError, KeyError):
    """A required scenario key is absent."""

    def __init__(self, key):
        self.key = key
        super().__init__(f"missing required key {key!r}")

    def __str__(self):
        return self.args[0]


class DivergenceError(AiryEvolveError, ArithmeticError):
    """The numeric evolution produced NaN or inf."""

    def __init__(self, step_index, t=None):
        self.step_index = step_index
        self.t = t
        msg = f"non-finite field after step {step_index}"
        if t is not None:
            msg += f" (t = {t:.6g})"
        super().__init__(msg)


class TrackingLostError(AiryEvolveError, RuntimeError):
    """The packet peak left its search window."""


class DegenerateWindowError(AiryEvolveError, ValueError):
    """No sample in the comparison window qualifies."""
