"""Exception hierarchy shared by the simulator and the identification pipeline."""


class SloshError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(SloshError, ValueError):
    """An input lies outside the domain of a function."""


class ConfigurationError(SloshError, ValueError):
    """A configuration or template is malformed or degenerate."""


class NumericBlowupError(SloshError, FloatingPointError):
    """A simulated quantity became non-finite or exceeded the blowup threshold.

    Attributes:
        index: offending particle / coordinate index, if known.
        step: fast-step counter at which the blowup was detected, if known.
        last_state: last finite state before the blowup, if available.
    """

    def __init__(self, message, index=None, step=None, last_state=None):
        super().__init__(message)
        self.index = index
        self.step = step
        self.last_state = last_state


class SettlingError(SloshError, RuntimeError):
    """The fluid did not come to rest within the allotted time."""

    def __init__(self, message, max_speed=None):
        super().__init__(message)
        self.max_speed = max_speed


class ToleranceError(SloshError, ArithmeticError):
    """A finite-difference step under- or overflowed."""


class IdentificationError(SloshError, RuntimeError):
    """Subspace identification failed (e.g. rank deficiency)."""


class DivergenceError(SloshError, FloatingPointError):
    """A surrogate rollout produced a non-finite state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class TrainingError(SloshError, RuntimeError):
    """Every training restart diverged."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or []
