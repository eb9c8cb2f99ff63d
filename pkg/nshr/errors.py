"""Exception hierarchy.

Every error also derives from the builtin a caller would naturally catch
(``ValueError`` for bad inputs, ``RuntimeError`` for integration failures).
"""


class NshrError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(NshrError, ValueError):
    pass


class DimensionError(InvalidParameterError):
    pass


class BracketError(InvalidParameterError):
    pass


class MissingZeroError(InvalidParameterError):
    pass


class ConfigError(InvalidParameterError):
    pass


class InsufficientSamplesError(NshrError, ValueError):
    """Too few usable samples in a window.

    ``floor_hit`` is True when samples existed but had already decayed to the
    numerical floor, which is reported instead of a slope.
    """

    def __init__(self, message: str, floor_hit: bool = False):
        super().__init__(message)
        self.floor_hit = floor_hit


class NonFiniteError(NshrError, ArithmeticError):
    def __init__(self, quantity: str, message: str | None = None):
        super().__init__(message or f"non-finite value in {quantity}")
        self.quantity = quantity


class UnsupportedDynamicError(NshrError, NotImplementedError):
    pass


class IntegrationError(NshrError, RuntimeError):
    pass


class StepSizeUnderflowError(IntegrationError):
    def __init__(self, t: float, h: float):
        super().__init__(f"step size underflow at t={t!r} (h={h:.3e})")
        self.t = t
        self.h = h


class MaxStepsExceededError(IntegrationError):
    def __init__(self, t: float, max_steps: int):
        super().__init__(f"exceeded {max_steps} steps before reaching the end (stopped at t={t!r})")
        self.t = t
        self.max_steps = max_steps
