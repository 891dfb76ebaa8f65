"""Exception types raised by the kypcert solvers and the CLI."""


class KypcertError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(KypcertError):
    """Matrix or vector dimensions are inconsistent with the operation."""


class SolveError(KypcertError):
    """A linear or quadratic matrix equation has no reliable solution."""


class PoleOnGridError(KypcertError):
    """A frequency grid point coincides with an imaginary-axis pole."""


class SubspaceError(KypcertError):
    """An invariant subspace does not define a graph (X1 block singular)."""


class StabilizationError(KypcertError):
    """No stabilizing feedback could be constructed."""


class IterationError(KypcertError):
    """A Newton-type iteration left its region of validity or diverged."""


class UnreachableTargetError(KypcertError):
    """A steering target lies outside the controllable subspace."""


class NotViolatingError(KypcertError):
    """A requested witness direction does not violate the frequency condition."""


class GainBracketError(KypcertError):
    """Gain bisection exhausted its bracket; carries the last upper bound."""

    def __init__(self, message: str, upper_bound: float):
        super().__init__(message)
        self.upper_bound = upper_bound


class SystemFileError(KypcertError):
    """A system description file is malformed.  Carries a short error code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
