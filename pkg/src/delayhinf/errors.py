"""Exception hierarchy.

Three families, matching the CLI exit codes: bad input (2), numerical
failure (3) and an unstable system (4).
"""


class DelayHinfError(Exception):
    category = "error"
    exit_code = 1


class InputError(DelayHinfError, ValueError):
    category = "input"
    exit_code = 2


class ParseError(InputError):
    category = "parse"


class DimensionError(InputError):
    category = "dimension"


class NumericalError(DelayHinfError, ArithmeticError):
    category = "numerical"
    exit_code = 3


class SingularResolventError(NumericalError):
    category = "singular-resolvent"


class SingularDxiError(NumericalError):
    """``D^T D - xi^2 I`` is (numerically) singular at the requested level."""

    category = "singular-dxi"


class PoleError(NumericalError):
    """The collocation polynomial system is singular: ``lam`` is a pole."""

    category = "pole"

    def __init__(self, lam, msg=None):
        self.lam = lam
        super().__init__(msg or f"lambda={lam!r} is a pole of the collocation approximant")


class ConvergenceError(NumericalError):
    category = "convergence"


class UnreachableTargetError(InputError):
    category = "unreachable-target"


class InstabilityError(DelayHinfError):
    category = "instability"
    exit_code = 4

    def __init__(self, rightmost, msg=None):
        self.rightmost = rightmost
        super().__init__(
            msg
            or f"system is not exponentially stable: rightmost root estimate {rightmost:.6g}"
        )
