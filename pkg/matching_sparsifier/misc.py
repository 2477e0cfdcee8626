import math
import traceback

from fractions import Fraction
from functools import wraps
from typing import Callable, ParamSpec, TypeVar


class ParseError(Exception):
    pass


class CapExceeded(Exception):
    """
    Raised when an instance is larger than an exact solver can handle.
    """

    pass


class IterationOverflow(Exception):
    pass


class ParameterOverflow(Exception):
    pass


class DegenerateDenominator(Exception):
    pass


class InvalidWalk(Exception):
    pass


class RecursionBudgetExceeded(Exception):
    pass


class NoEligiblePairs(Exception):
    pass


class ReportError(Exception):
    pass


# Above this many bits, Δ^λ is compared in log-space.
LOG_SPACE_BITS = 512


def at_least_scaled(
    value: Fraction, coefficient: Fraction, delta: int, lam: int
) -> bool:
    """
    Returns whether `value >= coefficient * delta ** (-lam)`.

    The comparison is exact unless `delta ** lam` has more than
    `LOG_SPACE_BITS` bits, in which case it is evaluated on logarithms.
    """
    if coefficient <= 0:
        return value >= 0
    if delta <= 1 or lam * math.log2(delta) <= LOG_SPACE_BITS:
        return value * delta**lam >= coefficient
    if value <= 0:
        return False
    lhs = math.log(value.numerator) - math.log(value.denominator)
    rhs = (
        math.log(coefficient.numerator)
        - math.log(coefficient.denominator)
        - lam * math.log(delta)
    )
    return lhs >= rhs


def at_most_scaled(
    value: Fraction, coefficient: Fraction, delta: int, lam: int
) -> bool:
    """
    Returns whether `value <= coefficient * delta ** (-lam)`.
    """
    if value <= 0:
        return True
    if delta <= 1 or lam * math.log2(delta) <= LOG_SPACE_BITS:
        return value * delta**lam <= coefficient
    lhs = math.log(value.numerator) - math.log(value.denominator)
    rhs = (
        math.log(coefficient.numerator)
        - math.log(coefficient.denominator)
        - lam * math.log(delta)
    )
    return lhs <= rhs


def scaled(coefficient: Fraction, delta: int, lam: int) -> float:
    """
    `coefficient * delta ** (-lam)` as a float, for reports only.
    """
    if delta <= 1:
        return float(coefficient)
    return float(coefficient) * math.exp(-lam * math.log(delta))


GenericReturn = TypeVar("GenericReturn")
GenericParams = ParamSpec("GenericParams")


def with_exception_trace(
    f: Callable[GenericParams, GenericReturn]
) -> Callable[GenericParams, GenericReturn]:
    @wraps(f)
    def wrapped_f(
        *args: GenericParams.args, **kwargs: GenericParams.kwargs
    ) -> GenericReturn:
        try:
            return f(*args, **kwargs)
        except:
            traceback.print_exc()
            raise

    return wrapped_f
