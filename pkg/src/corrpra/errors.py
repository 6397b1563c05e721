"""Exception hierarchy.

``InputError`` covers malformed or inconsistent inputs; ``NumericalError``
covers failures of the computation itself. The CLI maps the two families
to exit statuses 1 and 2.
"""


class PraError(Exception):
    """Base class for all errors raised by this package."""


class InputError(PraError, ValueError):
    pass


class NumericalError(PraError, ArithmeticError):
    pass


# ingestion
class MissingCell(InputError):
    pass


class UnknownSector(InputError):
    pass


class DuplicateRow(InputError):
    pass


class UnknownAsset(InputError):
    pass


# shapes and ranges
class NotSquare(InputError):
    pass


class NonFinite(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class IndexOutOfRange(InputError, IndexError):
    pass


class ZeroVector(InputError):
    pass


class SeriesTooShort(InputError):
    pass


class EmptySector(InputError):
    pass


class SampleTooSmall(InputError):
    pass


class EmptyNull(InputError):
    pass


class EmptyGroup(InputError):
    pass


class NotPositiveSemiDefinite(InputError):
    pass


# numerical failures
class ZeroVariance(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class CollinearFactors(NumericalError):
    pass


class DegenerateRange(NumericalError):
    pass


class Infeasible(NumericalError):
    pass
