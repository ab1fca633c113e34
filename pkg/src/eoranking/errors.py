"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 2 for malformed input,
3 for semantic/constraint problems, 4 for numerical failures.
"""


class EORError(Exception):
    exit_code = 3


class InputError(EORError):
    """Malformed input (bad CSV, missing column, duplicate positions)."""

    exit_code = 2


class InvalidPool(EORError):
    pass


class EmptyGroup(InvalidPool):
    pass


class DegenerateRelevance(InvalidPool):
    pass


class WrongGroupCount(EORError):
    pass


class MissingLabels(EORError):
    pass


class InvalidPrior(EORError):
    pass


class BadParams(EORError):
    pass


class NotStochastic(EORError):
    pass


class Infeasible(EORError):
    pass


class TooLarge(EORError):
    pass


class MatchFailure(EORError):
    pass


class SingleClass(EORError):
    pass


class NumericalFailure(EORError):
    exit_code = 4
