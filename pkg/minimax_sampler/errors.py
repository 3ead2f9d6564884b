# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

"""Exception types raised by minimax_sampler.

Everything deriving from ``ValidationError`` describes bad input and maps
to CLI exit code 1. Any other exception escaping a command is treated as
an internal error (exit code 2).
"""


class MinimaxSamplerError(Exception):
    """Base class of all package errors."""


class ValidationError(MinimaxSamplerError):
    """Input does not satisfy an operation's preconditions.

    Attributes:
        code (str): Stable diagnostic code, e.g. ``"InvertedInterval"``
        unit_id (str|None): Offending unit id, when one applies
        index (int|None): Offending 0-based unit index, when one applies
    """

    code = "ValidationError"

    def __init__(self, message, unit_id=None, index=None):
        super(ValidationError, self).__init__(message)
        self.unit_id = unit_id
        self.index = index


class EmptyPopulation(ValidationError):
    code = "EmptyPopulation"

    def __init__(self, message="population has no units"):
        super(EmptyPopulation, self).__init__(message)


class InvertedInterval(ValidationError):
    code = "InvertedInterval"

    def __init__(self, unit_id, lower, upper):
        super(InvertedInterval, self).__init__(
            "unit {0!r}: lower bound {1!r} exceeds upper bound {2!r}".format(
                unit_id, lower, upper
            ),
            unit_id=unit_id,
        )


class DuplicateId(ValidationError):
    code = "DuplicateId"

    def __init__(self, unit_id):
        super(DuplicateId, self).__init__(
            "unit id {0!r} appears more than once".format(unit_id),
            unit_id=unit_id,
        )


class DegenerateUnit(ValidationError):
    code = "DegenerateUnit"

    def __init__(self, unit_id, index=None):
        super(DegenerateUnit, self).__init__(
            "unit {0!r} has zero radius; enable strip_degenerate to treat it "
            "as known".format(unit_id),
            unit_id=unit_id,
            index=index,
        )


class LengthMismatch(ValidationError):
    code = "LengthMismatch"

    def __init__(self, expected, actual, what="vector"):
        super(LengthMismatch, self).__init__(
            "{0} has length {1}, expected {2}".format(what, actual, expected)
        )
        self.expected = expected
        self.actual = actual


class DimensionMismatch(LengthMismatch):
    code = "DimensionMismatch"


class InvalidProbability(ValidationError):
    code = "InvalidProbability"


class ZeroInclusion(InvalidProbability):
    code = "ZeroInclusion"

    def __init__(self, index):
        super(ZeroInclusion, self).__init__(
            "unit index {0} has zero inclusion probability".format(index),
            index=index,
        )


class EnumerationTooLarge(ValidationError):
    code = "EnumerationTooLarge"


class PopulationTooLarge(ValidationError):
    code = "PopulationTooLarge"


class PriorTooLarge(ValidationError):
    code = "PriorTooLarge"


class InvalidPrior(ValidationError):
    code = "InvalidPrior"


class BudgetOutOfRange(ValidationError):
    code = "BudgetOutOfRange"

    def __init__(self, budget, population_size):
        super(BudgetOutOfRange, self).__init__(
            "budget n={0!r} must satisfy 0 < n <= N={1}".format(
                budget, population_size
            )
        )
        self.budget = budget


class InfeasibleCandidate(ValidationError):
    code = "InfeasibleCandidate"


class MissingValue(ValidationError):
    code = "MissingValue"

    def __init__(self, index, unit_id=None):
        super(MissingValue, self).__init__(
            "sampled unit {0} has no observed value".format(
                unit_id if unit_id is not None else index
            ),
            unit_id=unit_id,
            index=index,
        )


class IndexOutOfRange(ValidationError):
    code = "IndexOutOfRange"

    def __init__(self, index, population_size):
        super(IndexOutOfRange, self).__init__(
            "unit index {0} outside 0..{1}".format(index, population_size - 1),
            index=index,
        )


class NonpositiveScale(ValidationError):
    code = "NonpositiveScale"


class IncompleteProfile(ValidationError):
    code = "IncompleteProfile"


class BiasedChallenger(ValidationError):
    code = "BiasedChallenger"


class CapabilityError(ValidationError):
    """A design lacks a capability (enumeration, exact second order)."""

    code = "CapabilityError"


class InputFormatError(ValidationError):
    """An input file cannot be parsed.

    Attributes:
        path (str|None): File the error was found in
        line (int|None): 1-based line number, when known
    """

    code = "InputFormatError"

    def __init__(self, message, path=None, line=None):
        location = ""
        if path is not None:
            location = "{0}".format(path)
            if line is not None:
                location += ":{0}".format(line)
            location += ": "
        super(InputFormatError, self).__init__(location + message)
        self.path = path
        self.line = line
