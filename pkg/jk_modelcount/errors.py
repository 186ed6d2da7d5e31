"""
Exception types shared by the model counter modules.
"""


class ModelCountError(Exception):
    """Base class for every error raised by jk_modelcount."""


class DimacsParseError(ModelCountError, ValueError):
    """
    Malformed DIMACS input.

    The message always starts with the offending line number so the node
    outputs and CLI messages point straight at the problem.
    """

    def __init__(self, line_number, message):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {message}")


class ContractError(ModelCountError, ValueError):
    """An operation was called outside its precondition."""


class OracleError(ModelCountError, RuntimeError):
    """
    SAT oracle failure (solver crash, unparsable output, timeout).

    partial_count is the number of projected models enumerated before the
    failure; the counter treats the whole iteration as failed.
    """

    def __init__(self, message, partial_count=0, solver_calls=0):
        self.partial_count = partial_count
        self.solver_calls = solver_calls
        super().__init__(message)


class SearchInconsistencyError(ModelCountError, RuntimeError):
    """Cell verdicts were not monotone in the prefix length."""


class EnumerationGuardError(ModelCountError, ValueError):
    """A brute-force oracle was asked for more than it can enumerate."""
