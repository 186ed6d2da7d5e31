"""
jk_modelcount

Approximate projected model counting with sparse prefix hashing.
"""

from .counter import CountEstimate, CounterParams, approxmc5
from .density import build_schedule, density_table
from .errors import (
    ContractError,
    DimacsParseError,
    EnumerationGuardError,
    ModelCountError,
    OracleError,
    SearchInconsistencyError,
)
from .formula import CnfFormula, XorConstraint, XorEncoding, parse_dimacs, read_dimacs
from .oracle import OracleConfig, bounded_count

__version__ = "0.1.0"

__all__ = [
    "CountEstimate",
    "CounterParams",
    "approxmc5",
    "build_schedule",
    "density_table",
    "ContractError",
    "DimacsParseError",
    "EnumerationGuardError",
    "ModelCountError",
    "OracleError",
    "SearchInconsistencyError",
    "CnfFormula",
    "XorConstraint",
    "XorEncoding",
    "parse_dimacs",
    "read_dimacs",
    "OracleConfig",
    "bounded_count",
]
