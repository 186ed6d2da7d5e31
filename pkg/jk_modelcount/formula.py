"""
CNF Formula Model for JK-ModelCounter

DIMACS reading/writing with projection (sampling) sets, XOR augmentation for
hash rows, and blocking clauses for model enumeration.

Accepted input lines:
- `p cnf <vars> <clauses>` header
- `c ind v1 v2 ... 0` and `c p show v1 v2 ... 0` projection lines
- plain clauses terminated by 0 (may span lines)
- `x1 -2 3 0` XOR lines, meaning x1 ⊕ ¬x2 ⊕ x3 = true
"""

import itertools
import logging
from dataclasses import dataclass, replace

from .errors import ContractError, DimacsParseError

logger = logging.getLogger(__name__)

DEFAULT_TSEITIN_WIDTH = 5
PROJECTION_LINE_CHUNK = 10


@dataclass(frozen=True)
class XorConstraint:
    """
    Parity constraint: XOR of `variables` equals `rhs`.

    A variable listed twice cancels out. An empty variable set is the
    degenerate row `0 = rhs` (unsatisfiable when rhs is 1).
    """

    variables: tuple = ()
    rhs: int = 0

    def __post_init__(self):
        odd = set()
        for var in self.variables:
            var = int(var)
            if var <= 0:
                raise ContractError(f"XOR variable must be positive, got {var}")
            odd ^= {var}
        object.__setattr__(self, "variables", tuple(sorted(odd)))
        object.__setattr__(self, "rhs", int(self.rhs) & 1)

    @property
    def width(self):
        return len(self.variables)

    def is_satisfied(self, assignment):
        parity = 0
        for var in self.variables:
            if assignment.get(var):
                parity ^= 1
        return parity == self.rhs

    def to_dimacs(self):
        """Render as an `x` line; a negated first literal encodes rhs = 0."""
        if not self.variables:
            return "x 0"
        literals = list(self.variables)
        if self.rhs == 0:
            literals[0] = -literals[0]
        return "x" + " ".join(str(lit) for lit in literals) + " 0"


@dataclass(frozen=True)
class XorEncoding:
    """
    How XOR rows reach the solver.

    native  - rows are attached verbatim (solver handles parity itself)
    tseitin - rows are cut into chained XORs of at most max_width variables,
              each expanded into its 2^(width-1) CNF clauses
    """

    mode: str = "native"
    max_width: int = DEFAULT_TSEITIN_WIDTH

    def __post_init__(self):
        if self.mode not in ("native", "tseitin"):
            raise ContractError(f"Unknown XOR mode '{self.mode}' (expected native or tseitin)")
        if self.mode == "tseitin" and self.max_width < 3:
            raise ContractError(f"Tseitin max_width must be >= 3, got {self.max_width}")

    @classmethod
    def parse(cls, text):
        """Parse 'native', 'tseitin' or 'tseitin:<width>'."""
        text = text.strip().lower()
        if text == "native":
            return cls("native")
        if text == "tseitin":
            return cls("tseitin", DEFAULT_TSEITIN_WIDTH)
        if text.startswith("tseitin:"):
            try:
                width = int(text.split(":", 1)[1])
            except ValueError:
                raise ContractError(f"Invalid Tseitin width in '{text}'")
            return cls("tseitin", width)
        raise ContractError(f"Unknown XOR mode '{text}' (expected native or tseitin:<w>)")

    def __str__(self):
        return "native" if self.mode == "native" else f"tseitin:{self.max_width}"


def normalize_clause(literals):
    """
    Deduplicate literals, keeping first occurrence order.

    Returns:
        tuple of literals, or None when the clause is a tautology
    """
    seen = []
    present = set()
    for lit in literals:
        lit = int(lit)
        if -lit in present:
            return None
        if lit not in present:
            present.add(lit)
            seen.append(lit)
    return tuple(seen)


@dataclass(frozen=True)
class CnfFormula:
    """
    Clause database with a projection set and optional attached XOR rows.

    Immutable; every transformation returns a new formula. The projection
    defaults to all variables (plain #SAT).
    """

    num_vars: int
    clauses: tuple = ()
    projection: tuple = ()
    xors: tuple = ()

    def __post_init__(self):
        num_vars = int(self.num_vars)
        if num_vars < 1:
            raise ContractError(f"num_vars must be positive, got {num_vars}")

        clauses = []
        for clause in self.clauses:
            normalized = normalize_clause(clause)
            if normalized is None:
                raise ContractError(f"Clause {tuple(clause)} contains both v and -v")
            for lit in normalized:
                if lit == 0 or abs(lit) > num_vars:
                    raise ContractError(f"Literal {lit} out of range 1..{num_vars}")
            clauses.append(normalized)

        projection = tuple(int(v) for v in self.projection) or tuple(range(1, num_vars + 1))
        if len(set(projection)) != len(projection):
            raise ContractError("Projection lists a variable twice")
        for var in projection:
            if not 1 <= var <= num_vars:
                raise ContractError(f"Projection variable {var} out of range 1..{num_vars}")

        xors = []
        for xor in self.xors:
            if not isinstance(xor, XorConstraint):
                xor = XorConstraint(*xor)
            for var in xor.variables:
                if var > num_vars:
                    raise ContractError(f"XOR variable {var} out of range 1..{num_vars}")
            # 0 = 0 rows carry no information
            if xor.variables or xor.rhs:
                xors.append(xor)

        object.__setattr__(self, "num_vars", num_vars)
        object.__setattr__(self, "clauses", tuple(clauses))
        object.__setattr__(self, "projection", projection)
        object.__setattr__(self, "xors", tuple(xors))

    @property
    def num_clauses(self):
        return len(self.clauses)

    @property
    def has_default_projection(self):
        return self.projection == tuple(range(1, self.num_vars + 1))

    def is_trivially_unsat(self):
        """True when an empty clause or a `0 = 1` XOR row is present."""
        if any(len(clause) == 0 for clause in self.clauses):
            return True
        return any(not xor.variables and xor.rhs for xor in self.xors)

    def is_satisfied(self, assignment):
        """
        Evaluate clauses and XOR rows under a (total) assignment.

        Args:
            assignment: mapping variable -> bool

        Returns:
            bool
        """
        for clause in self.clauses:
            if not any(assignment.get(abs(lit)) == (lit > 0) for lit in clause):
                return False
        return all(xor.is_satisfied(assignment) for xor in self.xors)

    def with_clauses(self, extra):
        return replace(self, clauses=self.clauses + tuple(tuple(c) for c in extra))


def parse_dimacs(text):
    """
    Parse DIMACS CNF (optionally with XOR lines) into a CnfFormula.

    Duplicate literals are merged and tautologies dropped; the header clause
    count is checked against the clause and XOR lines actually read.

    Args:
        text: str or bytes with the file contents

    Returns:
        CnfFormula

    Raises:
        DimacsParseError: with the offending line number
    """
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")

    header = None
    header_line = 0
    clauses = []
    xors = []
    projection = []
    projection_lines = []
    read_count = 0
    pending = []
    pending_line = 0
    line_number = 0

    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue

        if line.startswith("c"):
            tokens = line.split()
            if tokens[:2] == ["c", "ind"]:
                var_tokens = tokens[2:]
            elif tokens[:3] == ["c", "p", "show"]:
                var_tokens = tokens[3:]
            else:
                continue
            for token in var_tokens:
                try:
                    var = int(token)
                except ValueError:
                    raise DimacsParseError(line_number, f"invalid projection variable '{token}'")
                if var == 0:
                    break
                if var < 0:
                    raise DimacsParseError(line_number, f"negative projection variable {var}")
                projection_lines.append((line_number, var))
            continue

        if line.startswith("p"):
            if header is not None:
                raise DimacsParseError(line_number, "second 'p cnf' header")
            tokens = line.split()
            if len(tokens) != 4 or tokens[1] != "cnf":
                raise DimacsParseError(line_number, f"malformed header '{line}'")
            try:
                header = (int(tokens[2]), int(tokens[3]))
            except ValueError:
                raise DimacsParseError(line_number, f"malformed header '{line}'")
            if header[0] < 1 or header[1] < 0:
                raise DimacsParseError(line_number, f"malformed header '{line}'")
            header_line = line_number
            continue

        if header is None:
            raise DimacsParseError(line_number, "clause before 'p cnf' header")
        num_vars = header[0]

        is_xor = line.startswith("x")
        if is_xor and pending:
            raise DimacsParseError(line_number, "XOR line inside an unterminated clause")
        body = line[1:] if is_xor else line

        literals = []
        terminated = False
        for token in body.split():
            try:
                lit = int(token)
            except ValueError:
                raise DimacsParseError(line_number, f"invalid literal '{token}'")
            if abs(lit) > num_vars:
                raise DimacsParseError(line_number, f"literal {lit} out of range (num_vars={num_vars})")
            if lit != 0:
                literals.append(lit)
                continue

            read_count += 1
            if is_xor:
                rhs = 1
                for xlit in literals:
                    if xlit < 0:
                        rhs ^= 1
                xors.append(XorConstraint(tuple(abs(x) for x in literals), rhs))
                literals = []
                terminated = True
            else:
                clause = normalize_clause(pending + literals)
                pending = []
                literals = []
                if clause is not None:
                    clauses.append(clause)

        if is_xor:
            if not terminated or literals:
                raise DimacsParseError(line_number, "XOR line must end with 0")
        elif literals:
            if not pending:
                pending_line = line_number
            pending.extend(literals)

    if header is None:
        raise DimacsParseError(max(line_number, 1), "missing 'p cnf' header")
    if pending:
        raise DimacsParseError(pending_line, "unterminated clause (missing 0)")
    if read_count != header[1]:
        raise DimacsParseError(
            header_line, f"header declares {header[1]} clauses, found {read_count}"
        )

    for line_no, var in projection_lines:
        if var > header[0]:
            raise DimacsParseError(line_no, f"projection variable {var} out of range (num_vars={header[0]})")
        if var not in projection:
            projection.append(var)

    formula = CnfFormula(
        num_vars=header[0],
        clauses=tuple(clauses),
        projection=tuple(projection),
        xors=tuple(xors),
    )
    logger.debug(
        "Parsed DIMACS: %d vars, %d clauses, %d xors, %d projected",
        formula.num_vars, formula.num_clauses, len(formula.xors), len(formula.projection),
    )
    return formula


def read_dimacs(path):
    with open(path, "rb") as handle:
        return parse_dimacs(handle.read())


def render_dimacs(formula):
    """
    Render a formula as DIMACS / CNF-XOR text.

    `c ind` lines are written only when the projection differs from the
    default, so parse_dimacs(render_dimacs(f)) == f.
    """
    lines = [f"p cnf {formula.num_vars} {formula.num_clauses + len(formula.xors)}"]
    if not formula.has_default_projection:
        projection = list(formula.projection)
        for start in range(0, len(projection), PROJECTION_LINE_CHUNK):
            chunk = projection[start:start + PROJECTION_LINE_CHUNK]
            lines.append("c ind " + " ".join(str(v) for v in chunk) + " 0")
    for clause in formula.clauses:
        lines.append(" ".join(str(lit) for lit in clause + (0,)))
    for xor in formula.xors:
        lines.append(xor.to_dimacs())
    return "\n".join(lines) + "\n"


def xor_to_clauses(variables, rhs):
    """
    Direct CNF expansion of one XOR: one clause per forbidden assignment.

    Returns:
        list of 2^(width-1) clauses (a single empty clause for `0 = 1`)
    """
    variables = list(variables)
    if not variables:
        return [()] if rhs else []
    clauses = []
    for bits in itertools.product((0, 1), repeat=len(variables)):
        if sum(bits) % 2 != rhs:
            clauses.append(tuple(-v if bit else v for v, bit in zip(variables, bits)))
    return clauses


def _tseitin_chain(xor, max_width, next_var):
    """
    Cut one XOR into chained chunks of width <= max_width.

    Chunk j introduces a fresh variable equal to the parity of everything
    consumed so far; the last chunk carries the original rhs.
    """
    variables = list(xor.variables)
    if len(variables) <= max_width:
        return xor_to_clauses(variables, xor.rhs), next_var

    clauses = []
    next_var += 1
    carry = next_var
    clauses.extend(xor_to_clauses(variables[:max_width - 1] + [carry], 0))
    remaining = variables[max_width - 1:]

    while len(remaining) + 1 > max_width:
        take = remaining[:max_width - 2]
        remaining = remaining[max_width - 2:]
        next_var += 1
        clauses.extend(xor_to_clauses([carry] + take + [next_var], 0))
        carry = next_var

    clauses.extend(xor_to_clauses([carry] + remaining, xor.rhs))
    return clauses, next_var


def _expand_xors(formula, xors, max_width):
    clauses = list(formula.clauses)
    next_var = formula.num_vars
    for xor in xors:
        chunk_clauses, next_var = _tseitin_chain(xor, max_width, next_var)
        clauses.extend(chunk_clauses)
    return clauses, next_var


def augment_with_xors(formula, xors, encoding=None):
    """
    Attach XOR constraints (hash rows) to a formula.

    Args:
        formula: CnfFormula
        xors: iterable of XorConstraint over projection variables
        encoding: XorEncoding (default native)

    Returns:
        CnfFormula whose models restricted to the original variables are the
        models of `formula` satisfying every XOR

    Raises:
        ContractError: an XOR mentions a variable outside the projection
    """
    encoding = encoding or XorEncoding()
    xors = tuple(xors)
    projected = set(formula.projection)
    for xor in xors:
        outside = [v for v in xor.variables if v not in projected]
        if outside:
            raise ContractError(f"XOR uses non-projection variables {outside}")

    if not xors:
        return formula
    if encoding.mode == "native":
        return replace(formula, xors=formula.xors + xors)

    clauses, num_vars = _expand_xors(formula, xors, encoding.max_width)
    return CnfFormula(
        num_vars=num_vars,
        clauses=tuple(clauses),
        projection=formula.projection,
        xors=formula.xors,
    )


def lower_xors(formula, max_width=DEFAULT_TSEITIN_WIDTH):
    """Replace every attached XOR row by its Tseitin clauses."""
    if not formula.xors:
        return formula
    clauses, num_vars = _expand_xors(formula, formula.xors, max_width)
    return CnfFormula(num_vars=num_vars, clauses=tuple(clauses), projection=formula.projection)


def blocking_clause(assignment, projection):
    """
    Clause excluding every model that agrees with `assignment` on the projection.

    Args:
        assignment: mapping variable -> bool, total over the projection
        projection: ordered projection variables

    Returns:
        tuple of literals
    """
    clause = []
    for var in projection:
        if var not in assignment:
            raise ContractError(f"Assignment is missing projection variable {var}")
        clause.append(-var if assignment[var] else var)
    return tuple(clause)
