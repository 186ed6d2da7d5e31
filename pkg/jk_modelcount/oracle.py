"""
SAT Oracle for JK-ModelCounter

BoundedCount over two interchangeable backends:
- builtin: a DPLL solver with two-watched-literal clauses, XOR rows watched on
  two variables with parity propagation, chronological backtracking
- external: any SAT-competition style solver run as a subprocess on a DIMACS
  (or CNF-XOR) file, output read from its `s` / `v` lines
"""

import contextlib
import logging
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass, field

from .errors import ContractError, OracleError
from .formula import XorEncoding, blocking_clause, lower_xors, render_dimacs

logger = logging.getLogger(__name__)

SCRATCH_ENV = "JK_MODELCOUNT_SCRATCH"
INPUT_PLACEHOLDER = "{input}"
DEADLINE_CHECK_INTERVAL = 1000
SAT_EXIT, UNSAT_EXIT = 10, 20


@dataclass(frozen=True)
class OracleConfig:
    """
    Which solver answers the NP queries.

    Attributes:
        backend: "builtin" or "external"
        command: external command template containing "{input}"
        xor_mode: XorEncoding; tseitin lowers XOR rows to clauses before solving
        timeout: per-call timeout in seconds, or None
    """

    backend: str = "builtin"
    command: str = None
    xor_mode: XorEncoding = field(default_factory=XorEncoding)
    timeout: float = None

    def __post_init__(self):
        if self.backend not in ("builtin", "external"):
            raise ContractError(f"Unknown oracle backend '{self.backend}'")
        if self.backend == "external":
            if not self.command or INPUT_PLACEHOLDER not in self.command:
                raise ContractError(f"External solver command must contain '{INPUT_PLACEHOLDER}'")
        if self.timeout is not None and self.timeout <= 0:
            raise ContractError(f"timeout must be positive, got {self.timeout}")

    def describe(self):
        return {
            "backend": self.backend,
            "command": self.command,
            "xor_mode": str(self.xor_mode),
            "timeout": self.timeout,
        }


@dataclass(frozen=True)
class BoundedCountResult:
    count: int
    saturated: bool
    solver_calls: int
    wall_time: float


class BuiltinSolver:
    """
    Incremental DPLL solver over a CnfFormula with native XOR rows.

    Clauses are watched on their first two literals, XOR rows on their first
    two variables. Projection variables are decided before the rest, so
    next_projection() can resume below the deepest projection decision of
    the previous model and walk the search tree once for a whole
    enumeration.
    """

    def __init__(self, formula, deadline=None):
        self.num_vars = formula.num_vars
        self.deadline = deadline
        self._resume = False
        self._exhausted = False
        self._assign = [None] * (self.num_vars + 1)
        self._trail = []
        self._levels = []
        self._qhead = 0
        self._clauses = []
        self._watches = {}
        self._xors = []
        self._xor_watches = {}
        self._unsat = False
        self._decisions = 0

        self._projected = set(formula.projection)
        rest = [v for v in range(1, self.num_vars + 1) if v not in self._projected]
        self._order = list(formula.projection) + rest

        for clause in formula.clauses:
            self.add_clause(clause)
        for xor in formula.xors:
            self._add_xor(list(xor.variables), xor.rhs)

    def _value(self, lit):
        value = self._assign[abs(lit)]
        if value is None:
            return None
        return value if lit > 0 else not value

    def _enqueue(self, var, value):
        self._assign[var] = value
        self._trail.append(var)

    def _backtrack_to(self, trail_size):
        for var in self._trail[trail_size:]:
            self._assign[var] = None
        del self._trail[trail_size:]
        self._qhead = min(self._qhead, trail_size)

    def _reset(self):
        self._resume = False
        self._exhausted = False
        if self._levels:
            self._backtrack_to(self._levels[0][0])
            self._levels = []

    @property
    def decisions(self):
        return self._decisions

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def add_clause(self, clause):
        """Add a clause at level 0, simplified against the level-0 assignment."""
        self._reset()
        if self._unsat:
            return
        remaining = []
        for lit in clause:
            value = self._value(lit)
            if value is True:
                return
            if value is None and lit not in remaining:
                remaining.append(lit)

        if not remaining:
            self._unsat = True
        elif len(remaining) == 1:
            lit = remaining[0]
            self._enqueue(abs(lit), lit > 0)
            if not self._propagate():
                self._unsat = True
        else:
            index = len(self._clauses)
            self._clauses.append(remaining)
            self._watches.setdefault(remaining[0], []).append(index)
            self._watches.setdefault(remaining[1], []).append(index)

    def _add_xor(self, variables, rhs):
        self._reset()
        if self._unsat:
            return
        remaining = []
        for var in variables:
            value = self._assign[var]
            if value is None:
                remaining.append(var)
            elif value:
                rhs ^= 1

        if not remaining:
            if rhs:
                self._unsat = True
        elif len(remaining) == 1:
            self._enqueue(remaining[0], bool(rhs))
            if not self._propagate():
                self._unsat = True
        else:
            index = len(self._xors)
            self._xors.append((remaining, rhs))
            self._xor_watches.setdefault(remaining[0], []).append(index)
            self._xor_watches.setdefault(remaining[1], []).append(index)

    def _propagate_clauses(self, false_lit):
        watchers = self._watches.get(false_lit)
        if not watchers:
            return True
        kept = []
        ok = True
        position = 0
        while position < len(watchers):
            index = watchers[position]
            position += 1
            clause = self._clauses[index]
            if clause[0] == false_lit:
                clause[0], clause[1] = clause[1], clause[0]
            if self._value(clause[0]) is True:
                kept.append(index)
                continue
            moved = False
            for k in range(2, len(clause)):
                if self._value(clause[k]) is not False:
                    clause[1], clause[k] = clause[k], clause[1]
                    self._watches.setdefault(clause[1], []).append(index)
                    moved = True
                    break
            if moved:
                continue
            kept.append(index)
            if self._value(clause[0]) is False:
                ok = False
                kept.extend(watchers[position:])
                break
            self._enqueue(abs(clause[0]), clause[0] > 0)
        self._watches[false_lit] = kept
        return ok

    def _propagate_xors(self, var):
        watchers = self._xor_watches.get(var)
        if not watchers:
            return True
        kept = []
        ok = True
        position = 0
        while position < len(watchers):
            index = watchers[position]
            position += 1
            variables, rhs = self._xors[index]
            if variables[0] == var:
                variables[0], variables[1] = variables[1], variables[0]
            moved = False
            for k in range(2, len(variables)):
                if self._assign[variables[k]] is None:
                    variables[1], variables[k] = variables[k], variables[1]
                    self._xor_watches.setdefault(variables[1], []).append(index)
                    moved = True
                    break
            if moved:
                continue
            kept.append(index)
            parity = rhs
            for other in variables[1:]:
                if self._assign[other]:
                    parity ^= 1
            head = self._assign[variables[0]]
            if head is None:
                self._enqueue(variables[0], bool(parity))
            elif head != bool(parity):
                ok = False
                kept.extend(watchers[position:])
                break
        self._xor_watches[var] = kept
        return ok

    def _propagate(self):
        while self._qhead < len(self._trail):
            var = self._trail[self._qhead]
            self._qhead += 1
            false_lit = -var if self._assign[var] else var
            if not self._propagate_clauses(false_lit):
                return False
            if not self._propagate_xors(var):
                return False
        return True

    def _backtrack_flip(self):
        while self._levels:
            trail_size, var, flipped = self._levels.pop()
            self._backtrack_to(trail_size)
            if not flipped:
                self._levels.append((trail_size, var, True))
                self._enqueue(var, True)
                return True
        return False

    def _pick_branch(self):
        for var in self._order:
            if self._assign[var] is None:
                return var
        return None

    def solve(self):
        """
        Find one model.

        Returns:
            dict variable -> bool over all variables, or None when UNSAT

        Raises:
            OracleError: the deadline passed during search
        """
        self._reset()
        if self._unsat:
            return None
        model = self._search()
        if model is None:
            self._unsat = True
        return model

    def next_projection(self):
        """
        Next model whose projection differs from every model returned so far.

        The first call searches from the current level-0 state; each later
        call drops the non-projection decisions of the previous model and
        flips the deepest unflipped projection decision. Calling solve() or
        add_clause() in between restarts the enumeration.

        Returns:
            dict variable -> bool over all variables, or None once every
            projection has been returned

        Raises:
            OracleError: the deadline passed during search
        """
        if self._unsat or self._exhausted:
            return None
        if self._resume:
            while self._levels and self._levels[-1][1] not in self._projected:
                self._levels.pop()
            if not self._backtrack_flip():
                self._exhausted = True
                return None
        else:
            self._reset()
        model = self._search()
        self._resume = model is not None
        self._exhausted = model is None
        return model

    def _check_deadline(self):
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise OracleError("builtin solver ran past the deadline")

    def _search(self):
        while True:
            if not self._propagate():
                if not self._backtrack_flip():
                    return None
                continue
            var = self._pick_branch()
            if var is None:
                return {v: bool(self._assign[v]) for v in range(1, self.num_vars + 1)}
            self._decisions += 1
            if self._decisions % DEADLINE_CHECK_INTERVAL == 0:
                self._check_deadline()
            self._levels.append((len(self._trail), var, False))
            self._enqueue(var, False)


def builtin_solve(formula, deadline=None):
    """One-shot builtin solve: a model dict or None for UNSAT."""
    return BuiltinSolver(formula, deadline).solve()


def parse_solver_output(output):
    """
    Read SAT-competition output.

    Returns:
        (status, literals): status is "SATISFIABLE", "UNSATISFIABLE" or None,
        literals are the ints from `v` lines without the terminating 0
    """
    status = None
    literals = []
    for line in output.splitlines():
        line = line.strip()
        if line.startswith("s "):
            word = line[2:].strip()
            if word in ("SATISFIABLE", "UNSATISFIABLE"):
                status = word
        elif line.startswith("v ") or line == "v":
            for token in line.split()[1:]:
                try:
                    lit = int(token)
                except ValueError:
                    raise OracleError(f"Unparsable value line '{line}'")
                if lit != 0:
                    literals.append(lit)
    return status, literals


def _scratch_dir():
    """Scratch directory context: the JK_MODELCOUNT_SCRATCH path, kept, or a fresh temporary one."""
    path = os.environ.get(SCRATCH_ENV)
    if path:
        os.makedirs(path, exist_ok=True)
        return contextlib.nullcontext(path)
    return tempfile.TemporaryDirectory(prefix="jk_modelcount_")


def _remaining_timeout(config, deadline):
    timeout = config.timeout
    if deadline is not None:
        left = deadline - time.monotonic()
        if left <= 0:
            raise OracleError("deadline passed before the solver call")
        timeout = left if timeout is None else min(timeout, left)
    return timeout


def _call_deadline(config, deadline):
    if config.timeout is None:
        return deadline
    per_call = time.monotonic() + config.timeout
    return per_call if deadline is None else min(deadline, per_call)


def external_solve(formula, config, deadline=None, scratch=None):
    """
    Solve with an external solver process.

    Tseitin mode writes plain DIMACS; native mode writes CNF-XOR `x` lines.
    The instance file goes to `scratch`, or to a directory made for this call
    and removed afterwards. The returned model is restricted to the formula's
    own variables.

    Raises:
        OracleError: missing binary, timeout, unknown exit code, unparsable output
    """
    if config.backend != "external":
        raise ContractError("external_solve needs an external OracleConfig")
    if scratch is None:
        with _scratch_dir() as directory:
            return external_solve(formula, config, deadline, directory)

    target = formula
    if config.xor_mode.mode == "tseitin":
        target = lower_xors(formula, config.xor_mode.max_width)

    handle = tempfile.NamedTemporaryFile(
        "w", suffix=".cnf", prefix="jk_modelcount_", dir=scratch, delete=False
    )
    try:
        with handle:
            handle.write(render_dimacs(target))
        command = [token.replace(INPUT_PLACEHOLDER, handle.name) for token in shlex.split(config.command)]
        try:
            process = subprocess.run(
                command, capture_output=True, text=True, timeout=_remaining_timeout(config, deadline)
            )
        except FileNotFoundError:
            raise OracleError(f"Solver executable not found: '{command[0]}'")
        except subprocess.TimeoutExpired:
            raise OracleError(f"Solver timed out: {' '.join(command)}")
    finally:
        os.unlink(handle.name)

    status, literals = parse_solver_output(process.stdout)
    if process.returncode not in (0, SAT_EXIT, UNSAT_EXIT):
        raise OracleError(f"Solver exited with code {process.returncode}: {process.stderr.strip()[:200]}")
    if status is None:
        raise OracleError(f"No 's SATISFIABLE/UNSATISFIABLE' line in solver output (exit {process.returncode})")
    expected = {SAT_EXIT: "SATISFIABLE", UNSAT_EXIT: "UNSATISFIABLE"}.get(process.returncode)
    if expected and expected != status:
        raise OracleError(f"Exit code {process.returncode} contradicts 's {status}'")
    if status == "UNSATISFIABLE":
        return None

    model = {v: False for v in range(1, formula.num_vars + 1)}
    for lit in literals:
        if abs(lit) <= formula.num_vars:
            model[abs(lit)] = lit > 0
    return model


class ExternalSolver:
    """
    File-based solver session; blocking clauses are appended to each written instance.

    Instance files live in a scratch directory owned by the session and
    removed by close(), unless JK_MODELCOUNT_SCRATCH names one to reuse.
    """

    def __init__(self, formula, config, deadline=None):
        self.formula = formula
        self.config = config
        self.deadline = deadline
        self._extra = []
        self._stack = contextlib.ExitStack()
        self.scratch = self._stack.enter_context(_scratch_dir())

    def add_clause(self, clause):
        self._extra.append(tuple(clause))

    def solve(self):
        return external_solve(
            self.formula.with_clauses(self._extra), self.config, self.deadline, self.scratch
        )

    def next_projection(self):
        """Solve, then block the model's projection for later calls."""
        model = self.solve()
        if model is not None:
            self.add_clause(blocking_clause(model, self.formula.projection))
        return model

    def close(self):
        self._stack.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def make_solver(formula, config, deadline=None):
    if config.backend == "builtin":
        return BuiltinSolver(formula, deadline)
    return ExternalSolver(formula, config, deadline)


def bounded_count(formula, thresh, config=None, deadline=None):
    """
    min(thresh, number of projected models).

    The builtin backend enumerates projections in one pass over its search
    tree; the external backend adds a blocking clause per model. Each call
    gets config.timeout seconds, cut short by the overall deadline.

    Args:
        formula: CnfFormula, possibly with attached XOR rows
        thresh: saturation threshold (>= 1)
        config: OracleConfig (default builtin, native XOR)
        deadline: time.monotonic() value after which the search gives up

    Returns:
        BoundedCountResult; at most thresh + 1 solver calls

    Raises:
        OracleError: solver failure or timeout, with partial_count and solver_calls set
    """
    if thresh < 1:
        raise ContractError(f"thresh must be >= 1, got {thresh}")
    config = config or OracleConfig()
    start = time.perf_counter()

    if formula.is_trivially_unsat():
        return BoundedCountResult(0, False, 0, time.perf_counter() - start)

    working = formula
    if config.backend == "builtin" and config.xor_mode.mode == "tseitin":
        working = lower_xors(formula, config.xor_mode.max_width)

    count = 0
    calls = 0
    try:
        with make_solver(working, config, deadline) as solver:
            while count < thresh:
                calls += 1
                if config.backend == "builtin":
                    solver.deadline = _call_deadline(config, deadline)
                model = solver.next_projection()
                if model is None:
                    break
                if not formula.is_satisfied(model):
                    raise OracleError("Solver returned an assignment that violates the formula")
                count += 1
    except OracleError as e:
        raise OracleError(str(e), partial_count=count, solver_calls=calls) from e

    elapsed = time.perf_counter() - start
    logger.debug("BoundedCount: %d%s after %d calls", count, "+" if count >= thresh else "", calls)
    return BoundedCountResult(count, count >= thresh, calls, elapsed)
