"""
Prefix Hash Sampling for JK-ModelCounter

Samples h(y) = Ay + b over F2 with row i of A drawn entry-wise Bern(p_i),
plus a target cell alpha. A hash is sampled once at full dimension n and
sliced to any prefix m: the first m rows of A, b and alpha.

Rows are indexed against the projection ordering, so row entry j refers to
projection[j].
"""

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .formula import XorConstraint

logger = logging.getLogger(__name__)

SCHEDULE_KINDS = ("dense", "lsa", "solved", "theoretical", "custom")
MONOTONE_TOLERANCE = 1e-15


@dataclass(frozen=True)
class DensitySchedule:
    """
    Row densities p_1..p_n with a provenance tag.

    Invariants: 0 < p_i <= 1/2 and p_i >= p_{i+1}.
    """

    p: tuple
    kind: str = "custom"

    def __post_init__(self):
        p = tuple(float(x) for x in self.p)
        if not p:
            raise ContractError("Density schedule must have at least one row")
        if self.kind not in SCHEDULE_KINDS:
            raise ContractError(f"Unknown schedule kind '{self.kind}' (expected one of {SCHEDULE_KINDS})")
        for i, value in enumerate(p, start=1):
            if not 0.0 < value <= 0.5:
                raise ContractError(f"p_{i} = {value} outside (0, 1/2]")
        for i in range(len(p) - 1):
            if p[i] + MONOTONE_TOLERANCE < p[i + 1]:
                raise ContractError(f"Schedule not non-increasing at row {i + 1}: {p[i]} < {p[i + 1]}")
        object.__setattr__(self, "p", p)

    @property
    def n(self):
        return len(self.p)

    def __len__(self):
        return len(self.p)

    def as_array(self):
        return np.asarray(self.p, dtype=float)


def dense_schedule(n):
    """Every row at density 1/2: the strongly 2-universal family."""
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    return DensitySchedule(tuple([0.5] * n), "dense")


def iteration_rng(master_seed, index):
    """
    Independent numpy Generator for core iteration `index`.

    Streams derived from (master_seed, index) do not depend on how many other
    iterations ran before, so parallel and sequential runs draw the same hashes.
    """
    sequence = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(sequence))


def _frozen_bits(values, shape=None):
    array = np.array(values, dtype=bool)
    if shape is not None and array.shape != shape:
        raise ContractError(f"Expected bit array of shape {shape}, got {array.shape}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PrefixHash:
    """
    One sampled prefix hash (A, b, alpha) over the projection variables.

    Attributes:
        projection: ordered projection variables (length n)
        matrix: n x n boolean array, row i is the support of h_i
        packed_rows: matrix packed row-wise with np.packbits
        b: length-n boolean offset vector
        alpha: length-n boolean target cell
        seed: (master_seed, iteration) record, or None for hand-built hashes
    """

    projection: tuple
    matrix: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    seed: tuple = None

    def __post_init__(self):
        n = len(self.projection)
        if n < 1:
            raise ContractError("PrefixHash needs a non-empty projection")
        object.__setattr__(self, "projection", tuple(int(v) for v in self.projection))
        object.__setattr__(self, "matrix", _frozen_bits(self.matrix, (n, n)))
        object.__setattr__(self, "b", _frozen_bits(self.b, (n,)))
        object.__setattr__(self, "alpha", _frozen_bits(self.alpha, (n,)))
        packed = np.packbits(self.matrix, axis=1)
        packed.setflags(write=False)
        object.__setattr__(self, "packed_rows", packed)

    @property
    def n(self):
        return len(self.projection)

    def __eq__(self, other):
        if not isinstance(other, PrefixHash):
            return NotImplemented
        return (
            self.projection == other.projection
            and np.array_equal(self.matrix, other.matrix)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.alpha, other.alpha)
        )

    __hash__ = None

    def row_weights(self):
        return self.matrix.sum(axis=1)


def sample_prefix_hash(n, schedule, projection, rng, seed=None):
    """
    Draw (A, b, alpha) for a core iteration.

    Args:
        n: dimension (number of projection variables)
        schedule: DensitySchedule with schedule.n == n
        projection: ordered projection variables
        rng: numpy Generator; consumed exclusively by this call
        seed: optional seed record stored on the hash

    Returns:
        PrefixHash
    """
    projection = tuple(projection)
    if schedule.n != n or len(projection) != n:
        raise ContractError(
            f"Dimension mismatch: n={n}, schedule.n={schedule.n}, |projection|={len(projection)}"
        )

    densities = schedule.as_array()
    matrix = rng.random((n, n)) < densities[:, None]
    b = rng.integers(0, 2, size=n).astype(bool)
    alpha = rng.integers(0, 2, size=n).astype(bool)

    logger.debug("Sampled %s hash, n=%d, mean row weight %.2f", schedule.kind, n, matrix.sum() / n)
    return PrefixHash(projection=projection, matrix=matrix, b=b, alpha=alpha, seed=seed)


def _check_prefix(h, m):
    if not 1 <= m <= h.n:
        raise ContractError(f"Prefix m={m} outside 1..{h.n}")


def slice_to_xors(h, m):
    """
    Materialize h^(m)(y) = alpha^(m) as m XOR constraints.

    Constraint i covers the projection variables in the support of row i,
    with rhs = b_i XOR alpha_i. An all-zero row gives the degenerate `0 = rhs`.
    """
    _check_prefix(h, m)
    constraints = []
    for i in range(m):
        support = np.flatnonzero(h.matrix[i])
        variables = tuple(h.projection[j] for j in support)
        constraints.append(XorConstraint(variables, int(h.b[i] ^ h.alpha[i])))
    return constraints


def point_from_int(n, value):
    """Bit vector with coordinate i (1-based, from the left) = bit n - i of value."""
    return np.array([(value >> (n - 1 - j)) & 1 for j in range(n)], dtype=bool)


def point_from_assignment(h, assignment):
    return np.array([bool(assignment[v]) for v in h.projection], dtype=bool)


def apply_hash(h, m, y):
    """
    Evaluate h^(m)(y) = A^(m) y + b^(m) over F2.

    Args:
        h: PrefixHash
        m: prefix length, 1 <= m <= n
        y: length-n bit vector (sequence of 0/1 or bools)

    Returns:
        length-m boolean numpy array
    """
    _check_prefix(h, m)
    y = np.asarray(y, dtype=bool)
    if y.shape != (h.n,):
        raise ContractError(f"Point must have length {h.n}, got shape {y.shape}")
    overlap = np.bitwise_and(h.packed_rows[:m], np.packbits(y))
    parity = np.unpackbits(overlap, axis=1).sum(axis=1) & 1
    return parity.astype(bool) ^ h.b[:m]


def in_cell(h, m, y):
    return bool(np.array_equal(apply_hash(h, m, y), h.alpha[:m]))


def dump_hash(h, m=None):
    """
    Text dump, one row per line: `i : v1 v2 ... = rhs`.

    Row indices are 1-based; rhs is b_i XOR alpha_i, so each line reads as the
    XOR constraint the row contributes.
    """
    m = h.n if m is None else m
    lines = []
    for i, xor in enumerate(slice_to_xors(h, m), start=1):
        variables = " ".join(str(v) for v in xor.variables)
        if variables:
            lines.append(f"{i} : {variables} = {xor.rhs}")
        else:
            lines.append(f"{i} : = {xor.rhs}")
    return "\n".join(lines)


def xor_lines(h, m):
    """CNF-XOR `x` lines for the first m rows; trivially true `0 = 0` rows are skipped."""
    return "\n".join(
        xor.to_dimacs() for xor in slice_to_xors(h, m) if xor.variables or xor.rhs
    )
