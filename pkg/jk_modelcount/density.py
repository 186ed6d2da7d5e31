"""
Row Density Machinery for JK-ModelCounter

Numeric side of sparse hashing:
- q(w, m): probability that a weight-w vector lies in the kernel of A^(m)
- r(w, m) = q(w, m) - 2^-m
- closed-form per-element bound on the pair counts c_S(w)
- the dispersion bound sum_w c_S(w)/|S| * r(w, m) with l = ceil(m + log2 k)
- density schedules: dense, fitted (lsa), solved by bisection, theoretical
- numerical qs search
"""

import csv
import io
import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import bisect

from .errors import ContractError
from .hashgen import DensitySchedule, dense_schedule

logger = logging.getLogger(__name__)

LOG_SPACE_THRESHOLD = 64
SOLVE_TOLERANCE = 1e-4
SOLVE_MARGIN = 1e-12
SNAP_TOLERANCE = 1e-3
ENTROPY_TOLERANCE = 1e-10
FITTED_COEFFICIENT = 1.6
THEORETICAL_COEFFICIENT = 16.0
LN2 = math.log(2.0)


def as_fraction(p):
    # str() gives the shortest decimal, so 0.1 becomes exactly 1/10
    return p if isinstance(p, Fraction) else Fraction(str(p))


def _check_qr_args(w, m, schedule):
    if w < 0:
        raise ContractError(f"w must be >= 0, got {w}")
    if not 1 <= m <= schedule.n:
        raise ContractError(f"m={m} outside 1..{schedule.n}")


def q(w, m, schedule, exact=False):
    """
    Kernel probability q(w, m) = prod_{j<=m} (1/2 + 1/2 (1 - 2 p_j)^w).

    Uses 0^0 = 1, so q(0, m) = 1. Products over more than 64 rows are taken
    in log space.

    Args:
        w: Hamming weight
        m: prefix length
        schedule: DensitySchedule
        exact: return a Fraction (p values read through their decimal repr)

    Returns:
        float, or Fraction when exact
    """
    _check_qr_args(w, m, schedule)
    if exact:
        half = Fraction(1, 2)
        value = Fraction(1)
        for p in schedule.p[:m]:
            value *= half + half * (1 - 2 * as_fraction(p)) ** w
        return value

    if w == 0:
        return 1.0
    bases = 1.0 - 2.0 * schedule.as_array()[:m]
    if m <= LOG_SPACE_THRESHOLD:
        return float(np.prod(0.5 + 0.5 * bases ** w))
    return math.exp(float(np.sum(np.log1p(bases ** w))) - m * LN2)


def _log_expm1(values):
    """log(exp(s) - 1) elementwise, -inf at s = 0."""
    values = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        small = np.log(np.expm1(np.minimum(values, 700.0)))
        large = values + np.log1p(-np.exp(-values))
    return np.where(values > 700.0, large, small)


def r(w, m, schedule, exact=False):
    """
    Excess kernel probability r(w, m) = q(w, m) - 2^-m.

    Evaluated as 2^-m * expm1(sum_j log1p((1 - 2 p_j)^w)) so that r stays
    non-negative and accurate when q is close to 2^-m.
    """
    _check_qr_args(w, m, schedule)
    if exact:
        return q(w, m, schedule, exact=True) - Fraction(1, 2 ** m)

    bases = 1.0 - 2.0 * schedule.as_array()[:m]
    log_sum = float(np.sum(np.log1p(bases ** w)))
    if log_sum == 0.0:
        return 0.0
    return math.exp(float(_log_expm1(log_sum)) - m * LN2)


def log_cs_bound(w, n, ell):
    if w < 1:
        raise ContractError("cs_bound is defined for w >= 1; use the exact c_S(0)/|S| = 1 at w = 0")
    if n < 1 or ell < 1:
        raise ContractError(f"cs_bound needs n >= 1 and ell >= 1, got n={n}, ell={ell}")
    return LN2 + w * math.log(8.0 * math.e * math.sqrt(n * ell) / w)


def cs_bound(w, n, ell):
    """
    Closed-form bound on c_S(w)/|S| for down-sets: 2 * (8e * sqrt(n * ell) / w)^w.

    Raises:
        ContractError: for w = 0 (callers use the exact coefficient 1)
    """
    exponent = log_cs_bound(w, n, ell)
    return math.exp(exponent) if exponent < 709.0 else math.inf


@dataclass(frozen=True)
class DispersionBoundConfig:
    """
    Parameters of the prefix-(rho, qs, k) concentration requirement.

    cs_bound_kind selects the c_S(w) bound: "closed_form" uses cs_bound,
    "pluggable" calls cs_bound_fn(w, n, ell) instead.
    """

    n: int
    k: float = 512
    rho: float = 1.1
    qs: int = 1
    cs_bound_kind: str = "closed_form"
    cs_bound_fn: object = None

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"n must be >= 1, got {self.n}")
        if not self.rho > 1:
            raise ContractError(f"rho must be > 1, got {self.rho}")
        if not self.k >= 1:
            raise ContractError(f"k must be >= 1, got {self.k}")
        if not 1 <= self.qs <= self.n:
            raise ContractError(f"qs must be in 1..{self.n}, got {self.qs}")
        if self.cs_bound_kind not in ("closed_form", "pluggable"):
            raise ContractError(f"Unknown cs_bound_kind '{self.cs_bound_kind}'")
        if self.cs_bound_kind == "pluggable" and not callable(self.cs_bound_fn):
            raise ContractError("cs_bound_kind='pluggable' requires a callable cs_bound_fn")

    def ell(self, m):
        return math.ceil(m + math.log2(self.k))

    def log_coefficients(self, ell):
        """log of the c_S(w)/|S| bound for w = 1..min(ell, n)."""
        top = min(ell, self.n)
        if self.cs_bound_kind == "closed_form":
            return np.array([log_cs_bound(w, self.n, ell) for w in range(1, top + 1)])
        values = [float(self.cs_bound_fn(w, self.n, ell)) for w in range(1, top + 1)]
        with np.errstate(divide="ignore"):
            return np.log(np.array(values, dtype=float))


@dataclass(frozen=True)
class BoundReport:
    """Dispersion bound at prefix m; terms[w] is the w-th summand."""

    m: int
    ell: int
    terms: tuple
    total: float


def _bound_from_log_sums(m, config, log_sums):
    """
    Terms of the bound given S_w = sum_{j<=m} log1p((1 - 2 p_j)^w), w = 0..n.

    The w = 0 term is r(0, m) = 1 - 2^-m exactly.
    """
    ell = config.ell(m)
    top = min(ell, config.n)
    log_r = _log_expm1(log_sums[1:top + 1]) - m * LN2
    with np.errstate(over="ignore", invalid="ignore"):
        tail = np.exp(config.log_coefficients(ell) + log_r)
    tail = np.nan_to_num(tail, nan=0.0, posinf=math.inf)
    terms = (1.0 - 2.0 ** -m,) + tuple(float(t) for t in tail)
    return ell, terms, math.fsum(terms)


def _weight_grid(n):
    return np.arange(0, n + 1, dtype=float)


def dispersion_bound(m, config, schedule):
    """
    Upper bound on the dispersion index of Cnt(S, m) for |S| <= k * 2^m.

    total = r(0, m) + sum_{w=1}^{min(l, n)} cs_bound(w, n, l) * r(w, m),
    l = ceil(m + log2 k).

    Args:
        m: prefix length, 1 <= m <= schedule.n
        config: DispersionBoundConfig
        schedule: DensitySchedule

    Returns:
        BoundReport
    """
    if not 1 <= m <= schedule.n:
        raise ContractError(f"m={m} outside 1..{schedule.n}")
    bases = 1.0 - 2.0 * schedule.as_array()[:m]
    log_sums = np.log1p(bases[None, :] ** _weight_grid(config.n)[:, None]).sum(axis=1)
    ell, terms, total = _bound_from_log_sums(m, config, log_sums)
    return BoundReport(m=m, ell=ell, terms=terms, total=total)


def bound_profile(config, schedule):
    """
    Bound totals for m = 1..schedule.n, built from running log sums.

    Returns:
        list of floats; entry m-1 is dispersion_bound(m).total
    """
    weights = _weight_grid(config.n)
    log_sums = np.zeros_like(weights)
    totals = []
    for m, p in enumerate(schedule.p, start=1):
        log_sums = log_sums + np.log1p((1.0 - 2.0 * p) ** weights)
        totals.append(_bound_from_log_sums(m, config, log_sums)[2])
    return totals


def _log_coefficient_matrix(config):
    """Row m-1 holds the log c_S(w) bound at prefix m for w = 1..n; -inf past ell."""
    matrix = np.full((config.n, config.n), -np.inf)
    for m in range(1, config.n + 1):
        coefficients = config.log_coefficients(config.ell(m))
        matrix[m - 1, :len(coefficients)] = coefficients
    return matrix


def _flat_continuation_totals(i, p, log_sums, coefficients, weights):
    """Bound totals at prefixes i..n when rows i..n all have density p."""
    n = coefficients.shape[0]
    steps = np.arange(1, n - i + 2, dtype=float)[:, None]
    row = np.log1p((1.0 - 2.0 * p) ** weights[1:])
    sums = log_sums[1:][None, :] + steps * row[None, :]
    m = np.arange(i, n + 1, dtype=float)
    log_r = _log_expm1(sums) - m[:, None] * LN2
    with np.errstate(over="ignore", invalid="ignore"):
        tail = np.exp(coefficients[i - 1:] + log_r)
    tail = np.nan_to_num(tail, nan=0.0, posinf=math.inf)
    return (1.0 - 2.0 ** -m) + tail.sum(axis=1)


def solve_schedule(config):
    """
    Sparsest schedule meeting the bound, row by row.

    Rows before qs stay at 1/2. Row i is the smallest p in (0, p_{i-1}] such
    that repeating p for every row i..n keeps dispersion_bound <= rho at all
    prefixes i..n, found by bisection to 1e-4. Row i-1 already passed that
    check, so p_{i-1} is always feasible for row i and no prefix in [qs, n]
    ends up above rho. While the previous row is 1/2, a result within 1e-3
    of 1/2 is snapped to 1/2. Cost is cubic in n.

    Returns:
        DensitySchedule of kind "solved"
    """
    weights = _weight_grid(config.n)
    coefficients = _log_coefficient_matrix(config)
    limit = config.rho * (1.0 - SOLVE_MARGIN)
    log_sums = np.zeros_like(weights)
    p_prev = 0.5
    rows = []

    def feasible(i, p):
        return bool(np.all(_flat_continuation_totals(i, p, log_sums, coefficients, weights) <= limit))

    for i in range(1, config.n + 1):
        if i < config.qs:
            p_i = 0.5
        elif not feasible(i, p_prev):
            logger.warning("Row %d: bound exceeds rho=%.3g even at p=%.4g; saturating", i, config.rho, p_prev)
            p_i = p_prev
        else:
            lo, hi = 0.0, p_prev
            while hi - lo > SOLVE_TOLERANCE:
                mid = 0.5 * (lo + hi)
                if feasible(i, mid):
                    hi = mid
                else:
                    lo = mid
            p_i = hi
            if p_prev == 0.5 and p_prev - p_i <= SNAP_TOLERANCE:
                p_i = 0.5
        rows.append(p_i)
        log_sums = log_sums + np.log1p((1.0 - 2.0 * p_i) ** weights)
        p_prev = p_i
        logger.debug("Solved row %d: p=%.5f", i, p_i)

    return DensitySchedule(tuple(rows), "solved")


def fitted_curve(i):
    """f(i) = 1.6 * log2(i + 1) / i."""
    return FITTED_COEFFICIENT * math.log2(i + 1) / i


def lsa_schedule(n):
    """p_i = min(1/2, f(i)); rows 1..11 sit at the cap."""
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    return DensitySchedule(tuple(min(0.5, fitted_curve(i)) for i in range(1, n + 1)), "lsa")


def binary_entropy(x):
    if not 0.0 <= x <= 1.0:
        raise ContractError(f"binary_entropy argument must be in [0, 1], got {x}")
    if x in (0.0, 1.0):
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def inv_binary_entropy(y):
    """
    Inverse of the binary entropy on [0, 1/2].

    Args:
        y: entropy value in [0, 1]

    Returns:
        x in [0, 1/2] with H(x) = y, to absolute tolerance 1e-10
    """
    if not 0.0 <= y <= 1.0:
        raise ContractError(f"inv_binary_entropy argument y must be in [0, 1], got {y}")
    if y == 0.0:
        return 0.0
    if y == 1.0:
        return 0.5
    return bisect(lambda x: binary_entropy(x) - y, 0.0, 0.5, xtol=ENTROPY_TOLERANCE)


def entropy_argument(i, k):
    """delta_i = i / (i + log2 k); not the counter's confidence delta."""
    return i / (i + math.log2(k))


def theoretical_density(i, k):
    """Uncapped theoretical row density (16 / H^-1(delta_i)) * log2(i) / i."""
    return THEORETICAL_COEFFICIENT / inv_binary_entropy(entropy_argument(i, k)) * math.log2(i) / i


def theoretical_curve(i, k):
    """Display curve g(i) = 32 * log2(i + 1) / (delta_i * i)."""
    return 2.0 * THEORETICAL_COEFFICIENT * math.log2(i + 1) / (entropy_argument(i, k) * i)


def theoretical_schedule(n, k):
    """
    Theoretical schedule p_i = min(1/2, theoretical_density(i, k)), made non-increasing.

    p_1 is 1/2 since log2(1) = 0 leaves the formula vacuous there.
    """
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    if k < 2:
        raise ContractError(f"k must be >= 2, got {k}")
    rows = [0.5]
    for i in range(2, n + 1):
        rows.append(min(0.5, theoretical_density(i, k), rows[-1]))
    return DensitySchedule(tuple(rows), "theoretical")


def find_qs(schedule, n, k, rho, cs_bound_fn=None):
    """
    Smallest qs such that the bound is <= rho for every prefix qs..n.

    Returns:
        int, or None when even the full prefix violates the bound
    """
    if schedule.n < n:
        raise ContractError(f"Schedule has {schedule.n} rows, need {n}")
    config = DispersionBoundConfig(
        n=n, k=k, rho=rho, qs=1,
        cs_bound_kind="pluggable" if cs_bound_fn else "closed_form",
        cs_bound_fn=cs_bound_fn,
    )
    profile = bound_profile(config, DensitySchedule(schedule.p[:n], schedule.kind))
    qs = None
    for m in range(n, 0, -1):
        if profile[m - 1] > rho:
            break
        qs = m
    return qs


def build_schedule(kind, n, k=512, rho=1.1, qs=1, cs_bound_fn=None):
    """Schedule of the given kind for an n-variable projection."""
    if kind == "dense":
        return dense_schedule(n)
    if kind == "lsa":
        return lsa_schedule(n)
    if kind == "theoretical":
        return theoretical_schedule(n, max(k, 2))
    if kind == "solved":
        return solve_schedule(DispersionBoundConfig(
            n=n, k=k, rho=rho, qs=min(qs, n),
            cs_bound_kind="pluggable" if cs_bound_fn else "closed_form",
            cs_bound_fn=cs_bound_fn,
        ))
    raise ContractError(f"Unknown schedule kind '{kind}' (expected dense, lsa, solved or theoretical)")


@dataclass(frozen=True)
class DensityRow:
    i: int
    p_lsa: float
    p_solved: float
    p_theoretical: float
    bound_at_i: float


DENSITY_CSV_HEADER = ("i", "p_lsa", "p_solved", "p_theoretical", "bound_at_i")


def density_table(n, k=512, rho=1.1, qs=1):
    """
    Rows for i = 1..n comparing the schedules.

    bound_at_i is the dispersion bound of the lsa schedule at prefix i.

    Returns:
        (list of DensityRow, qs found for the lsa schedule or None)
    """
    if n < 1:
        raise ContractError(f"n must be >= 1, got {n}")
    config = DispersionBoundConfig(n=n, k=k, rho=rho, qs=min(qs, n))
    lsa = lsa_schedule(n)
    solved = solve_schedule(config)
    theoretical = theoretical_schedule(n, max(k, 2))
    bounds = bound_profile(config, lsa)
    rows = [
        DensityRow(i, lsa.p[i - 1], solved.p[i - 1], theoretical.p[i - 1], bounds[i - 1])
        for i in range(1, n + 1)
    ]
    return rows, find_qs(lsa, n, k, rho)


def table_to_csv(rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(DENSITY_CSV_HEADER)
    for row in rows:
        writer.writerow([
            row.i, f"{row.p_lsa:.6f}", f"{row.p_solved:.6f}",
            f"{row.p_theoretical:.6f}", f"{row.bound_at_i:.6g}",
        ])
    return buffer.getvalue()
