"""
Verification Oracles for JK-ModelCounter

Brute-force and statistical ground truth for the hashing machinery:
- exact projected model counting by enumeration
- pair-distance counts c_S(w), the variance formula, and exhaustive
  (A, b) enumeration of Cnt(S, m) moments
- down-set / left-compression operators and the weighted pair-sum maximum
- exact tail checks of the Chebyshev and Paley-Zygmund forms
- Monte Carlo dispersion, reference instances, PAC and search sweeps

Points of {0,1}^n are ints; coordinate i (1-based, from the left) is bit n - i,
so "100" is coordinate 1 set.
"""

import itertools
import logging
import math
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .counter import (
    CounterParams,
    approxmc5,
    cell_formula,
    compute_mstar,
    linear_scan_crossing,
    log_sat_search,
)
from .density import (
    DispersionBoundConfig,
    as_fraction,
    dispersion_bound,
    lsa_schedule,
    q,
    r,
)
from .errors import ContractError, EnumerationGuardError, OracleError
from .formula import CnfFormula, XorConstraint, lower_xors
from .hashgen import DensitySchedule, dense_schedule, in_cell, point_from_int, sample_prefix_hash
from .oracle import BuiltinSolver, bounded_count

logger = logging.getLogger(__name__)

EXACT_COUNT_GUARD = 26
MOMENT_GUARD = 24
PAIRSUM_GUARD = 4
MONTE_CARLO_MIN_TRIALS = 1000
MONTE_CARLO_BATCHES = 20
FLOAT_TOLERANCE = 1e-12
PAC_MIN_SUCCESS_RATE = 0.9
PAC_MAX_MEAN_EPSILON = 0.3


def popcount(x):
    return bin(x).count("1")


@dataclass(frozen=True)
class ExplicitSet:
    """A set S of points of {0,1}^n stored as ints."""

    n: int
    members: frozenset

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"n must be >= 1, got {self.n}")
        members = frozenset(int(x) for x in self.members)
        for x in members:
            if not 0 <= x < 2 ** self.n:
                raise ContractError(f"Point {x} outside {{0,1}}^{self.n}")
        object.__setattr__(self, "members", members)

    @classmethod
    def from_strings(cls, strings):
        strings = list(strings)
        if not strings:
            raise ContractError("from_strings needs at least one point to fix n")
        n = len(strings[0])
        if any(len(s) != n for s in strings):
            raise ContractError("All points must have the same length")
        return cls(n, frozenset(int(s, 2) for s in strings))

    def to_strings(self):
        return sorted(format(x, f"0{self.n}b") for x in self.members)

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(sorted(self.members))

    def __contains__(self, x):
        return x in self.members


def _coordinate_bit(n, i):
    return 1 << (n - i)


def exact_count(formula):
    """
    Exact projected model count by depth-first enumeration.

    Projection variables that occur in clauses are branched on first; a
    clause (or XOR row) is checked as soon as its last variable is assigned.
    Unconstrained projection variables contribute a factor of 2 each.
    Clauses touching non-projection variables are settled per leaf with the
    builtin solver.

    Raises:
        EnumerationGuardError: more than 26 projection variables
    """
    projection = list(formula.projection)
    if len(projection) > EXACT_COUNT_GUARD:
        raise EnumerationGuardError(
            f"exact_count enumerates at most {EXACT_COUNT_GUARD} projection variables, got {len(projection)}"
        )
    if formula.is_trivially_unsat():
        return 0

    projected = set(projection)
    local_clauses = []
    residual_clauses = []
    for clause in formula.clauses:
        (local_clauses if all(abs(l) in projected for l in clause) else residual_clauses).append(clause)
    local_xors = []
    residual_xors = []
    for xor in formula.xors:
        (local_xors if all(v in projected for v in xor.variables) else residual_xors).append(xor)
    has_residual = bool(residual_clauses or residual_xors)

    touched = set()
    for clause in local_clauses:
        touched.update(abs(l) for l in clause)
    for xor in local_xors:
        touched.update(xor.variables)
    if has_residual:
        touched.update(projection)
    order = [v for v in projection if v in touched]
    free = len(projection) - len(order)
    position = {v: i for i, v in enumerate(order)}

    clause_buckets = defaultdict(list)
    for clause in local_clauses:
        clause_buckets[max(position[abs(l)] for l in clause)].append(clause)
    xor_buckets = defaultdict(list)
    for xor in local_xors:
        xor_buckets[max(position[v] for v in xor.variables)].append(xor)

    residual = None
    if has_residual:
        residual = CnfFormula(
            num_vars=formula.num_vars,
            clauses=tuple(residual_clauses),
            projection=formula.projection,
            xors=tuple(residual_xors),
        )

    assignment = {}

    def consistent(depth):
        for clause in clause_buckets.get(depth, ()):
            if not any(assignment[abs(l)] == (l > 0) for l in clause):
                return False
        return all(xor.is_satisfied(assignment) for xor in xor_buckets.get(depth, ()))

    def extendable():
        if residual is None:
            return True
        units = [(v,) if assignment[v] else (-v,) for v in order]
        return BuiltinSolver(residual.with_clauses(units)).solve() is not None

    def descend(depth):
        if depth == len(order):
            return 1 if extendable() else 0
        var = order[depth]
        total = 0
        for value in (False, True):
            assignment[var] = value
            if consistent(depth):
                total += descend(depth + 1)
        del assignment[var]
        return total

    return descend(0) * 2 ** free


def cs(w, s):
    """Ordered pairs (x, y) in S x S at Hamming distance w."""
    if not 0 <= w <= s.n:
        raise ContractError(f"w={w} outside 0..{s.n}")
    return sum(1 for x in s.members for y in s.members if popcount(x ^ y) == w)


def cs_profile(s):
    """[c_S(0), ..., c_S(n)]; sums to |S|^2."""
    counts = Counter(popcount(x ^ y) for x in s.members for y in s.members)
    return [counts.get(w, 0) for w in range(s.n + 1)]


def variance_formula(s, schedule, m, exact=True):
    """sigma^2[Cnt(S, m)] = sum_w c_S(w) r(w, m) / 2^m."""
    if schedule.n != s.n or not 1 <= m <= schedule.n:
        raise ContractError(f"Need schedule.n == s.n and 1 <= m <= n (n={s.n}, schedule.n={schedule.n}, m={m})")
    profile = cs_profile(s)
    if exact:
        total = sum(c * r(w, m, schedule, exact=True) for w, c in enumerate(profile) if c)
        return total / 2 ** m
    return math.fsum(c * r(w, m, schedule) for w, c in enumerate(profile) if c) / 2 ** m


@dataclass(frozen=True)
class HashMoments:
    """
    Distribution of Cnt(S, m) over every (A^(m), b^(m)).

    distribution maps a cell count to its probability.
    """

    mean: object
    variance: object
    dispersion: object
    distribution: dict = field(default_factory=dict)


def _row_parities(n, members):
    """P[mask, j] = parity(mask & members[j]) for every row mask."""
    masks = np.arange(2 ** n, dtype=np.int64)[:, None]
    overlap = masks & np.asarray(members, dtype=np.int64)[None, :]
    parity = np.zeros_like(overlap)
    for shift in range(n):
        parity ^= (overlap >> shift) & 1
    return parity


def _mask_weight(p, ones, n):
    return p ** ones * (1 - p) ** (n - ones)


def exhaustive_hash_moments(s, schedule, m, exact=True):
    """
    Exact moments of Cnt(S, m) = |{y in S : A^(m) y + b^(m) = 0}|.

    Row i of A ranges over all 2^n masks weighted p_i^ones (1 - p_i)^(n - ones);
    b is uniform; alpha is fixed to 0 since b is uniform. The last row is
    handled in one vectorized histogram per prefix of earlier rows.

    Args:
        s: ExplicitSet, non-empty
        schedule: DensitySchedule with schedule.n == s.n
        m: prefix length
        exact: Fraction arithmetic (p read through its decimal repr)

    Raises:
        EnumerationGuardError: m * n + m > 24
    """
    n = s.n
    if schedule.n != n:
        raise ContractError(f"schedule.n={schedule.n} does not match s.n={n}")
    if not 1 <= m <= n:
        raise ContractError(f"m={m} outside 1..{n}")
    if m * n + m > MOMENT_GUARD:
        raise EnumerationGuardError(f"m*n + m = {m * n + m} exceeds {MOMENT_GUARD}")
    if not s.members:
        raise ContractError("Moments need a non-empty set")

    members = sorted(s.members)
    parities = _row_parities(n, members)
    ones = [popcount(mask) for mask in range(2 ** n)]
    convert = as_fraction if exact else float
    row_weights = [
        [_mask_weight(convert(schedule.p[i]), ones[mask], n) for mask in range(2 ** n)]
        for i in range(m)
    ]
    cells = 2 ** m
    cell_share = Fraction(1, cells) if exact else 1.0 / cells
    mask_offsets = (np.arange(2 ** n, dtype=np.int64) * cells)[:, None]
    distribution = defaultdict(lambda: Fraction(0) if exact else 0.0)

    def descend(row, codes, weight):
        if row == m - 1:
            last = codes[None, :] + parities * (1 << row)
            hist = np.bincount((last + mask_offsets).ravel(), minlength=2 ** n * cells)
            hist = hist.reshape(2 ** n, cells)
            for mask in range(2 ** n):
                mask_weight = weight * row_weights[row][mask]
                values, freqs = np.unique(hist[mask], return_counts=True)
                for value, freq in zip(values, freqs):
                    distribution[int(value)] += mask_weight * int(freq) * cell_share
            return
        for mask in range(2 ** n):
            descend(row + 1, codes + parities[mask] * (1 << row), weight * row_weights[row][mask])

    descend(0, np.zeros(len(members), dtype=np.int64), Fraction(1) if exact else 1.0)

    mean = sum(value * prob for value, prob in distribution.items())
    second = sum(value * value * prob for value, prob in distribution.items())
    variance = second - mean * mean
    return HashMoments(mean=mean, variance=variance, dispersion=variance / mean, distribution=dict(distribution))


def kernel_probability(tau, schedule, m, exact=True):
    """
    Pr[A^(m) tau = 0] by enumerating each row's 2^n masks.

    For the dense schedule and tau != 0 this is Pr[h(x) = h(y)] = 2^-m.
    """
    n = schedule.n
    if not 0 <= tau < 2 ** n:
        raise ContractError(f"tau={tau} outside {{0,1}}^{n}")
    if n > MOMENT_GUARD:
        raise EnumerationGuardError(f"kernel_probability enumerates 2^n masks, n={n} too large")
    convert = as_fraction if exact else float
    probability = Fraction(1) if exact else 1.0
    for i in range(m):
        p = convert(schedule.p[i])
        probability *= sum(
            _mask_weight(p, popcount(mask), n) for mask in range(2 ** n) if popcount(mask & tau) % 2 == 0
        )
    return probability


def down_operator(s, i):
    """D_i: clear coordinate i of z when the result is not already in S."""
    if not 1 <= i <= s.n:
        raise ContractError(f"i={i} outside 1..{s.n}")
    bit = _coordinate_bit(s.n, i)
    result = set()
    for z in s.members:
        target = z & ~bit
        result.add(target if z & bit and target not in s.members else z)
    return ExplicitSet(s.n, frozenset(result))


def left_compress(s, i, j):
    """L_{i,j}, i < j: swap coordinates i and j of z when z_i = 0, z_j = 1 and the swap is not in S."""
    if not 1 <= i < j <= s.n:
        raise ContractError(f"Need 1 <= i < j <= {s.n}, got i={i}, j={j}")
    bit_i = _coordinate_bit(s.n, i)
    bit_j = _coordinate_bit(s.n, j)
    result = set()
    for z in s.members:
        if not z & bit_i and z & bit_j:
            swapped = (z | bit_i) & ~bit_j
            result.add(swapped if swapped not in s.members else z)
        else:
            result.add(z)
    return ExplicitSet(s.n, frozenset(result))


def is_down_set(s):
    return all(z & ~(1 << b) in s.members for z in s.members for b in range(s.n) if z >> b & 1)


def is_left_compressed(s):
    return all(
        left_compress(s, i, j).members == s.members
        for i in range(1, s.n + 1)
        for j in range(i + 1, s.n + 1)
    )


def canonicalize_with_sweeps(s):
    """
    Apply D_1..D_n and every L_{i,j} until nothing moves.

    Returns:
        (down-set that is left-compressed, number of sweeps)
    """
    current = s
    sweeps = 0
    while True:
        sweeps += 1
        before = current.members
        for i in range(1, s.n + 1):
            current = down_operator(current, i)
        for i in range(1, s.n + 1):
            for j in range(i + 1, s.n + 1):
                current = left_compress(current, i, j)
        if current.members == before:
            return current, sweeps


def canonicalize(s):
    return canonicalize_with_sweeps(s)[0]


def pairsum(s, weights):
    """sum_w c_S(w) t(w)."""
    return sum(c * weights[w] for w, c in enumerate(cs_profile(s)))


@dataclass(frozen=True)
class PairsumReport:
    n: int
    size: int
    max_value: float
    witness: ExplicitSet
    maximizers: int
    canonical_maximizer_exists: bool
    canonicalized_attains_max: bool


def _weight_vector(n, t):
    if callable(t):
        return np.array([float(t(w)) for w in range(n + 1)])
    weights = np.asarray(t, dtype=float)
    if weights.shape != (n + 1,):
        raise ContractError(f"Weight sequence must have n + 1 = {n + 1} entries")
    return weights


def max_weighted_pairsum(n, size, t):
    """
    Exhaustive maximum of sum_w c_S(w) t(w) over all S of the given size.

    Args:
        n: dimension, at most 4
        size: |S|
        t: non-increasing weight, callable w -> t(w) or sequence indexed by w

    Returns:
        PairsumReport; canonical_maximizer_exists records whether some
        maximizer is a left-compressed down-set
    """
    if n > PAIRSUM_GUARD:
        raise EnumerationGuardError(f"max_weighted_pairsum enumerates n <= {PAIRSUM_GUARD}, got {n}")
    if not 1 <= size <= 2 ** n:
        raise ContractError(f"size={size} outside 1..{2 ** n}")

    weights = _weight_vector(n, t)
    points = np.arange(2 ** n)
    distance = np.vectorize(popcount)(points[:, None] ^ points[None, :])
    pair_weights = weights[distance]
    combos = np.array(list(itertools.combinations(range(2 ** n), size)), dtype=np.int64)
    values = pair_weights[combos[:, :, None], combos[:, None, :]].sum(axis=(1, 2))

    best = float(values.max())
    tolerance = FLOAT_TOLERANCE * max(1.0, abs(best))
    winners = np.flatnonzero(values >= best - tolerance)

    first = ExplicitSet(n, frozenset(int(x) for x in combos[winners[0]]))
    canonical = canonicalize(first)
    canonical_value = pairsum(canonical, weights)
    attains = canonical_value >= best - tolerance

    witness = canonical if attains else None
    if witness is None:
        for index in winners:
            candidate = ExplicitSet(n, frozenset(int(x) for x in combos[index]))
            if is_down_set(candidate) and is_left_compressed(candidate):
                witness = candidate
                break

    return PairsumReport(
        n=n,
        size=size,
        max_value=best,
        witness=witness if witness is not None else first,
        maximizers=len(winners),
        canonical_maximizer_exists=witness is not None,
        canonicalized_attains_max=bool(attains),
    )


def weight_panel(n):
    """Monotone weight functions used by the pair-sum sweep."""
    panel = {
        "constant": [1.0] * (n + 1),
        "halving": [2.0 ** -w for w in range(n + 1)],
    }
    for m in (1, 2):
        if m > n:
            continue
        for name, schedule in (("lsa", lsa_schedule(n)), ("dense", dense_schedule(n))):
            panel[f"r_m{m}_{name}"] = [r(w, m, schedule) for w in range(n + 1)]
    return panel


def downleftset_sweep(ns=(2, 3, 4)):
    """Every size and panel weight for each n; returns the list of reports."""
    reports = []
    for n in ns:
        for name, weights in weight_panel(n).items():
            for size in range(1, 2 ** n + 1):
                report = max_weighted_pairsum(n, size, weights)
                reports.append((name, report))
                if not report.canonical_maximizer_exists:
                    logger.warning("No left-compressed down-set among maximizers: n=%d size=%d t=%s", n, size, name)
    return reports


@dataclass(frozen=True)
class ProbabilityBoundReport:
    mean: object
    dispersion: object
    beta: object
    chebyshev_tail: object
    chebyshev_bound: object
    paley_zygmund_tail: object
    paley_zygmund_bound: object

    @property
    def holds(self):
        return self.chebyshev_tail <= self.chebyshev_bound and self.paley_zygmund_tail <= self.paley_zygmund_bound


def check_probability_bounds(s, schedule, m, beta):
    """
    Exact tails of Cnt(S, m) against both concentration forms.

    With E the mean and rho the exact dispersion of this (S, schedule, m):
        Pr[|C - E| >= beta E] <= rho / (beta^2 E)
        Pr[C <= beta E]       <= rho / (rho + (1 - beta)^2 E)
    """
    if not 0 < beta < 1:
        raise ContractError(f"beta must be in (0, 1), got {beta}")
    moments = exhaustive_hash_moments(s, schedule, m, exact=True)
    beta = as_fraction(beta)
    mean = moments.mean
    rho = moments.dispersion

    chebyshev_tail = sum(p for v, p in moments.distribution.items() if abs(v - mean) >= beta * mean)
    paley_tail = sum(p for v, p in moments.distribution.items() if v <= beta * mean)
    return ProbabilityBoundReport(
        mean=mean,
        dispersion=rho,
        beta=beta,
        chebyshev_tail=chebyshev_tail,
        chebyshev_bound=rho / (beta * beta * mean),
        paley_zygmund_tail=paley_tail,
        paley_zygmund_bound=rho / (rho + (1 - beta) ** 2 * mean),
    )


def observed_epsilon(estimate, exact):
    """max(exact / estimate - 1, estimate / exact - 1)."""
    if estimate <= 0 or exact <= 0:
        raise ContractError(f"observed_epsilon needs positive values, got estimate={estimate}, exact={exact}")
    return max(exact / estimate - 1.0, estimate / exact - 1.0)


@dataclass(frozen=True)
class MonteCarloEstimate:
    mean: float
    variance: float
    dispersion: float
    stderr_mean: float
    stderr_dispersion: float
    trials: int


def monte_carlo_dispersion(s, schedule, m, trials, rng):
    """
    Sampled mean / variance / dispersion of Cnt(S, m).

    Trials run in equal batches; standard errors come from the spread of the
    batch statistics.
    """
    if trials < MONTE_CARLO_MIN_TRIALS:
        raise ContractError(f"trials must be >= {MONTE_CARLO_MIN_TRIALS}, got {trials}")
    n = s.n
    if schedule.n != n or not 1 <= m <= n:
        raise ContractError(f"Need schedule.n == s.n and 1 <= m <= n (m={m})")

    points = np.array([point_from_int(n, x) for x in sorted(s.members)], dtype=np.int64)
    densities = schedule.as_array()[:m]
    batch = trials // MONTE_CARLO_BATCHES
    counts = []
    batch_stats = []
    for index in range(MONTE_CARLO_BATCHES):
        size = batch if index < MONTE_CARLO_BATCHES - 1 else trials - batch * (MONTE_CARLO_BATCHES - 1)
        matrices = (rng.random((size, m, n)) < densities[None, :, None]).astype(np.int64)
        offsets = rng.integers(0, 2, size=(size, m))
        parity = (matrices @ points.T) & 1
        in_cell = np.all(parity == offsets[:, :, None], axis=1)
        cnt = in_cell.sum(axis=1)
        counts.append(cnt)
        batch_mean = cnt.mean()
        batch_stats.append((batch_mean, cnt.var(ddof=1) / batch_mean if batch_mean > 0 else 0.0))

    counts = np.concatenate(counts)
    mean = float(counts.mean())
    variance = float(counts.var(ddof=1))
    stats = np.array(batch_stats)
    root = math.sqrt(MONTE_CARLO_BATCHES)
    return MonteCarloEstimate(
        mean=mean,
        variance=variance,
        dispersion=variance / mean if mean > 0 else 0.0,
        stderr_mean=float(stats[:, 0].std(ddof=1) / root),
        stderr_dispersion=float(stats[:, 1].std(ddof=1) / root),
        trials=trials,
    )


@dataclass(frozen=True)
class DispersionCase:
    """One exhaustive (S, schedule, m) case of the moment sweep."""

    members: tuple
    m: int
    p: float
    size: int
    mean: Fraction
    variance: Fraction
    formula_variance: Fraction
    dispersion: Fraction
    bound: float


def all_nonempty_sets(n):
    points = range(2 ** n)
    for size in range(1, 2 ** n + 1):
        for combo in itertools.combinations(points, size):
            yield ExplicitSet(n, frozenset(combo))


def moment_sweep(n=3, ms=(1, 2), p_grid=(0.1, 0.25, 0.5), k=512, rho=1.1):
    """Exact moments, variance formula and bound for every non-empty S of {0,1}^n."""
    cases = []
    config = DispersionBoundConfig(n=n, k=k, rho=rho, qs=1)
    for p in p_grid:
        schedule = DensitySchedule(tuple([p] * n), "dense" if p == 0.5 else "custom")
        bounds = {m: dispersion_bound(m, config, schedule).total for m in ms}
        for s in all_nonempty_sets(n):
            for m in ms:
                moments = exhaustive_hash_moments(s, schedule, m, exact=True)
                cases.append(DispersionCase(
                    members=tuple(sorted(s.members)),
                    m=m,
                    p=p,
                    size=len(s),
                    mean=moments.mean,
                    variance=moments.variance,
                    formula_variance=variance_formula(s, schedule, m, exact=True),
                    dispersion=moments.dispersion,
                    bound=bounds[m],
                ))
    return cases


def concentration_holds(cases, rho, qs, k):
    """Every case with m >= qs and |S| <= k * 2^m has dispersion <= rho."""
    return all(
        case.dispersion <= rho
        for case in cases
        if case.m >= qs and case.size <= k * 2 ** case.m
    )


def concentration_monotonicity_violations(cases, rhos, qss, ks):
    """
    (rho, qs, k) -> (rho', qs', k') pairs where concentration holds for the
    first but not for a weaker requirement rho' >= rho, qs' >= qs, k' <= k.
    """
    holds = {
        (rho, qs, k): concentration_holds(cases, rho, qs, k)
        for rho in rhos for qs in qss for k in ks
    }
    violations = []
    for (rho, qs, k), ok in holds.items():
        if not ok:
            continue
        for (rho2, qs2, k2), ok2 in holds.items():
            if rho2 >= rho and qs2 >= qs and k2 <= k and not ok2:
                violations.append(((rho, qs, k), (rho2, qs2, k2)))
    return violations


def prefix_monotonicity_violations(n=6, samples=20, schedule=None, seed=0):
    """Sampled hashes whose cell at prefix i+1 is not inside the cell at prefix i."""
    schedule = schedule or lsa_schedule(n)
    rng = np.random.default_rng(seed)
    violations = 0
    for _ in range(samples):
        h = sample_prefix_hash(n, schedule, tuple(range(1, n + 1)), rng)
        for y in range(2 ** n):
            point = point_from_int(n, y)
            inside = [in_cell(h, m, point) for m in range(1, n + 1)]
            # once a prefix fails, every longer prefix must fail
            if any(later and not earlier for earlier, later in zip(inside, inside[1:])):
                violations += 1
    return violations


@dataclass(frozen=True)
class ReferenceInstance:
    name: str
    formula: CnfFormula
    count: int


def _free_block(n):
    return CnfFormula(num_vars=n)


def _parity_block(n, groups, rng):
    xors = tuple(XorConstraint(group, int(rng.integers(0, 2))) for group in groups)
    return lower_xors(CnfFormula(num_vars=n, xors=xors), max_width=4)


def _equivalence(a, b):
    return [(-a, b), (a, -b)]


def _random_three_cnf(num_vars, num_clauses, rng):
    clauses = []
    while len(clauses) < num_clauses:
        variables = rng.choice(np.arange(1, num_vars + 1), size=3, replace=False)
        signs = rng.integers(0, 2, size=3) * 2 - 1
        clauses.append(tuple(int(v * s) for v, s in zip(variables, signs)))
    return clauses


def reference_instances(seed=2024):
    """
    Ten instances whose projected counts are known exactly, all in [2^10, 2^20].

    Free blocks and disjoint parity blocks have closed-form counts; projected
    blocks tie hidden variables to the projection; random 3-CNF parts are
    counted exactly and padded with free variables.
    """
    rng = np.random.default_rng(seed)
    instances = [
        ReferenceInstance("free_12", _free_block(12), 2 ** 12),
        ReferenceInstance("free_14", _free_block(14), 2 ** 14),
        ReferenceInstance(
            "parity_16_3",
            _parity_block(16, [(1, 2, 3), (4, 5, 6), (7, 8, 9)], rng),
            2 ** 13,
        ),
        ReferenceInstance(
            "parity_18_4",
            _parity_block(18, [(1, 2, 3, 4), (5, 6, 7, 8), (9, 10, 11, 12), (13, 14, 15, 16)], rng),
            2 ** 14,
        ),
    ]

    # hidden x_{12+i} <-> x_i for i = 1, 2 and (x13 or x14): projected count 3 * 2^10
    clauses = _equivalence(13, 1) + _equivalence(14, 2) + [(13, 14)]
    instances.append(ReferenceInstance(
        "projected_equiv_14",
        CnfFormula(num_vars=14, clauses=tuple(clauses), projection=tuple(range(1, 13))),
        3 * 2 ** 10,
    ))

    # hidden x12 = x1 xor x2 and (x12 -> x3): projected count 2^11 - 2^9
    hidden = lower_xors(CnfFormula(num_vars=12, xors=(XorConstraint((1, 2, 12), 0),)))
    instances.append(ReferenceInstance(
        "projected_xor_12",
        CnfFormula(
            num_vars=hidden.num_vars,
            clauses=hidden.clauses + ((-12, 3),),
            projection=tuple(range(1, 12)),
        ),
        2 ** 11 - 2 ** 9,
    ))

    attempt = 0
    while len(instances) < 10:
        attempt += 1
        core_vars = 12
        clauses = _random_three_cnf(core_vars, 18 + 2 * (len(instances) - 6), rng)
        core = CnfFormula(num_vars=core_vars, clauses=tuple(clauses))
        core_count = exact_count(core)
        if core_count == 0:
            continue
        pad = max(0, 10 - int(math.floor(math.log2(core_count)))) + 2
        count = core_count * 2 ** pad
        if count > 2 ** 20:
            continue
        instances.append(ReferenceInstance(
            f"random3cnf_{len(instances) - 5}",
            CnfFormula(num_vars=core_vars + pad, clauses=tuple(clauses)),
            count,
        ))
    logger.debug("Built %d reference instances (%d random attempts)", len(instances), attempt)
    return instances


@dataclass(frozen=True)
class PacRow:
    instance: str
    exact: int
    schedule: str
    estimates: tuple
    successes: int
    mean_observed_epsilon: float
    mstar: int

    @property
    def success_rate(self):
        return self.successes / len(self.estimates) if self.estimates else 0.0

    def to_dict(self):
        return {
            "instance": self.instance,
            "exact": self.exact,
            "schedule": self.schedule,
            "estimates": list(self.estimates),
            "successes": self.successes,
            "success_rate": self.success_rate,
            "mean_observed_epsilon": self.mean_observed_epsilon,
            "mstar": self.mstar,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["instance"], data["exact"], data["schedule"], tuple(data["estimates"]),
            data["successes"], data["mean_observed_epsilon"], data["mstar"],
        )


def pac_sweep(instances, schedules=("dense", "lsa"), runs=20, epsilon=0.8, delta=0.1,
              rho=1.1, improved_t=False, oracle=None, seed=1):
    """
    Repeated seeded counts against known exact counts.

    A run succeeds when exact / (1 + eps) <= estimate <= (1 + eps) * exact.

    Returns:
        list of PacRow, one per (instance, schedule)
    """
    rows = []
    for instance in instances:
        mstar = compute_mstar(instance.count, epsilon, rho)
        for kind in schedules:
            estimates = []
            for run in range(runs):
                params = CounterParams(
                    epsilon=epsilon, delta=delta, rho=rho, schedule_kind=kind,
                    master_seed=seed * 1000 + run, improved_t=improved_t,
                )
                estimates.append(approxmc5(instance.formula, params, oracle).value)
            low, high = instance.count / (1 + epsilon), instance.count * (1 + epsilon)
            successes = sum(1 for e in estimates if low <= e <= high)
            observed = [observed_epsilon(e, instance.count) for e in estimates if e > 0]
            mean_obs = float(np.mean(observed)) if observed else math.inf
            logger.info(
                "%s/%s: %d/%d within (1+eps), mean eps_obs %.3f", instance.name, kind, successes, runs, mean_obs
            )
            rows.append(PacRow(instance.name, instance.count, kind, tuple(estimates), successes, mean_obs, mstar))
    return rows


def pac_summary(rows):
    """
    Check entry for a PAC sweep.

    Passes when at least 90% of all runs land within (1 + eps) of the exact
    count and the mean observed epsilon over the rows is at most 0.3.
    """
    total = sum(len(row.estimates) for row in rows)
    successes = sum(row.successes for row in rows)
    finite = [row.mean_observed_epsilon for row in rows if math.isfinite(row.mean_observed_epsilon)]
    mean_obs = float(np.mean(finite)) if finite else None
    passed = (
        total > 0
        and successes >= PAC_MIN_SUCCESS_RATE * total
        and mean_obs is not None
        and mean_obs <= PAC_MAX_MEAN_EPSILON
    )
    return _check_entry(
        passed, total, total - successes,
        success_rate=successes / total if total else 0.0,
        mean_observed_epsilon=mean_obs,
        rows=[row.to_dict() for row in rows],
    )


def pac_rows_from_report(report):
    """PacRow list stored in a suite report, or [] when PAC did not run."""
    return [PacRow.from_dict(data) for data in report.get("pac", {}).get("rows", [])]


def tiny_search_instance(rng, n=6):
    """Random projected formula over n variables with a few short clauses."""
    clauses = []
    for _ in range(int(rng.integers(0, 4))):
        variables = rng.choice(np.arange(1, n + 1), size=2, replace=False)
        signs = rng.integers(0, 2, size=2) * 2 - 1
        clauses.append(tuple(int(v * s) for v, s in zip(variables, signs)))
    return CnfFormula(num_vars=n, clauses=tuple(clauses))


def logsat_crossing_sweep(cases=50, thresh=3, seed=7, n=6):
    """
    log_sat_search against a linear scan on seeded tiny instances.

    Returns:
        dict with checked / skipped / mismatches counts
    """
    rng = np.random.default_rng(seed)
    checked = skipped = mismatches = 0
    while checked < cases:
        formula = tiny_search_instance(rng, n)
        h = sample_prefix_hash(n, dense_schedule(n), formula.projection, rng)
        full = bounded_count(cell_formula(formula, h, n), thresh)
        if full.saturated or bounded_count(formula, thresh).count < thresh:
            skipped += 1
            continue
        prev_m = int(rng.integers(1, n + 1))
        search = log_sat_search(formula, h, thresh, prev_m, known={n: full.count})
        expected = linear_scan_crossing(formula, h, thresh)
        below = search.m == 1 or search.verdicts.get(search.m - 1, thresh) >= thresh
        if search.m != expected or search.n_sols >= thresh or not below:
            mismatches += 1
            logger.warning("Search mismatch: got m=%d, scan gave %s", search.m, expected)
        checked += 1
    return {"checked": checked, "skipped": skipped, "mismatches": mismatches}


def _check_entry(passed, cases, violations, **details):
    return {"passed": bool(passed), "cases": cases, "violations": violations, **details}


def run_verification_suite(with_pac=False, pac_runs=20, seed=1, downleft_ns=(2, 3, 4)):
    """
    Run every desk-scale check and report pass/fail per check.

    Returns:
        dict check name -> {"passed", "cases", "violations", ...}
    """
    started = time.perf_counter()
    report = {}

    cases = moment_sweep()
    mean_bad = sum(1 for c in cases if c.mean != Fraction(c.size, 2 ** c.m))
    var_bad = sum(1 for c in cases if c.variance != c.formula_variance)
    dense_bad = sum(1 for c in cases if c.p == 0.5 and c.dispersion > 1)
    bound_bad = sum(1 for c in cases if float(c.dispersion) > c.bound + FLOAT_TOLERANCE)
    report["mean_identity"] = _check_entry(mean_bad == 0, len(cases), mean_bad)
    report["variance_identity"] = _check_entry(var_bad == 0, len(cases), var_bad)
    report["dense_dispersion_at_most_one"] = _check_entry(
        dense_bad == 0, sum(1 for c in cases if c.p == 0.5), dense_bad
    )
    report["dispersion_bound_soundness"] = _check_entry(bound_bad == 0, len(cases), bound_bad)

    kernel_bad = 0
    kernel_cases = 0
    for p in (0.1, 0.25, 0.5):
        schedule = DensitySchedule(tuple([p] * 4), "custom")
        for tau in range(2 ** 4):
            for m in (1, 2, 3):
                kernel_cases += 1
                if kernel_probability(tau, schedule, m) != q(popcount(tau), m, schedule, exact=True):
                    kernel_bad += 1
    report["kernel_probability"] = _check_entry(kernel_bad == 0, kernel_cases, kernel_bad)

    prefix_bad = prefix_monotonicity_violations(seed=seed)
    report["prefix_monotonicity"] = _check_entry(prefix_bad == 0, 20, prefix_bad)

    downleft = downleftset_sweep(downleft_ns)
    downleft_bad = sum(1 for _, rep in downleft if not rep.canonical_maximizer_exists)
    report["downleftset"] = _check_entry(downleft_bad == 0, len(downleft), downleft_bad)

    bound_checks = 0
    bound_violations = 0
    for beta in (0.3, 0.5, 0.7):
        for schedule in (dense_schedule(3), DensitySchedule((0.25, 0.25, 0.25), "custom")):
            for s in all_nonempty_sets(3):
                bound_checks += 1
                if not check_probability_bounds(s, schedule, 1, beta).holds:
                    bound_violations += 1
    report["probability_bounds"] = _check_entry(bound_violations == 0, bound_checks, bound_violations)

    mono = concentration_monotonicity_violations(cases, rhos=(1.0, 1.1, 1.5, 2.0), qss=(1, 2), ks=(1, 2, 4, 512))
    report["concentration_monotonicity"] = _check_entry(not mono, 32, len(mono))

    search = logsat_crossing_sweep(seed=seed)
    report["logsat_search"] = _check_entry(search["mismatches"] == 0, search["checked"], search["mismatches"],
                                     skipped=search["skipped"])

    if with_pac:
        try:
            rows = pac_sweep(reference_instances(), runs=pac_runs, seed=seed)
        except OracleError as e:
            report["pac"] = _check_entry(False, 0, 1, error=str(e))
        else:
            report["pac"] = pac_summary(rows)

    logger.info("Verification suite finished in %.1fs", time.perf_counter() - started)
    return report
