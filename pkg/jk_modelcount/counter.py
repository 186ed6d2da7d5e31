"""
Approximate Model Counter for JK-ModelCounter

ApproxMC5 with prefix hashing:
1. BoundedCount(F, iniThresh); below iniThresh the count is exact
2. otherwise t core iterations, each sampling one prefix hash and searching
   for the first prefix m whose cell holds fewer than thresh models
3. the estimate is the lower median of 2^m * Cnt(F, m) over the iterations,
   with 2^n standing in for an iteration whose full-prefix cell was too big
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from scipy.stats import binom

from .density import build_schedule
from .errors import ContractError, OracleError, SearchInconsistencyError
from .formula import augment_with_xors
from .hashgen import iteration_rng, sample_prefix_hash, slice_to_xors
from .oracle import OracleConfig, bounded_count

logger = logging.getLogger(__name__)

THRESH_COEFFICIENT = 9.84
PIVOT_COEFFICIENT = 78.72
MSTAR_COEFFICIENT = 4.92
ITERATION_COEFFICIENT = 17
CORE_SUCCESS_PROBABILITY = 0.64
COUNTER_SCHEDULES = ("dense", "lsa", "solved", "theoretical")


def _check_epsilon_rho(epsilon, rho):
    if not epsilon > 0:
        raise ContractError(f"epsilon must be > 0, got {epsilon}")
    if not rho >= 1:
        raise ContractError(f"rho must be >= 1, got {rho}")


def compute_thresh(epsilon, rho):
    """thresh = ceil(1 + 9.84 * rho * (1 + eps/(1+eps)) * (1 + 1/eps)^2)."""
    _check_epsilon_rho(epsilon, rho)
    value = 1 + THRESH_COEFFICIENT * rho * (1 + epsilon / (1 + epsilon)) * (1 + 1 / epsilon) ** 2
    return math.ceil(value)


def compute_pivot(epsilon, rho):
    """
    Cell-load parameter k = 78.72 * rho * (1 + 1/eps)^2.

    Returns:
        (raw value, raw rounded up to the next power of two)
    """
    _check_epsilon_rho(epsilon, rho)
    raw = PIVOT_COEFFICIENT * rho * (1 + 1 / epsilon) ** 2
    return raw, 2 ** math.ceil(math.log2(raw))


def compute_inithresh(thresh, qs):
    if qs < 1:
        raise ContractError(f"qs must be >= 1, got {qs}")
    return thresh * 2 ** (qs + 3)


def improved_iterations(delta, success=CORE_SUCCESS_PROBABILITY):
    """
    Smallest odd t whose majority of independent runs is right with prob >= 1 - delta.

    Each run is right with probability `success`; the median is right when
    more than half the runs are.
    """
    if not 0 < delta <= 1:
        raise ContractError(f"delta must be in (0, 1], got {delta}")
    t = 1
    while binom.sf((t - 1) // 2, t, success) < 1 - delta:
        t += 2
    return t


def compute_iterations(delta, improved=False):
    """
    Number of core iterations t = ceil(17 * log2(3 / delta)).

    With improved=True the smaller binomial-tail value is used, never
    exceeding the default.
    """
    if not 0 < delta <= 1:
        raise ContractError(f"delta must be in (0, 1], got {delta}")
    default = math.ceil(ITERATION_COEFFICIENT * math.log2(3 / delta))
    if improved:
        return min(default, improved_iterations(delta))
    return default


def compute_mstar(count, epsilon, rho):
    """m* = floor(log2 count - log2(4.92 * rho * (1 + 1/eps)^2)), a diagnostic."""
    _check_epsilon_rho(epsilon, rho)
    if count <= 0:
        raise ContractError(f"m* needs a positive count, got {count}")
    return math.floor(math.log2(count) - math.log2(MSTAR_COEFFICIENT * rho * (1 + 1 / epsilon) ** 2))


def median(values):
    """Lower median: element (len - 1) // 2 of the sorted values."""
    values = sorted(values)
    if not values:
        raise ContractError("median of an empty list")
    return values[(len(values) - 1) // 2]


@dataclass(frozen=True)
class CounterParams:
    """
    Counter configuration.

    Attributes:
        epsilon: tolerance, > 0
        delta: confidence, in (0, 1]
        rho: dispersion target of the hash family, > 1
        qs: first prefix where concentration is required, >= 1
        schedule_kind: dense, lsa, solved or theoretical
        master_seed: integer seed; iteration i hashes from (seed, i)
        improved_t: use the binomial-tail iteration count
    """

    epsilon: float = 0.8
    delta: float = 0.2
    rho: float = 1.1
    qs: int = 1
    schedule_kind: str = "lsa"
    master_seed: int = 1
    improved_t: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ContractError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.delta <= 1:
            raise ContractError(f"delta must be in (0, 1], got {self.delta}")
        if not self.rho > 1:
            raise ContractError(f"rho must be > 1, got {self.rho}")
        if self.qs < 1:
            raise ContractError(f"qs must be >= 1, got {self.qs}")
        if self.schedule_kind not in COUNTER_SCHEDULES:
            raise ContractError(f"Unknown schedule '{self.schedule_kind}' (expected one of {COUNTER_SCHEDULES})")
        if self.master_seed < 0:
            raise ContractError(f"master_seed must be >= 0, got {self.master_seed}")

    @property
    def thresh(self):
        return compute_thresh(self.epsilon, self.rho)

    @property
    def inithresh(self):
        return compute_inithresh(self.thresh, self.qs)

    @property
    def pivot(self):
        return compute_pivot(self.epsilon, self.rho)

    @property
    def iterations(self):
        return compute_iterations(self.delta, self.improved_t)


@dataclass(frozen=True)
class IterationRecord:
    """
    Outcome of one core iteration.

    value is 2^m * n_sols, or the 2^n sentinel when failed.
    """

    index: int
    m: int
    n_sols: int
    failed: bool
    value: int
    seed: tuple
    queries: int = 0
    solver_calls: int = 0

    def to_dict(self):
        record = asdict(self)
        record["seed"] = list(self.seed) if self.seed is not None else None
        return record


@dataclass(frozen=True)
class SearchResult:
    m: int
    n_sols: int
    queries: int
    solver_calls: int
    verdicts: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CountEstimate:
    """Final estimate plus the per-iteration records that produced it."""

    value: int
    exact_shortcut: bool
    iterations: tuple = ()
    thresh: int = 0
    inithresh: int = 0
    planned_iterations: int = 0
    schedule_kind: str = ""
    pivot: int = 0
    solver_calls: int = 0
    wall_time: float = 0.0

    @property
    def log2_value(self):
        return math.log2(self.value) if self.value > 0 else None

    def to_dict(self, include_timing=True):
        result = {
            "estimate": self.value,
            "log2_estimate": self.log2_value,
            "exact_shortcut": self.exact_shortcut,
            "thresh": self.thresh,
            "inithresh": self.inithresh,
            "planned_iterations": self.planned_iterations,
            "schedule": self.schedule_kind,
            "pivot": self.pivot,
            "solver_calls": self.solver_calls,
            "iterations": [record.to_dict() for record in self.iterations],
        }
        if include_timing:
            result["timing"] = {"wall_time": self.wall_time}
        return result


def cell_formula(formula, h, m):
    """Formula restricted to the cell h^(m)(y) = alpha^(m)."""
    return augment_with_xors(formula, slice_to_xors(h, m))


def log_sat_search(formula, h, thresh, prev_m, *, oracle=None, deadline=None, known=None):
    """
    First prefix m whose cell holds fewer than thresh models.

    Gallops from prev_m (stride doubling toward the crossing), then bisects
    the bracket. Each m is queried at most once. Cnt(F, 0) = |sol(F)| is
    taken as saturated.

    Args:
        formula: CnfFormula
        h: PrefixHash over formula.projection
        thresh: cell-smallness cutoff
        prev_m: starting prefix (previous iteration's m)
        oracle: OracleConfig
        deadline: monotonic deadline for bounded counts
        known: optional {m: count} already measured, must include m = n

    Returns:
        SearchResult with Cnt(F, m) < thresh and Cnt(F, m - 1) >= thresh

    Raises:
        SearchInconsistencyError: verdicts not monotone in m
    """
    n = h.n
    memo = dict(known or {})
    queries = 0
    solver_calls = 0

    def count_at(m):
        nonlocal queries, solver_calls
        if m not in memo:
            result = bounded_count(cell_formula(formula, h, m), thresh, oracle, deadline)
            memo[m] = result.count
            queries += 1
            solver_calls += result.solver_calls
        return memo[m]

    def big(m):
        return count_at(m) >= thresh

    if big(n):
        raise ContractError(f"Cell at full prefix n={n} is not small; caller must return the sentinel")

    lo, hi = 0, n
    start = min(max(prev_m, 1), n)
    if big(start):
        lo = start
        step = 1
        while lo + step < hi:
            point = lo + step
            if big(point):
                lo = point
                step *= 2
            else:
                hi = point
                break
    else:
        hi = start
        step = 1
        while hi - step > lo:
            point = hi - step
            if big(point):
                lo = point
                break
            hi = point
            step *= 2

    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if big(mid):
            lo = mid
        else:
            hi = mid

    seen_small = None
    for m in sorted(memo):
        if memo[m] < thresh:
            seen_small = m if seen_small is None else seen_small
        elif seen_small is not None:
            raise SearchInconsistencyError(
                f"Cell at m={m} saturated after cell at m={seen_small} was small"
            )

    return SearchResult(m=hi, n_sols=memo[hi], queries=queries, solver_calls=solver_calls, verdicts=memo)


def linear_scan_crossing(formula, h, thresh, oracle=None):
    """Reference crossing point: scan m = 1..n for the first small cell."""
    for m in range(1, h.n + 1):
        if bounded_count(cell_formula(formula, h, m), thresh, oracle).count < thresh:
            return m
    return None


def approxmc5_core(formula, schedule, thresh, rng, *, oracle=None, prev_m=1, index=0, seed=None, deadline=None):
    """
    One core iteration: sample (h, alpha), then locate the crossing prefix.

    Args:
        formula: CnfFormula with |sol(F)| >= iniThresh
        schedule: DensitySchedule over the projection
        thresh: cell-smallness cutoff
        rng: numpy Generator owned by this iteration
        oracle: OracleConfig
        prev_m: search start
        index: iteration index recorded on the result
        seed: seed record stored with the hash
        deadline: monotonic deadline

    Returns:
        IterationRecord; its value is 2^m * Cnt(F, m), or 2^n when the
        full-prefix cell is not small
    """
    oracle = oracle or OracleConfig()
    projection = formula.projection
    n = len(projection)
    h = sample_prefix_hash(n, schedule, projection, rng, seed=seed)

    full = bounded_count(cell_formula(formula, h, n), thresh, oracle, deadline)
    if full.saturated:
        logger.debug("Iteration %d: full-prefix cell saturated, returning 2^%d", index, n)
        return IterationRecord(
            index=index, m=n, n_sols=full.count, failed=True, value=2 ** n,
            seed=seed, queries=1, solver_calls=full.solver_calls,
        )

    search = log_sat_search(
        formula, h, thresh, prev_m, oracle=oracle, deadline=deadline, known={n: full.count}
    )
    logger.debug(
        "Iteration %d: m=%d nSols=%d (%d queries)", index, search.m, search.n_sols, search.queries + 1
    )
    return IterationRecord(
        index=index,
        m=search.m,
        n_sols=search.n_sols,
        failed=False,
        value=(2 ** search.m) * search.n_sols,
        seed=seed,
        queries=search.queries + 1,
        solver_calls=search.solver_calls + full.solver_calls,
    )


def _run_iteration(formula, schedule, thresh, master_seed, index, oracle, prev_m, deadline):
    """Pool entry point; rebuilds the iteration RNG inside the worker."""
    try:
        return approxmc5_core(
            formula, schedule, thresh, iteration_rng(master_seed, index),
            oracle=oracle, prev_m=prev_m, index=index, seed=(master_seed, index), deadline=deadline,
        )
    except OracleError as e:
        raise OracleError(f"iteration {index}: {e}", e.partial_count, e.solver_calls) from e


def approxmc5(formula, params=None, oracle=None, workers=1, time_budget=None):
    """
    (epsilon, delta)-approximate projected model count.

    Args:
        formula: CnfFormula
        params: CounterParams
        oracle: OracleConfig
        workers: process count for core iterations; 1 runs them in order
        time_budget: seconds; becomes a deadline for every bounded count

    Returns:
        CountEstimate

    Raises:
        OracleError: solver failure or time budget exhausted, message names the iteration
    """
    params = params or CounterParams()
    oracle = oracle or OracleConfig()
    start = time.perf_counter()
    deadline = time.monotonic() + time_budget if time_budget else None

    thresh = params.thresh
    inithresh = params.inithresh
    planned = params.iterations
    _, pivot = params.pivot

    shortcut = bounded_count(formula, inithresh, oracle, deadline)
    if not shortcut.saturated:
        logger.info("Exact count %d below iniThresh=%d", shortcut.count, inithresh)
        return CountEstimate(
            value=shortcut.count, exact_shortcut=True, thresh=thresh, inithresh=inithresh,
            planned_iterations=planned, schedule_kind=params.schedule_kind, pivot=pivot,
            solver_calls=shortcut.solver_calls, wall_time=time.perf_counter() - start,
        )

    n = len(formula.projection)
    schedule = build_schedule(params.schedule_kind, n, k=pivot, rho=params.rho, qs=params.qs)
    first_m = min(params.qs, n)
    logger.info(
        "Running %d core iterations (thresh=%d, schedule=%s, n=%d)", planned, thresh, params.schedule_kind, n
    )

    records = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_iteration, formula, schedule, thresh, params.master_seed, i, oracle, first_m, deadline)
                for i in range(planned)
            ]
            records = [future.result() for future in futures]
    else:
        prev_m = first_m
        for i in range(planned):
            if deadline is not None and time.monotonic() > deadline:
                raise OracleError(f"iteration {i}: time budget exhausted", solver_calls=0)
            record = _run_iteration(formula, schedule, thresh, params.master_seed, i, oracle, prev_m, deadline)
            records.append(record)
            if not record.failed:
                prev_m = record.m

    failures = sum(1 for record in records if record.failed)
    if failures:
        logger.warning("%d of %d iterations hit the 2^%d sentinel", failures, planned, n)

    estimate = median([record.value for record in records])
    calls = shortcut.solver_calls + sum(record.solver_calls for record in records)
    logger.info("Estimate %d (log2 %.3f) from %d iterations", estimate, math.log2(estimate) if estimate else float("-inf"), planned)
    return CountEstimate(
        value=estimate, exact_shortcut=False, iterations=tuple(records), thresh=thresh,
        inithresh=inithresh, planned_iterations=planned, schedule_kind=params.schedule_kind,
        pivot=pivot, solver_calls=calls, wall_time=time.perf_counter() - start,
    )
