"""
Tests for Verification Oracles

Run with: python test_verify.py
"""

import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

# Add parent directory to path to import the package
sys.path.insert(0, str(Path(__file__).parent.parent))

from jk_modelcount.counter import compute_mstar
from jk_modelcount.errors import ContractError, EnumerationGuardError
from jk_modelcount.formula import CnfFormula
from jk_modelcount.hashgen import DensitySchedule, dense_schedule
from jk_modelcount.oracle import bounded_count
from jk_modelcount.verify import (
    ExplicitSet,
    PacRow,
    canonicalize,
    check_probability_bounds,
    cs,
    cs_profile,
    down_operator,
    downleftset_sweep,
    exact_count,
    exhaustive_hash_moments,
    is_down_set,
    is_left_compressed,
    kernel_probability,
    left_compress,
    logsat_crossing_sweep,
    max_weighted_pairsum,
    monte_carlo_dispersion,
    observed_epsilon,
    pac_rows_from_report,
    pac_summary,
    pac_sweep,
    prefix_monotonicity_violations,
    reference_instances,
    run_verification_suite,
    variance_formula,
    weight_panel,
)


def test_explicit_set():
    """Test string conversion and coordinate order"""
    s = ExplicitSet.from_strings(["100", "011"])

    assert s.n == 3
    assert 0b100 in s
    assert len(s) == 2
    assert s.to_strings() == ["011", "100"]

    for bad in (lambda: ExplicitSet(2, frozenset({4})), lambda: ExplicitSet.from_strings(["10", "1"])):
        try:
            bad()
            assert False, "Should have raised"
        except ContractError:
            pass

    print("✓ test_explicit_set passed")


def test_exact_count_matches_solver_enumeration():
    """Test enumeration against blocking-clause counting"""
    rng = np.random.default_rng(4)
    for trial in range(8):
        clauses = []
        for _ in range(10 + trial):
            variables = rng.choice(np.arange(1, 9), size=3, replace=False)
            signs = rng.integers(0, 2, size=3) * 2 - 1
            clauses.append(tuple(int(v * s) for v, s in zip(variables, signs)))
        projection = tuple(range(1, 6)) if trial % 2 else ()
        formula = CnfFormula(num_vars=8, clauses=tuple(clauses), projection=projection)
        expected = bounded_count(formula, 1000).count
        assert exact_count(formula) == expected, f"Trial {trial}"

    assert exact_count(CnfFormula(num_vars=10, clauses=((1, 2),))) == 3 * 2 ** 8

    try:
        exact_count(CnfFormula(num_vars=27))
        assert False, "Should have raised"
    except EnumerationGuardError:
        pass

    print("✓ test_exact_count_matches_solver_enumeration passed")


def test_pair_distance_profile():
    """Test c_S(w) counts"""
    s = ExplicitSet.from_strings(["000", "011", "111"])
    profile = cs_profile(s)

    assert profile == [3, 2, 2, 2]
    assert sum(profile) == len(s) ** 2
    assert cs(1, s) == 2
    assert [cs(w, s) for w in range(4)] == profile

    print("✓ test_pair_distance_profile passed")


def test_exhaustive_moments_small_case():
    """Test a hand-computed dense distribution"""
    s = ExplicitSet.from_strings(["00", "01"])
    moments = exhaustive_hash_moments(s, dense_schedule(2), 1)

    assert moments.distribution == {0: Fraction(1, 4), 1: Fraction(1, 2), 2: Fraction(1, 4)}
    assert moments.mean == 1
    assert moments.variance == Fraction(1, 2)
    assert moments.dispersion == Fraction(1, 2)
    assert variance_formula(s, dense_schedule(2), 1) == Fraction(1, 2)

    print("✓ test_exhaustive_moments_small_case passed")


def test_moments_match_formulas():
    """Test mean |S| / 2^m and the variance formula on sparse rows"""
    schedules = [dense_schedule(3), DensitySchedule((0.25, 0.25, 0.25)), DensitySchedule((0.5, 0.1, 0.1))]
    sets = [
        ExplicitSet.from_strings(["000"]),
        ExplicitSet.from_strings(["001", "110"]),
        ExplicitSet.from_strings(["000", "001", "010", "100", "111"]),
    ]
    for schedule in schedules:
        for s in sets:
            for m in (1, 2):
                moments = exhaustive_hash_moments(s, schedule, m)
                assert moments.mean == Fraction(len(s), 2 ** m)
                assert moments.variance == variance_formula(s, schedule, m), f"{s.to_strings()} m={m}"
                assert sum(moments.distribution.values()) == 1
                if schedule.kind == "dense":
                    assert moments.dispersion <= 1

    floats = exhaustive_hash_moments(sets[2], schedules[1], 2, exact=False)
    assert abs(floats.variance - float(variance_formula(sets[2], schedules[1], 2))) < 1e-12

    try:
        exhaustive_hash_moments(ExplicitSet(6, frozenset({1})), dense_schedule(6), 4)
        assert False, "Should have raised"
    except EnumerationGuardError:
        pass

    print("✓ test_moments_match_formulas passed")


def test_kernel_probability():
    """Test Pr[A tau = 0] on dense and sparse rows"""
    dense = dense_schedule(4)
    for tau in range(1, 16):
        assert kernel_probability(tau, dense, 3) == Fraction(1, 8)
    assert kernel_probability(0, dense, 3) == 1

    sparse = DensitySchedule((0.25,) * 4)
    # one row, single-coordinate tau: that coordinate is off with probability 3/4
    assert kernel_probability(0b1000, sparse, 1) == Fraction(3, 4)

    print("✓ test_kernel_probability passed")


def test_down_and_left_operators():
    """Test D_i and L_{i,j} on hand-checked sets"""
    s = ExplicitSet.from_strings(["100", "011", "101"])
    assert down_operator(s, 3).to_strings() == ["010", "100", "101"]

    moved = left_compress(ExplicitSet.from_strings(["001", "010"]), 1, 3)
    assert moved.to_strings() == ["010", "100"]

    for bad in (lambda: down_operator(s, 4), lambda: left_compress(s, 2, 2)):
        try:
            bad()
            assert False, "Should have raised"
        except ContractError:
            pass

    print("✓ test_down_and_left_operators passed")


def test_canonicalize():
    """Test that the sweep ends at a left-compressed down-set"""
    canonical = canonicalize(ExplicitSet.from_strings(["000", "001", "100"]))

    assert canonical.to_strings() == ["000", "010", "100"]
    assert is_down_set(canonical)
    assert is_left_compressed(canonical)
    assert not is_down_set(ExplicitSet.from_strings(["011"]))

    print("✓ test_canonicalize passed")


def test_max_weighted_pairsum():
    """Test the exhaustive pair-sum maximum"""
    constant = max_weighted_pairsum(3, 4, [1.0] * 4)
    assert constant.max_value == 16.0
    assert constant.canonical_maximizer_exists

    halving = max_weighted_pairsum(2, 2, lambda w: 2.0 ** -w)
    assert halving.max_value == 3.0
    assert halving.canonical_maximizer_exists
    assert is_down_set(halving.witness) and is_left_compressed(halving.witness)

    try:
        max_weighted_pairsum(5, 2, [1.0] * 6)
        assert False, "Should have raised"
    except EnumerationGuardError:
        pass

    print("✓ test_max_weighted_pairsum passed")


def test_probability_bounds():
    """Test exact tails against the concentration forms"""
    s = ExplicitSet.from_strings(["000", "011", "101", "110"])
    report = check_probability_bounds(s, dense_schedule(3), 1, 0.5)

    assert report.mean == 2
    assert report.holds
    assert report.beta == Fraction(1, 2)

    try:
        check_probability_bounds(s, dense_schedule(3), 1, 1.0)
        assert False, "Should have raised"
    except ContractError:
        pass

    print("✓ test_probability_bounds passed")


def test_observed_epsilon():
    """Test the symmetric relative error"""
    assert abs(observed_epsilon(900, 1000) - 1 / 9) < 1e-12
    assert abs(observed_epsilon(1100, 1000) - 0.1) < 1e-12
    assert observed_epsilon(7, 7) == 0.0

    try:
        observed_epsilon(0, 5)
        assert False, "Should have raised"
    except ContractError:
        pass

    print("✓ test_observed_epsilon passed")


def test_monte_carlo_dispersion():
    """Test sampled moments against the exhaustive ones"""
    s = ExplicitSet.from_strings(["0000", "0011", "0101", "1111", "1000"])
    schedule = DensitySchedule((0.3, 0.3, 0.2, 0.2))
    exact = exhaustive_hash_moments(s, schedule, 2, exact=False)
    sampled = monte_carlo_dispersion(s, schedule, 2, 4000, np.random.default_rng(8))

    assert sampled.trials == 4000
    assert abs(sampled.mean - exact.mean) <= 5 * sampled.stderr_mean + 1e-9
    assert abs(sampled.dispersion - exact.dispersion) <= 5 * sampled.stderr_dispersion + 1e-9

    try:
        monte_carlo_dispersion(s, schedule, 2, 10, np.random.default_rng(8))
        assert False, "Should have raised"
    except ContractError:
        pass

    print("✓ test_monte_carlo_dispersion passed")


def test_prefix_monotonicity():
    """Test that longer prefixes only shrink the cell"""
    assert prefix_monotonicity_violations(n=5, samples=5) == 0
    assert prefix_monotonicity_violations(n=5, samples=5, schedule=DensitySchedule((0.5, 0.3, 0.3, 0.2, 0.1))) == 0

    print("✓ test_prefix_monotonicity passed")


def test_reference_instances():
    """Test the ten instances against exact enumeration"""
    instances = reference_instances()

    assert len(instances) == 10
    assert len({instance.name for instance in instances}) == 10
    for instance in instances:
        assert 2 ** 10 <= instance.count <= 2 ** 20, instance.name
        assert exact_count(instance.formula) == instance.count, instance.name

    again = reference_instances()
    assert [i.count for i in again] == [i.count for i in instances], "Seeded instances are reproducible"

    print("✓ test_reference_instances passed")


def test_logsat_crossing_sweep():
    """Test galloping search on seeded tiny instances"""
    result = logsat_crossing_sweep(cases=10, seed=3)

    assert result["checked"] == 10
    assert result["mismatches"] == 0

    print("✓ test_logsat_crossing_sweep passed")


def test_pac_sweep_quality():
    """Test a reduced PAC sweep meets both the success rate and the mean epsilon"""
    instances = reference_instances()
    chosen = [instances[0], instances[4]]
    rows = pac_sweep(chosen, runs=10, delta=0.3, improved_t=True, seed=4)

    assert [(row.instance, row.schedule) for row in rows] == [
        ("free_12", "dense"), ("free_12", "lsa"),
        ("projected_equiv_14", "dense"), ("projected_equiv_14", "lsa"),
    ]
    for row in rows:
        assert len(row.estimates) == 10
        assert row.success_rate >= 0.9, f"{row.instance}/{row.schedule}: {row.estimates}"
        assert row.mean_observed_epsilon <= 0.3, f"{row.instance}/{row.schedule}: {row.mean_observed_epsilon}"
        assert row.mstar == compute_mstar(row.exact, 0.8, 1.1)

    summary = pac_summary(rows)
    assert summary["passed"]
    assert summary["cases"] == 40
    assert summary["mean_observed_epsilon"] <= 0.3

    print("✓ test_pac_sweep_quality passed")


def test_pac_summary_needs_both_conditions():
    """Test that the PAC check fails on a low success rate or a high mean epsilon"""
    accurate = PacRow("a", 4096, "dense", (4096,) * 9 + (100,), 9, 0.1, 5)
    loose = PacRow("b", 4096, "dense", (6000,) * 10, 10, 0.46, 5)
    missing = PacRow("c", 4096, "dense", (4096,) * 8 + (100, 100), 8, 0.2, 5)

    assert pac_summary([accurate])["passed"]
    assert not pac_summary([loose])["passed"], "mean epsilon above 0.3"
    assert not pac_summary([missing])["passed"], "success rate below 0.9"
    assert not pac_summary([])["passed"]

    entry = pac_summary([accurate, loose])
    assert entry["violations"] == 1
    assert abs(entry["mean_observed_epsilon"] - 0.28) < 1e-12
    assert entry["passed"]

    reused = pac_rows_from_report({"pac": entry})
    assert reused == [accurate, loose]
    assert pac_rows_from_report({"mean_identity": {"passed": True}}) == []

    print("✓ test_pac_summary_needs_both_conditions passed")


def test_downleftset_at_four():
    """Test that every n = 4 size and panel weight has a left-compressed down-set maximizer"""
    reports = downleftset_sweep((4,))

    assert len(reports) == len(weight_panel(4)) * 16
    for name, report in reports:
        assert report.n == 4
        assert report.canonical_maximizer_exists, f"{name} size {report.size}"
        assert is_down_set(report.witness) and is_left_compressed(report.witness)

    print("✓ test_downleftset_at_four passed")


def test_verification_suite():
    """Test that every desk-scale check passes"""
    report = run_verification_suite(downleft_ns=(2, 3, 4))

    assert "pac" not in report
    assert report["downleftset"]["cases"] == 6 * (4 + 8 + 16)
    for name, entry in report.items():
        assert entry["passed"], f"{name} failed with {entry['violations']} violations"
        assert entry["violations"] == 0

    print("✓ test_verification_suite passed")


def run_all_tests():
    """Run all test functions"""
    print("Running tests for verify...\n")

    try:
        test_explicit_set()
        test_exact_count_matches_solver_enumeration()
        test_pair_distance_profile()
        test_exhaustive_moments_small_case()
        test_moments_match_formulas()
        test_kernel_probability()
        test_down_and_left_operators()
        test_canonicalize()
        test_max_weighted_pairsum()
        test_probability_bounds()
        test_observed_epsilon()
        test_monte_carlo_dispersion()
        test_prefix_monotonicity()
        test_reference_instances()
        test_logsat_crossing_sweep()
        test_pac_sweep_quality()
        test_pac_summary_needs_both_conditions()
        test_downleftset_at_four()
        test_verification_suite()

        print("\n" + "="*50)
        print("✅ ALL TESTS PASSED!")
        print("="*50)
        return True

    except AssertionError as e:
        print("\n" + "="*50)
        print(f"❌ TEST FAILED: {e}")
        print("="*50)
        return False
    except Exception as e:
        print("\n" + "="*50)
        print(f"❌ UNEXPECTED ERROR: {e}")
        print("="*50)
        import traceback
        traceback.print_exc()
        return False


if __name__ == "__main__":
    success = run_all_tests()
    exit(0 if success else 1)
