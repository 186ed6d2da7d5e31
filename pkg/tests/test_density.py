"""
Tests for Row Density Machinery

Run with: python test_density.py
"""

import csv
import io
import math
import sys
from fractions import Fraction
from pathlib import Path

# Add parent directory to path to import the package
sys.path.insert(0, str(Path(__file__).parent.parent))

from jk_modelcount.density import (
    DENSITY_CSV_HEADER,
    SNAP_TOLERANCE,
    DispersionBoundConfig,
    binary_entropy,
    bound_profile,
    build_schedule,
    cs_bound,
    density_table,
    dispersion_bound,
    find_qs,
    fitted_curve,
    inv_binary_entropy,
    lsa_schedule,
    q,
    r,
    solve_schedule,
    table_to_csv,
    theoretical_density,
    theoretical_schedule,
)
from jk_modelcount.errors import ContractError
from jk_modelcount.hashgen import DensitySchedule, dense_schedule


def _close(a, b, rel=1e-9, abs_tol=1e-12):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_tol)


def test_q_values():
    """Test the kernel probability on hand-checked values"""
    assert _close(q(3, 4, dense_schedule(4)), 0.0625)
    assert q(0, 3, lsa_schedule(5)) == 1.0
    assert _close(q(2, 1, DensitySchedule((0.25,))), 0.625)
    assert q(2, 1, DensitySchedule((0.25,)), exact=True) == Fraction(5, 8)

    schedule = DensitySchedule((0.3, 0.2, 0.1))
    assert _close(float(q(2, 3, schedule, exact=True)), q(2, 3, schedule))

    # multiplicativity in m
    for w in range(0, 6):
        step = 0.5 + 0.5 * (1 - 2 * 0.1) ** w
        assert _close(q(w, 3, schedule), q(w, 2, schedule) * step)

    print("✓ test_q_values passed")


def test_q_log_space_matches_direct_product():
    """Test products over more than 64 rows"""
    m = 100
    schedule = DensitySchedule((0.1,) * m)
    for w in (1, 3, 10):
        direct = math.prod(0.5 + 0.5 * 0.8 ** w for _ in range(m))
        assert _close(q(w, m, schedule), direct, rel=1e-9, abs_tol=0.0), f"w={w}"

    print("✓ test_q_log_space_matches_direct_product passed")


def test_r_values_and_monotonicity():
    """Test r(w, m) = q(w, m) - 2^-m"""
    assert r(3, 4, dense_schedule(4)) == 0.0
    assert _close(r(0, 1, dense_schedule(1)), 0.5)
    assert _close(r(2, 1, DensitySchedule((0.25,))), 0.125)
    assert r(2, 1, DensitySchedule((0.25,)), exact=True) == Fraction(1, 8)

    schedule = lsa_schedule(40)
    for m in (1, 10, 40):
        values = [r(w, m, schedule) for w in range(0, 41)]
        assert all(v >= 0 for v in values), f"Negative r at m={m}"
        assert all(a >= b for a, b in zip(values, values[1:])), f"r not non-increasing in w at m={m}"
        for w in (1, 5):
            assert _close(values[w], q(w, m, schedule) - 2.0 ** -m, rel=1e-6, abs_tol=1e-15)

    print("✓ test_r_values_and_monotonicity passed")


def test_cs_bound():
    """Test the closed-form pair-count bound"""
    assert abs(cs_bound(1, 4, 2) - 2 * 8 * math.e * math.sqrt(8)) < 1e-9
    assert abs(cs_bound(1, 4, 2) - 123.0) < 0.1
    assert abs(cs_bound(1, 1, 1) - 43.49) < 0.01
    assert cs_bound(2, 8, 4) < cs_bound(2, 9, 4) < cs_bound(2, 9, 5), "Bound grows with n and ell"

    try:
        cs_bound(0, 4, 2)
        assert False, "Should have raised for w=0"
    except ContractError:
        pass

    print("✓ test_cs_bound passed")


def test_dense_dispersion_bound():
    """Test that the dense family gives 1 - 2^-m"""
    n = 12
    config = DispersionBoundConfig(n=n, k=512, rho=1.1)
    for m in range(1, n + 1):
        report = dispersion_bound(m, config, dense_schedule(n))
        assert _close(report.total, 1.0 - 2.0 ** -m), f"m={m}: {report.total}"
        assert report.ell == math.ceil(m + 9)
        assert _close(math.fsum(report.terms), report.total)

    small = dispersion_bound(1, DispersionBoundConfig(n=2, k=1), dense_schedule(2))
    assert _close(small.total, 0.5)

    print("✓ test_dense_dispersion_bound passed")


def test_bound_profile_matches_pointwise():
    """Test running log sums against per-prefix evaluation"""
    n = 24
    config = DispersionBoundConfig(n=n, k=512, rho=1.1)
    schedule = lsa_schedule(n)
    profile = bound_profile(config, schedule)

    assert len(profile) == n
    for m in range(1, n + 1):
        pointwise = dispersion_bound(m, config, schedule).total
        assert _close(profile[m - 1], pointwise, rel=1e-9), f"m={m}"

    print("✓ test_bound_profile_matches_pointwise passed")


def test_bound_decreases_with_density():
    """Test the bound is non-increasing as a row gets denser"""
    config = DispersionBoundConfig(n=8, k=16, rho=1.1)
    previous = math.inf
    for p in (0.05, 0.1, 0.2, 0.3, 0.4, 0.5):
        schedule = DensitySchedule((0.5, 0.5, p))
        total = dispersion_bound(3, config, schedule).total
        assert total <= previous + 1e-12, f"Bound rose at p={p}"
        previous = total

    print("✓ test_bound_decreases_with_density passed")


def test_solve_schedule():
    """Test the row-by-row solver"""
    n = 20
    config = DispersionBoundConfig(n=n, k=512, rho=1.1, qs=1)
    solved = solve_schedule(config)
    profile = bound_profile(config, solved)

    assert solved.kind == "solved"
    assert solved.n == n
    assert all(a >= b for a, b in zip(solved.p, solved.p[1:]))
    for m in range(1, n + 1):
        assert profile[m - 1] <= 1.1, f"Prefix {m} bound {profile[m - 1]} exceeds rho"
    assert solved.p[-1] < 0.5, "Late rows get sparser than dense"
    assert solved.p[0] == 0.5, "Head rows within the snap tolerance are exactly dense"
    first_sparse = next(p for p in solved.p if p != 0.5)
    assert first_sparse < 0.5 - SNAP_TOLERANCE
    assert find_qs(solved, n, 512, 1.1) == config.qs

    late = solve_schedule(DispersionBoundConfig(n=10, k=512, rho=1.1, qs=5))
    assert late.p[:4] == (0.5, 0.5, 0.5, 0.5), "Rows before qs stay dense"
    assert find_qs(late, 10, 512, 1.1) <= 5

    print("✓ test_solve_schedule passed")


def test_lsa_schedule():
    """Test the fitted schedule"""
    schedule = lsa_schedule(1000)

    assert schedule.kind == "lsa"
    assert schedule.p[:11] == (0.5,) * 11, "Rows 1..11 sit at the cap"
    assert schedule.p[11] < 0.5
    assert abs(schedule.p[99] - 0.1065) < 1e-4
    assert abs(schedule.p[999] - 0.01595) < 1e-5
    assert abs(fitted_curve(100) - 1.6 * math.log2(101) / 100) < 1e-15

    print("✓ test_lsa_schedule passed")


def test_inverse_binary_entropy():
    """Test the bisection inverse"""
    assert inv_binary_entropy(0.0) == 0.0
    assert inv_binary_entropy(1.0) == 0.5
    assert abs(inv_binary_entropy(0.5) - 0.11003) < 1e-5
    for y in (0.01, 0.3, 0.9, 0.999):
        x = inv_binary_entropy(y)
        assert 0.0 <= x <= 0.5
        assert abs(binary_entropy(x) - y) < 1e-8

    try:
        inv_binary_entropy(1.5)
        assert False, "Should have raised"
    except ContractError:
        pass

    print("✓ test_inverse_binary_entropy passed")


def test_theoretical_schedule():
    """Test the theoretical schedule shape"""
    schedule = theoretical_schedule(2000, 512)

    assert schedule.kind == "theoretical"
    assert schedule.p[0] == 0.5
    assert all(a >= b for a, b in zip(schedule.p, schedule.p[1:]))

    expected = 16 / inv_binary_entropy(1000 / 1009) * math.log2(1000) / 1000
    assert abs(theoretical_density(1000, 512) - expected) < 1e-12
    # far out the density approaches 32 log2(i) / i from above
    assert theoretical_density(2000, 512) > 32 * math.log2(2000) / 2000

    try:
        theoretical_schedule(4, 1)
        assert False, "Should have raised for k < 2"
    except ContractError:
        pass

    print("✓ test_theoretical_schedule passed")


def test_find_qs():
    """Test the qs scan"""
    assert find_qs(dense_schedule(16), 16, 512, 1.1) == 1

    strict = find_qs(lsa_schedule(16), 16, 512, 1.0000001)
    loose = find_qs(lsa_schedule(16), 16, 512, 1e9)
    assert loose == 1
    assert strict is None or strict >= loose

    print("✓ test_find_qs passed")


def test_build_schedule_kinds():
    """Test every named schedule kind"""
    for kind in ("dense", "lsa", "solved", "theoretical"):
        schedule = build_schedule(kind, 10)
        assert schedule.kind == kind
        assert schedule.n == 10

    try:
        build_schedule("ldpc", 10)
        assert False, "Should have raised"
    except ContractError:
        pass

    print("✓ test_build_schedule_kinds passed")


def test_density_table_csv():
    """Test the schedule comparison table"""
    rows, qs_lsa = density_table(16)
    text = table_to_csv(rows)
    parsed = list(csv.reader(io.StringIO(text)))

    assert tuple(parsed[0]) == DENSITY_CSV_HEADER
    assert len(parsed) == 17
    assert parsed[1][0] == "1"
    assert parsed[1][1] == "0.500000"
    assert [row.i for row in rows] == list(range(1, 17))
    assert qs_lsa is None or 1 <= qs_lsa <= 16

    try:
        density_table(0)
        assert False, "Should have raised"
    except ContractError:
        pass

    print("✓ test_density_table_csv passed")


def test_config_validation():
    """Test DispersionBoundConfig contracts"""
    bad = [
        dict(n=0),
        dict(n=4, rho=1.0),
        dict(n=4, k=0.5),
        dict(n=4, qs=5),
        dict(n=4, cs_bound_kind="pluggable"),
    ]
    for kwargs in bad:
        try:
            DispersionBoundConfig(**kwargs)
            assert False, f"Should have raised for {kwargs}"
        except ContractError:
            pass

    config = DispersionBoundConfig(n=4, k=16, cs_bound_kind="pluggable", cs_bound_fn=lambda w, n, ell: 1.0)
    report = dispersion_bound(2, config, dense_schedule(4))
    assert _close(report.total, 0.75)

    print("✓ test_config_validation passed")


def run_all_tests():
    """Run all test functions"""
    print("Running tests for density...\n")

    try:
        test_q_values()
        test_q_log_space_matches_direct_product()
        test_r_values_and_monotonicity()
        test_cs_bound()
        test_dense_dispersion_bound()
        test_bound_profile_matches_pointwise()
        test_bound_decreases_with_density()
        test_solve_schedule()
        test_lsa_schedule()
        test_inverse_binary_entropy()
        test_theoretical_schedule()
        test_find_qs()
        test_build_schedule_kinds()
        test_density_table_csv()
        test_config_validation()

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
