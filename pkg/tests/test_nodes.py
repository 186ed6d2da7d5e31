"""
Tests for Model Counting Nodes

Run with: python test_nodes.py
"""

import inspect
import json
import math
import sys
from pathlib import Path

# Add parent directory to path to import the package
sys.path.insert(0, str(Path(__file__).parent.parent))

from jk_modelcount.density import DENSITY_CSV_HEADER
from jk_modelcount.hashgen import dense_schedule, dump_hash, iteration_rng, sample_prefix_hash
from jk_modelcount.nodes import ApproxModelCount, DensityScheduleTable, PrefixHashDump

NODES = (ApproxModelCount, DensityScheduleTable, PrefixHashDump)


def test_count_sample_formula():
    """Test the default input: x1 or x2 or x3"""
    node = ApproxModelCount()
    estimate, log2_estimate, report_json, is_valid, error = node.count_models(
        "p cnf 3 1\n1 2 3 0\n"
    )

    assert is_valid, f"Should be valid: {error}"
    assert error == ""
    assert estimate == "7"
    assert abs(log2_estimate - math.log2(7)) < 1e-12
    report = json.loads(report_json)
    assert report["exact_shortcut"]
    assert report["estimate"] == 7

    print("✓ test_count_sample_formula passed")


def test_count_projection_and_xor():
    """Test c ind projection and x lines"""
    node = ApproxModelCount()
    dimacs = "p cnf 5 2\nc ind 1 2 3 0\nx1 2 0\n4 5 0\n"
    estimate, _, _, is_valid, _ = node.count_models(dimacs, xor_mode="tseitin:3")

    assert is_valid
    assert estimate == "4", f"x1 != x2 leaves 4 projected models, got {estimate}"

    print("✓ test_count_projection_and_xor passed")


def test_count_approximate_path():
    """Test a formula above the exact-count threshold"""
    node = ApproxModelCount()
    estimate, log2_estimate, report_json, is_valid, _ = node.count_models(
        "p cnf 12 0\n", delta=0.3, schedule="dense", seed=9, improved_t=True
    )

    assert is_valid
    assert 4096 / 1.8 <= int(estimate) <= 4096 * 1.8
    assert len(json.loads(report_json)["iterations"]) == 3
    assert abs(log2_estimate - math.log2(int(estimate))) < 1e-12

    print("✓ test_count_approximate_path passed")


def test_count_invalid_inputs():
    """Test errors surface through is_valid / error_message"""
    node = ApproxModelCount()

    result = node.count_models("p cnf 2 1\n3 0\n")
    assert result == ("", 0.0, "{}", False, result[4])
    assert result[4].startswith("line 2:")

    _, _, _, is_valid, error = node.count_models("p cnf 2 1\n1 0\n", xor_mode="bdd")
    assert not is_valid
    assert "bdd" in error

    _, _, _, is_valid, _ = node.count_models("p cnf 2 1\n1 0\n", epsilon=0.0)
    assert not is_valid

    print("✓ test_count_invalid_inputs passed")


def test_density_table_node():
    """Test the CSV output and qs"""
    node = DensityScheduleTable()
    csv_text, qs_lsa, is_valid, error = node.build_table(8)

    assert is_valid, f"Should be valid: {error}"
    lines = csv_text.strip().split("\n")
    assert lines[0] == ",".join(DENSITY_CSV_HEADER)
    assert len(lines) == 9
    assert qs_lsa == -1 or 1 <= qs_lsa <= 8

    _, qs_lsa, is_valid, error = node.build_table(0)
    assert not is_valid
    assert qs_lsa == -1
    assert error

    print("✓ test_density_table_node passed")


def test_prefix_hash_dump_node():
    """Test the dump matches iteration 0 of a counter run"""
    node = PrefixHashDump()
    dump, weights_json, is_valid, error = node.dump_prefix_hash(8, "dense", m=3, seed=4)

    assert is_valid, f"Should be valid: {error}"
    expected = sample_prefix_hash(8, dense_schedule(8), tuple(range(1, 9)), iteration_rng(4, 0))
    assert dump == dump_hash(expected, 3)
    assert len(dump.split("\n")) == 3
    assert json.loads(weights_json) == [int(w) for w in expected.row_weights()[:3]]

    full, _, is_valid, _ = node.dump_prefix_hash(8, "lsa")
    assert is_valid
    assert len(full.split("\n")) == 8, "m = 0 dumps every row"

    for kwargs in (dict(n=4, schedule="dense", m=5), dict(n=4, schedule="ldpc")):
        dump, weights_json, is_valid, error = node.dump_prefix_hash(**kwargs)
        assert not is_valid, f"Should be invalid for {kwargs}"
        assert (dump, weights_json) == ("", "[]")
        assert error

    print("✓ test_prefix_hash_dump_node passed")


def test_return_types():
    """Validate return types"""
    count = ApproxModelCount().count_models("p cnf 3 1\n1 2 3 0\n")
    table = DensityScheduleTable().build_table(4)
    dump = PrefixHashDump().dump_prefix_hash(4)

    for node, result in zip(NODES, (count, table, dump)):
        assert isinstance(result, tuple), f"{node.__name__} should return tuple"
        assert len(result) == len(node.RETURN_TYPES) == len(node.RETURN_NAMES)

    assert isinstance(count[0], str)
    assert isinstance(count[1], float)
    assert isinstance(count[3], bool)
    assert isinstance(table[1], int)
    assert isinstance(dump[2], bool)

    print("✓ test_return_types passed")


def test_input_types_structure():
    """Validate INPUT_TYPES matches function signature"""
    for node in NODES:
        input_types = node.INPUT_TYPES()

        all_inputs = set()
        if "required" in input_types:
            all_inputs.update(input_types["required"].keys())
        if "optional" in input_types:
            all_inputs.update(input_types["optional"].keys())

        function = getattr(node(), node.FUNCTION)
        sig = inspect.signature(function)
        function_params = set(sig.parameters.keys()) - {'self'}

        missing = function_params - all_inputs
        extra = all_inputs - function_params

        assert not missing, f"{node.__name__} has params not in INPUT_TYPES: {missing}"
        assert not extra, f"{node.__name__} INPUT_TYPES has entries not in function: {extra}"

    print("✓ test_input_types_structure passed")


def run_all_tests():
    """Run all test functions"""
    print("Running tests for nodes...\n")

    try:
        test_count_sample_formula()
        test_count_projection_and_xor()
        test_count_approximate_path()
        test_count_invalid_inputs()
        test_density_table_node()
        test_prefix_hash_dump_node()
        test_return_types()
        test_input_types_structure()

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
