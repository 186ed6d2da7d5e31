"""
Tests for Figures

Run with: python test_plots.py
"""

import sys
import tempfile
from pathlib import Path

# Add parent directory to path to import the package
sys.path.insert(0, str(Path(__file__).parent.parent))

from jk_modelcount.density import density_table
from jk_modelcount.plots import plot_density_trend, plot_quality
from jk_modelcount.verify import PacRow


def test_density_trend_figure():
    """Test the trend figure is written"""
    rows, _ = density_table(12)
    with tempfile.TemporaryDirectory() as directory:
        path = Path(directory) / "trend.png"
        plot_density_trend(rows, 512, str(path))
        assert path.stat().st_size > 0

    print("✓ test_density_trend_figure passed")


def test_quality_figure():
    """Test the quality figure; zero estimates are skipped"""
    rows = [
        PacRow("free_12", 4096, "dense", (4096, 3584, 0), 2, 0.07, 5),
        PacRow("parity_16_3", 8192, "lsa", (7680, 9216), 2, 0.1, 6),
    ]
    with tempfile.TemporaryDirectory() as directory:
        path = Path(directory) / "quality.png"
        plot_quality(rows, 0.8, str(path))
        assert path.stat().st_size > 0

    print("✓ test_quality_figure passed")


def run_all_tests():
    """Run all test functions"""
    print("Running tests for plots...\n")

    try:
        test_density_trend_figure()
        test_quality_figure()

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
