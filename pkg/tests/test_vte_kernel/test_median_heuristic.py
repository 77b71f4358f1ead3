import numpy as np
import pytest
from vte_errors import VteInputError
from vte_kernel import median_heuristic

def test_three_points():
    """Test if rows 0, 1, 3 give the median distance 2"""

    assert median_heuristic([[0.0], [1.0], [3.0]]) == 2.0

def test_identical_rows(caplog):
    """Test if identical rows fall back to bandwidth 1"""

    with caplog.at_level("DEBUG"):
        assert median_heuristic([[5.0], [5.0], [5.0]]) == 1.0

    assert "All pairwise distances are zero" in caplog.text

def test_duplicates_not_dominating():
    """Test if rows 0, 0, 4 give the median distance 4"""

    assert median_heuristic([[0.0], [0.0], [4.0]]) == 4.0

def test_zero_median_falls_back(caplog):
    """Test if a zero median falls back to the smallest positive distance"""

    with caplog.at_level("DEBUG"):
        assert median_heuristic([[0.0], [0.0], [0.0], [0.0], [1.0]]) == 1.0

    assert "smallest positive distance" in caplog.text

def test_even_count_midpoint():
    """Test if an even number of distances uses the midpoint of the central pair"""

    assert median_heuristic([[0.0], [1.0], [2.0], [4.0]]) == pytest.approx(2.0)

def test_permutation_and_translation():
    """Test if reordering and shifting rows leaves the bandwidth unchanged"""
    rows = np.random.default_rng(3).normal(size=(12, 3))
    sigma = median_heuristic(rows)

    assert median_heuristic(rows[::-1]) == pytest.approx(sigma, rel=1e-12)
    assert median_heuristic(rows + np.array([10.0, -3.0, 0.5])) == pytest.approx(sigma, rel=1e-9)

def test_single_row():
    """Test if fewer than two rows are rejected"""

    with pytest.raises(VteInputError):
        median_heuristic([[1.0, 2.0]])
