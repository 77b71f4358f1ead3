from unittest.mock import MagicMock

import numpy as np
import pytest
from vte_dataset import Dataset
from vte_errors import VteInputError
from vte_file_reader import normalize_outcomes

@pytest.fixture
def data():
    """Creates a dataset with non-unit outcome variance."""
    rng = np.random.default_rng(0)

    return Dataset(rng.normal(size=(50, 2)), np.tile([0, 1], 25), 3.0 + 4.0 * rng.normal(size=50))

def test_unit_variance(data):
    """Test if normalized outcomes have population variance 1"""
    normalized, scale = normalize_outcomes(data)

    assert np.var(normalized.y) == pytest.approx(1.0, abs=1e-12)
    assert scale == pytest.approx(np.std(data.y))

def test_already_unit_variance(data):
    """Test if unit-variance outcomes keep a scale of 1"""
    normalized, _ = normalize_outcomes(data)
    _, scale = normalize_outcomes(normalized)

    assert scale == pytest.approx(1.0, abs=1e-12)

def test_scale_invariance(data):
    """Test if scaling outcomes by 7 normalizes to the same dataset"""
    first, _ = normalize_outcomes(data)
    second, _ = normalize_outcomes(data.with_outcomes(7.0 * data.y))

    np.testing.assert_allclose(second.y, first.y, rtol=1e-12)

def test_constant_outcomes(caplog):
    """Test if constant outcomes are rejected"""
    data = Dataset([[0.0], [1.0], [2.0]], [0, 1, 0], [5.0, 5.0, 5.0])

    with caplog.at_level("DEBUG"):
        with pytest.raises(VteInputError):
            normalize_outcomes(data)

    assert "Outcomes are constant and cannot be normalized" in caplog.text

def test_logs_through_module_logger(data, monkeypatch):
    """Test if normalization reports its scale through the module logger"""
    module_logger = MagicMock()
    monkeypatch.setattr("vte_file_reader.logger", module_logger)

    _, scale = normalize_outcomes(data)

    module_logger.info.assert_called_once_with(f"Normalized outcomes by scale {scale:.6g}")
