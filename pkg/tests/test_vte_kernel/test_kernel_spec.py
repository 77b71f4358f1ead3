import pytest
from vte_errors import VteInputError
from vte_kernel import KernelSpec, kernel_bandwidths

def test_gaussian_needs_positive_bandwidth(caplog):
    """Test if a zero bandwidth is rejected"""

    with caplog.at_level("DEBUG"):
        with pytest.raises(VteInputError):
            KernelSpec.gaussian(0.0)

    assert "Gaussian kernel bandwidth must be positive, got 0.0" in caplog.text

def test_product_parts_must_be_disjoint(caplog):
    """Test if overlapping column sets are rejected"""
    unit = KernelSpec.gaussian(1.0)

    with caplog.at_level("DEBUG"):
        with pytest.raises(VteInputError):
            KernelSpec.product([([0, 1], unit), ([1], unit)])

    assert "Product kernel column sets overlap" in caplog.text

def test_product_parts_must_cover_columns():
    """Test if a gap in the column sets is rejected"""
    unit = KernelSpec.gaussian(1.0)

    with pytest.raises(VteInputError):
        KernelSpec.product([([0], unit), ([2], unit)])

def test_unknown_family():
    """Test if an unknown family name is rejected"""

    with pytest.raises(VteInputError):
        KernelSpec("laplace", 1.0)

def test_input_dim_and_bandwidths():
    """Test if a product reports its width and its part bandwidths in order"""
    spec = KernelSpec.product([([1, 2], KernelSpec.gaussian(2.0)), ([0], KernelSpec.gaussian(0.5))])

    assert spec.input_dim == 3
    assert KernelSpec.gaussian(1.0).input_dim is None
    assert kernel_bandwidths(spec) == (2.0, 0.5)
