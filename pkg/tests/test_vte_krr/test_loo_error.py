import numpy as np
import pytest
from vte_errors import VteInputError, VteNumericError
from vte_kernel import KernelSpec, median_heuristic
from vte_krr import LAMBDA_GRID, fit_krr, loo_error, select_lambda

def explicit_loo(inputs, targets, lam, kernel):
    """Refits without each row; the absolute ridge term n * lam is kept on n - 1 rows."""
    n = targets.shape[0]
    refit_lam = n * lam / (n - 1)
    residuals = []

    for i in range(n):
        keep = np.arange(n) != i
        model = fit_krr(inputs[keep], targets[keep], refit_lam, kernel)
        residuals.append(targets[i] - model.predict_rows(inputs[i:i + 1])[0])

    return float(np.mean(np.square(residuals)))

def test_two_symmetric_points():
    """Test if two symmetric points with equal targets give the hand-computed residual"""
    lam = 0.3
    error = loo_error([[-1.0], [1.0]], [2.0, 2.0], lam, KernelSpec.gaussian(1.0))
    residual = 2.0 * (1.0 - np.exp(-2.0) / (1.0 + 2.0 * lam))

    assert error == pytest.approx(residual ** 2, rel=1e-10)

def test_matches_explicit_refits():
    """Test if the closed form equals explicit leave-one-out refits on 20 random instances with n <= 50"""
    rng = np.random.default_rng(0)

    for _ in range(20):
        n = int(rng.integers(5, 51))
        lam = float(10.0 ** rng.uniform(-3.0, -1.0))
        inputs = rng.normal(size=(n, 2))
        targets = np.sin(inputs[:, 0]) + 0.3 * rng.normal(size=n)
        kernel = KernelSpec.gaussian(median_heuristic(inputs))

        assert loo_error(inputs, targets, lam, kernel) == pytest.approx(explicit_loo(inputs, targets, lam, kernel), rel=1e-8)

def test_heavy_shrinkage_is_worse():
    """Test if lambda = 1e6 scores no better than the selected lambda"""
    rng = np.random.default_rng(0)
    inputs = rng.normal(size=(40, 1))
    targets = inputs[:, 0] ** 2 + 0.1 * rng.normal(size=40)
    kernel = KernelSpec.gaussian(median_heuristic(inputs))
    best = select_lambda(inputs, targets, kernel, LAMBDA_GRID)

    assert loo_error(inputs, targets, 1e6, kernel) >= loo_error(inputs, targets, best, kernel)

def test_ill_conditioned(caplog):
    """Test if a hat diagonal within 1e-12 of 1 raises a numeric error"""
    inputs = (10.0 * np.arange(5)).reshape(-1, 1)

    with caplog.at_level("DEBUG"):
        with pytest.raises(VteNumericError):
            loo_error(inputs, np.ones(5), 1e-20, KernelSpec.gaussian(1.0))

    assert "Hat matrix diagonal reaches 1 at lambda=1e-20" in caplog.text

def test_single_row():
    """Test if one row is rejected"""

    with pytest.raises(VteInputError):
        loo_error([[0.0]], [1.0], 0.1, KernelSpec.gaussian(1.0))
