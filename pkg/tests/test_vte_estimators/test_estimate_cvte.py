import numpy as np
import pytest
from vte_cme import cme_weights, fit_cme
from vte_errors import VteInputError
from vte_estimators import (LambdaPolicy, estimate_cvte, estimate_cvte_external, estimate_cvte_subset,
                            fit_nuisances, predict_nuisances, weighted_vte)
from vte_kernel import KernelSpec
from vte_simdata import SynthConfig, gen_synthetic, true_cvte, true_vte

@pytest.fixture
def with_external_v():
    """Returns a dynamic generator of synthetic data carrying an independent conditioning column."""

    def _with_external_v(n, d=100, seed=0):
        """Creates the dataset."""
        data, _ = gen_synthetic(SynthConfig(n=n, d=d, seed=seed, conditioning="independent"))

        return data

    return _with_external_v

def test_matches_weighted_formula(with_external_v):
    """Test if the CVTE equals the weighted plug-in with embedding weights"""
    data = with_external_v(150, d=4)
    models = fit_nuisances(data)
    cme = fit_cme(data.v, 0.01, KernelSpec.gaussian(1.0))
    report = estimate_cvte(data, models, cme, [0.2])

    expected, _, _, _ = weighted_vte(predict_nuisances(models, data.x), cme_weights(cme, [0.2]))

    assert report.estimate == expected
    assert report.lambdas["v"] == 0.01
    assert report.bandwidths[-1] == 1.0

def test_needs_conditioning_columns(caplog):
    """Test if a dataset without v is rejected"""
    data, _ = gen_synthetic(SynthConfig(n=60, d=3))
    models = fit_nuisances(data)
    cme = fit_cme(np.zeros((60, 1)), 0.1, KernelSpec.gaussian(1.0))

    with caplog.at_level("DEBUG"):
        with pytest.raises(VteInputError):
            estimate_cvte(data, models, cme, [0.0])

    assert "needs dataset conditioning columns" in caplog.text

def test_embedding_shape_mismatch(with_external_v):
    """Test if an embedding fitted on other rows is rejected"""
    data = with_external_v(60, d=3)
    models = fit_nuisances(data)
    cme = fit_cme(data.v[:30], 0.1, KernelSpec.gaussian(1.0))

    with pytest.raises(VteInputError):
        estimate_cvte(data, models, cme, [0.0])

def test_external_fits_what_is_missing(with_external_v):
    """Test if the external path selects lambda_v and reports a CVTE"""
    data = with_external_v(200, d=5)
    report = estimate_cvte_external(data, [0], [0.0])

    assert report.estimand == "cvte"
    assert "v" in report.lambdas
    assert len(report.bandwidths) == 2

def test_external_column_range(with_external_v):
    """Test if a conditioning column outside data.v is rejected"""

    with pytest.raises(VteInputError):
        estimate_cvte_external(with_external_v(40, d=3), [1], [0.0])

def test_subsampled_lambda_v_rescaled(with_external_v, monkeypatch, caplog):
    """Test if lambda_v chosen on m of n rows is scaled by m / n before the full fit"""
    data = with_external_v(60, d=3)
    chosen_on = []

    def fake_select(v_rows, x_rows, kernel_v, kernel_x, grid):
        """Records the selection sample size and returns a fixed lambda."""
        chosen_on.append(v_rows.shape[0])
        return 0.1

    monkeypatch.setattr("vte_estimators.select_lambda_v", fake_select)

    with caplog.at_level("DEBUG"):
        report = estimate_cvte_external(data, [0], [0.0], cme_selection_rows=20)

    assert chosen_on == [20]
    assert report.lambdas["v"] == pytest.approx(0.1 * 20 / 60)
    assert "rescaled to 0.0333 for n=60" in caplog.text

def test_full_sample_lambda_v_unscaled(with_external_v, monkeypatch):
    """Test if lambda_v chosen on all rows is used as selected"""
    data = with_external_v(60, d=3)
    monkeypatch.setattr("vte_estimators.select_lambda_v", lambda *args: 0.1)

    assert estimate_cvte_external(data, [0], [0.0], cme_selection_rows=1000).lambdas["v"] == 0.1

def test_subset_matches_clamped_evaluation():
    """Test if the covariate-conditioned CVTE evaluates nuisances with the v block clamped"""
    data, _ = gen_synthetic(SynthConfig(n=40, d=3, seed=5))
    kernels = (KernelSpec.gaussian(1.5), KernelSpec.gaussian(0.8))
    policy = LambdaPolicy(fixed=0.01)
    report = estimate_cvte_subset(data, [1], [0.3], kernels=kernels, lambda_policy=policy, lambda_v=0.05)

    composite = KernelSpec.product([([0, 2], kernels[0]), ([1], kernels[1])])
    models = fit_nuisances(data, composite, policy)
    clamped = np.array(data.x)
    clamped[:, 1] = 0.3
    weights = cme_weights(fit_cme(data.x[:, [1]], 0.05, kernels[1]), [0.3])
    expected, _, _, _ = weighted_vte(predict_nuisances(models, clamped), weights)

    assert report.estimate == pytest.approx(expected, rel=1e-10)
    assert report.lambdas["v"] == 0.05

def test_subset_rejects_all_or_no_columns(caplog):
    """Test if conditioning on every covariate or on none is rejected"""
    data, _ = gen_synthetic(SynthConfig(n=30, d=2))

    with caplog.at_level("DEBUG"):
        with pytest.raises(VteInputError):
            estimate_cvte_subset(data, [0, 1], [0.0, 0.0])
        with pytest.raises(VteInputError):
            estimate_cvte_subset(data, [], [])

    assert "must be a non-empty strict subset of 0..1" in caplog.text

def test_subset_value_length():
    """Test if a conditioning value of the wrong length is rejected"""
    data, _ = gen_synthetic(SynthConfig(n=30, d=3))

    with pytest.raises(VteInputError):
        estimate_cvte_subset(data, [1], [0.0, 1.0])

@pytest.mark.slow
def test_subset_large_sample_close_to_truth():
    """Test if n=5000 estimates the true CVTE 2.75 given X2 = 0 within 0.5"""
    cfg = SynthConfig(n=5000, seed=0)
    data, _ = gen_synthetic(cfg)

    assert abs(estimate_cvte_subset(data, [1], [0.0]).estimate - true_cvte(cfg).value) <= 0.5

@pytest.mark.slow
def test_independent_v_recovers_marginal_vte(with_external_v):
    """Test if conditioning on an independent variable leaves the VTE near 3.0"""
    data = with_external_v(5000)
    models = fit_nuisances(data)

    for v in (-1.0, 0.0, 1.0):
        estimate = estimate_cvte_external(data, [0], [v], models=models).estimate

        assert abs(estimate - true_vte(SynthConfig(n=5000)).value) <= 0.5
