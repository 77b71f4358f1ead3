"""Comparison estimators: naive, CATE variance, k-NN matching and propensity score matching."""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression
from sklearn.preprocessing import StandardScaler

from logger import get_logger
from vte_errors import VteInputError, VteNumericError
from vte_estimators import predict_nuisances

logger = get_logger(__name__)

EUCLIDEAN = "euclidean"
PROPENSITY = "propensity"
PROPENSITY_RIDGE = 1e-4
PROPENSITY_MAX_ITER = 100
PROPENSITY_TOLERANCE = 1e-8
SCORE_FLOOR = 1e-12
MATCH_BLOCK_ROWS = 512


@dataclass(frozen=True)
class MatchConfig:
    """Nearest-neighbour matching settings.

    Attributes:
        k: Number of opposite-arm neighbours averaged per unit.
        metric: "euclidean" on standardized covariates or "propensity" on scores.
    """

    k: int = 1
    metric: str = EUCLIDEAN


@dataclass(frozen=True, eq=False)
class PropensityModel:
    """A ridge-regularized logistic model of P(A=1 | X) on standardized covariates.

    Attributes:
        coefficients: Intercept followed by one coefficient per covariate.
        ridge: Penalty on the non-intercept coefficients (mean log-loss scale).
        iterations: Newton iterations used.
        gradient_norm: Euclidean norm of the objective gradient at the solution.
        scaler: The fitted sklearn StandardScaler.
    """

    coefficients: np.ndarray
    ridge: float
    iterations: int
    gradient_norm: float
    scaler: StandardScaler

    def predict(self, x):
        """Returns propensity scores strictly inside (0, 1)."""
        z = self.scaler.transform(np.asarray(x, dtype=float))
        scores = expit(self.coefficients[0] + z @ self.coefficients[1:])

        return np.clip(scores, SCORE_FLOOR, 1.0 - SCORE_FLOOR)


def _population_variance(values):
    return float(np.var(np.asarray(values, dtype=float)))


def naive_vte(data):
    """Var(Y | A=1) + Var(Y | A=0), ignoring confounding entirely."""
    data.require_both_arms(1)

    return _population_variance(data.y[data.a == 1]) + _population_variance(data.y[data.a == 0])


def cate_variance_baseline(data, models, mask=None):
    """Population variance of the T-learner CATE f1 - f0 over the rows of data.

    Args:
        data: The Dataset whose covariate rows are scored.
        models: NuisanceModels (fitted on all data, possibly a superset of the rows scored).
        mask: Optional boolean mask restricting which rows enter the variance.

    Returns:
        A float.
    """
    rows = data.x if mask is None else data.x[np.asarray(mask)]

    if rows.shape[0] == 0:
        logger.error("CATE variance needs at least one row")
        raise VteInputError("CATE variance needs at least one row")

    return _population_variance(predict_nuisances(models, rows).effects)


def _objective_gradient(coefficients, z, a, ridge):
    scores = expit(coefficients[0] + z @ coefficients[1:])
    residuals = scores - a
    n = a.shape[0]

    gradient = np.concatenate(([residuals.sum() / n], z.T @ residuals / n))
    gradient[1:] += ridge * coefficients[1:]

    return gradient


def fit_propensity(data, ridge=PROPENSITY_RIDGE, max_iter=PROPENSITY_MAX_ITER, tol=PROPENSITY_TOLERANCE):
    """Fits the propensity model by Newton's method (sklearn's newton-cholesky solver).

    The objective is mean log-loss + ridge / 2 * ||w||^2 with the intercept unpenalized.

    Raises:
        VteNumericError: If the solver does not reach gradient norm tol within max_iter.
    """
    data.require_both_arms(1)

    scaler = StandardScaler().fit(data.x)
    z = scaler.transform(data.x)
    a = data.a.astype(float)
    n = data.n

    model = LogisticRegression(C=1.0 / (ridge * n), solver="newton-cholesky", tol=tol * 1e-2, max_iter=max_iter)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        model.fit(z, data.a)

    coefficients = np.concatenate((model.intercept_, model.coef_.ravel()))
    iterations = int(np.max(model.n_iter_))
    gradient_norm = float(np.linalg.norm(_objective_gradient(coefficients, z, a, ridge)))
    diagnostics = {"iterations": iterations, "gradient_norm": gradient_norm}

    not_converged = any(issubclass(w.category, ConvergenceWarning) for w in caught)
    if not_converged or gradient_norm > tol:
        logger.error(f"Propensity model did not converge: {diagnostics}")
        raise VteNumericError("Propensity model did not converge", diagnostics)

    logger.info(f"Fitted propensity model in {iterations} iterations, gradient norm {gradient_norm:.2e}")

    return PropensityModel(coefficients, ridge, iterations, gradient_norm, scaler)


def _nearest_means(query, reference, reference_y, k):
    """Mean outcome of the k nearest reference rows per query row, ties to the lower index."""
    means = np.empty(query.shape[0])

    for start in range(0, query.shape[0], MATCH_BLOCK_ROWS):
        block = query[start:start + MATCH_BLOCK_ROWS]
        distances = cdist(block, reference, "euclidean")
        order = np.argsort(distances, axis=1, kind="stable")[:, :k]
        means[start:start + MATCH_BLOCK_ROWS] = reference_y[order].mean(axis=1)

    return means


def match_vte(data, cfg=None, prop=None):
    """VTE from k-nearest-neighbour imputation of each unit's missing potential outcome.

    Args:
        data: A Dataset.
        cfg: A MatchConfig (defaults to k=1 on standardized covariates).
        prop: A PropensityModel, required for the propensity metric.

    Returns:
        The population variance of the imputed effects over all n units.
    """
    cfg = cfg or MatchConfig()
    data.require_both_arms(1)

    if cfg.k < 1 or cfg.k > min(data.n0, data.n1):
        logger.error(f"Matching k={cfg.k} must lie in 1..{min(data.n0, data.n1)}")
        raise VteInputError(f"Matching k={cfg.k} must lie in 1..{min(data.n0, data.n1)}")

    if cfg.metric == EUCLIDEAN:
        coordinates = StandardScaler().fit_transform(data.x)
    elif cfg.metric == PROPENSITY:
        if prop is None:
            logger.error("Propensity score matching needs a fitted propensity model")
            raise VteInputError("Propensity score matching needs a fitted propensity model")
        coordinates = prop.predict(data.x).reshape(-1, 1)
    else:
        raise VteInputError(f"Unknown matching metric: {cfg.metric}")

    index0 = data.arm(0)
    index1 = data.arm(1)

    y1_hat = np.array(data.y, dtype=float)
    y0_hat = np.array(data.y, dtype=float)

    y1_hat[index0] = _nearest_means(coordinates[index0], coordinates[index1], data.y[index1], cfg.k)
    y0_hat[index1] = _nearest_means(coordinates[index1], coordinates[index0], data.y[index0], cfg.k)

    return _population_variance(y1_hat - y0_hat)
