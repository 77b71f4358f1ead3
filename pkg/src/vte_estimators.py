"""Plug-in VTE, embedding-weighted CVTE and the covariate-conditioned CVTE."""

from dataclasses import dataclass, field

import numpy as np

from logger import get_logger
from vte_cme import cme_weights, fit_cme, select_lambda_v
from vte_dataset import Dataset
from vte_errors import VteInputError, VteNumericError
from vte_kernel import KernelSpec, kernel_bandwidths, median_heuristic
from vte_krr import LAMBDA_GRID, GramSpectrum, fit_krr

logger = get_logger(__name__)

DEFAULT_CME_SELECTION_ROWS = 1000


@dataclass(frozen=True)
class LambdaPolicy:
    """How the four nuisance regularizers are chosen.

    Attributes:
        grid: Candidate lambdas for independent leave-one-out selection per model.
        fixed: If set, every nuisance model uses this lambda and the grid is ignored.
    """

    grid: tuple = LAMBDA_GRID
    fixed: float = None


@dataclass(frozen=True, eq=False)
class NuisanceModels:
    """The outcome models f0, f1 and the squared-outcome models g0, g1.

    Attributes:
        f0, f1: KRRModels of E[Y | A=a, X].
        g0, g1: KRRModels of E[Y^2 | A=a, X].
        kernel: The KernelSpec shared by all four.
        index0, index1: Row indices of the untreated and treated arms.
    """

    f0: object
    f1: object
    g0: object
    g1: object
    kernel: KernelSpec
    index0: np.ndarray
    index1: np.ndarray

    @property
    def lambdas(self):
        return {"f0": self.f0.lam, "f1": self.f1.lam, "g0": self.g0.lam, "g1": self.g1.lam}


@dataclass(frozen=True, eq=False)
class NuisancePredictions:
    """Nuisance values at a common set of rows."""

    f0: np.ndarray
    f1: np.ndarray
    g0: np.ndarray
    g1: np.ndarray

    @property
    def effects(self):
        return self.f1 - self.f0


@dataclass(frozen=True)
class EstimateReport:
    """A VTE or CVTE estimate with its variance decomposition.

    Attributes:
        estimate: The point estimate (may be negative in small samples).
        cate_variance: Variance of the estimated CATE under the weights.
        exogenous: Weighted mean of the conditional outcome variances in both arms.
        mean_effect: Weighted mean of the estimated CATE.
        lambdas: Regularizers of the nuisance models (and lambda_v for CVTE).
        bandwidths: Gaussian bandwidths of the kernels used.
        n, n0, n1: Sample and arm sizes.
        estimand: "vte" or "cvte".
        negative: True when the estimate is below zero.
    """

    estimate: float
    cate_variance: float
    exogenous: float
    mean_effect: float
    lambdas: dict = field(default_factory=dict)
    bandwidths: tuple = ()
    n: int = 0
    n0: int = 0
    n1: int = 0
    estimand: str = "vte"
    negative: bool = False

    @property
    def decomposition(self):
        return self.cate_variance, self.exogenous


def default_kernel(rows):
    """Gaussian kernel with the median-heuristic bandwidth of the rows."""
    return KernelSpec.gaussian(median_heuristic(rows))


def _fit_arm(rows, targets, kernel, policy):
    spectrum = GramSpectrum.from_inputs(rows, kernel)
    squared = targets ** 2

    if policy.fixed is not None:
        lam_f = lam_g = policy.fixed
    else:
        lam_f = spectrum.select_lambda(targets, policy.grid)
        lam_g = spectrum.select_lambda(squared, policy.grid)

    f_model = fit_krr(rows, targets, lam_f, kernel, gram=spectrum.gram)
    g_model = fit_krr(rows, squared, lam_g, kernel, gram=spectrum.gram)

    return f_model, g_model


def fit_nuisances(data, kernel=None, lambda_policy=None):
    """Fits f_a and g_a by kernel ridge regression on each treatment arm.

    Args:
        data: A Dataset with at least 2 rows in each arm.
        kernel: A KernelSpec; defaults to a Gaussian with the median heuristic on data.x.
        lambda_policy: A LambdaPolicy; defaults to independent leave-one-out selection.

    Returns:
        A NuisanceModels.

    Raises:
        VteInputError: If an arm has fewer than 2 rows.
    """
    data.require_both_arms(2)

    if kernel is None:
        kernel = default_kernel(data.x)
    if lambda_policy is None:
        lambda_policy = LambdaPolicy()

    index0 = data.arm(0)
    index1 = data.arm(1)

    f0, g0 = _fit_arm(data.x[index0], data.y[index0], kernel, lambda_policy)
    f1, g1 = _fit_arm(data.x[index1], data.y[index1], kernel, lambda_policy)

    models = NuisanceModels(f0, f1, g0, g1, kernel, index0, index1)

    lambdas = ", ".join(f"{name}={lam:.3g}" for name, lam in models.lambdas.items())
    logger.info(f"Fitted nuisance models on n0={index0.shape[0]}, n1={index1.shape[0]} with {lambdas}")

    return models


def predict_nuisances(models, rows):
    """Evaluates all four nuisance models at the given rows.

    Raises:
        VteNumericError: If any prediction is not finite.
    """
    predictions = NuisancePredictions(
        models.f0.predict_rows(rows),
        models.f1.predict_rows(rows),
        models.g0.predict_rows(rows),
        models.g1.predict_rows(rows),
    )

    for name in ("f0", "f1", "g0", "g1"):
        if not np.all(np.isfinite(getattr(predictions, name))):
            logger.error(f"Nuisance model {name} produced non-finite predictions")
            raise VteNumericError(f"Nuisance model {name} produced non-finite predictions")

    return predictions


def weighted_vte(predictions, weights):
    """Weighted plug-in VTE and its decomposition.

    estimate = sum w (g1 + g0 - 2 f1 f0) - (sum w (f1 - f0))^2
    cate_variance = sum w tau^2 - (sum w tau)^2
    exogenous = sum w ((g1 - f1^2) + (g0 - f0^2))

    Returns:
        An (estimate, cate_variance, exogenous, mean_effect) tuple.
    """
    weights = np.asarray(weights, dtype=float)
    f0, f1, g0, g1 = predictions.f0, predictions.f1, predictions.g0, predictions.g1

    if weights.shape != f0.shape:
        raise VteInputError(f"Got {weights.shape[0]} weights for {f0.shape[0]} rows")

    effects = f1 - f0
    mean_effect = float(np.dot(weights, effects))

    estimate = float(np.dot(weights, g1 + g0 - 2.0 * f1 * f0)) - mean_effect ** 2
    cate_variance = float(np.dot(weights, effects ** 2)) - mean_effect ** 2
    exogenous = float(np.dot(weights, (g1 - f1 ** 2) + (g0 - f0 ** 2)))

    return estimate, cate_variance, exogenous, mean_effect


def _report(data, models, estimate, cate_variance, exogenous, mean_effect, estimand, extra_lambdas=None, extra_bandwidths=()):
    if estimate < 0:
        logger.warning(f"Negative {estimand.upper()} estimate {estimate:.4g} reported as-is")

    lambdas = dict(models.lambdas)
    lambdas.update(extra_lambdas or {})

    return EstimateReport(
        estimate=estimate,
        cate_variance=cate_variance,
        exogenous=exogenous,
        mean_effect=mean_effect,
        lambdas=lambdas,
        bandwidths=kernel_bandwidths(models.kernel) + tuple(extra_bandwidths),
        n=data.n,
        n0=data.n0,
        n1=data.n1,
        estimand=estimand,
        negative=estimate < 0,
    )


def estimate_vte(data, models):
    """Plug-in VTE averaging the nuisance predictions over all n rows of both arms.

    Args:
        data: The Dataset the models were fitted on.
        models: A NuisanceModels.

    Returns:
        An EstimateReport with estimand "vte".
    """
    predictions = predict_nuisances(models, data.x)
    weights = np.full(data.n, 1.0 / data.n)

    estimate, cate_variance, exogenous, mean_effect = weighted_vte(predictions, weights)
    logger.info(f"VTE estimate {estimate:.4f} (CATE variance {cate_variance:.4f}, exogenous {exogenous:.4f})")

    return _report(data, models, estimate, cate_variance, exogenous, mean_effect, "vte")


def vte_decomposition(models, data):
    """Returns (cate_variance, exogenous) of the plug-in VTE; they sum to the estimate."""
    predictions = predict_nuisances(models, data.x)
    weights = np.full(data.n, 1.0 / data.n)

    _, cate_variance, exogenous, _ = weighted_vte(predictions, weights)

    return cate_variance, exogenous


def estimate_cvte_from_weights(data, models, weights, extra_lambdas=None, extra_bandwidths=()):
    """CVTE with caller-supplied embedding weights over the rows of data.x."""
    predictions = predict_nuisances(models, data.x)
    estimate, cate_variance, exogenous, mean_effect = weighted_vte(predictions, weights)

    return _report(data, models, estimate, cate_variance, exogenous, mean_effect, "cvte", extra_lambdas, extra_bandwidths)


def estimate_cvte(data, models, cme, v):
    """CVTE(v) for a conditioning variable V outside the covariates.

    Replaces the uniform 1/n weights of the VTE estimator by w_i(v). V is assumed
    independent of the potential outcomes given X; that cannot be checked from data.

    Args:
        data: A Dataset with conditioning columns data.v.
        models: NuisanceModels fitted on data.
        cme: A CMEModel fitted on data.v.
        v: The conditioning value.

    Returns:
        An EstimateReport with estimand "cvte".
    """
    if data.v is None:
        logger.error("CVTE with an external conditioning variable needs dataset conditioning columns")
        raise VteInputError("CVTE with an external conditioning variable needs dataset conditioning columns")
    if cme.train_v.shape != data.v.shape:
        logger.error(f"Embedding was fitted on {cme.train_v.shape} conditioning rows, dataset has {data.v.shape}")
        raise VteInputError(f"Embedding was fitted on {cme.train_v.shape} conditioning rows, dataset has {data.v.shape}")

    weights = cme_weights(cme, v)
    report = estimate_cvte_from_weights(
        data, models, weights,
        extra_lambdas={"v": cme.lambda_v},
        extra_bandwidths=kernel_bandwidths(cme.kernel_v),
    )
    logger.info(f"CVTE estimate {report.estimate:.4f} at v={np.ravel(v).tolist()}")

    return report


def _selection_rows(n, limit):
    if limit is None or n <= limit:
        return np.arange(n)
    return np.unique(np.linspace(0, n - 1, limit).round().astype(int))


def _select_embedding_lambda(v_rows, x_rows, kernel_v, kernel_x, grid, limit):
    """Selects lambda_v on at most `limit` evenly spaced rows.

    The ridge term of a fit on m rows is m * lambda, so a value chosen on a
    subsample is rescaled by m / n to keep that term when the embedding is fitted on all n rows.
    """
    n = v_rows.shape[0]
    rows = _selection_rows(n, limit)
    selected = select_lambda_v(v_rows[rows], x_rows[rows], kernel_v, kernel_x, grid)

    if rows.shape[0] == n:
        return selected

    lambda_v = selected * rows.shape[0] / n
    logger.info(f"Selected lambda_v={selected:.3g} on {rows.shape[0]} rows, rescaled to {lambda_v:.3g} for n={n}")

    return lambda_v


def estimate_cvte_subset(data, v_columns, v, kernels=None, lambda_policy=None, lambda_v=None,
                         lambda_v_grid=LAMBDA_GRID, cme_selection_rows=DEFAULT_CME_SELECTION_ROWS):
    """CVTE(v) when V is a strict subset of the covariate columns.

    All four nuisance models use the product kernel k_rest * k_V, and every
    nuisance is evaluated with its V block clamped to the query v.

    Args:
        data: A Dataset.
        v_columns: Column indices of V within data.x (non-empty, not all columns).
        v: The conditioning value, one entry per v column.
        kernels: Optional (kernel_rest, kernel_v) pair; median heuristics otherwise.
        lambda_policy: LambdaPolicy for the nuisance models.
        lambda_v: Fixed embedding regularizer; selected by embedding leave-one-out when None.
        lambda_v_grid: Candidates for lambda_v.
        cme_selection_rows: At most this many evenly spaced rows are used to select lambda_v.

    Returns:
        An EstimateReport with estimand "cvte".
    """
    v_columns = sorted(int(c) for c in v_columns)
    rest_columns = [c for c in range(data.d) if c not in v_columns]

    if len(v_columns) == 0 or len(rest_columns) == 0 or len(set(v_columns)) != len(v_columns) \
            or v_columns[0] < 0 or v_columns[-1] >= data.d:
        logger.error(f"Conditioning columns {v_columns} must be a non-empty strict subset of 0..{data.d - 1}")
        raise VteInputError(f"Conditioning columns {v_columns} must be a non-empty strict subset of 0..{data.d - 1}")

    v = np.asarray(v, dtype=float).ravel()
    if v.shape[0] != len(v_columns):
        raise VteInputError(f"Conditioning value has {v.shape[0]} entries for {len(v_columns)} columns")

    x_rest = data.x[:, rest_columns]
    x_v = data.x[:, v_columns]

    if kernels is None:
        kernel_rest, kernel_v = default_kernel(x_rest), default_kernel(x_v)
    else:
        kernel_rest, kernel_v = kernels

    composite = KernelSpec.product([(rest_columns, kernel_rest), (v_columns, kernel_v)])
    models = fit_nuisances(data, composite, lambda_policy)

    if lambda_v is None:
        lambda_v = _select_embedding_lambda(x_v, x_rest, kernel_v, kernel_rest, lambda_v_grid, cme_selection_rows)
    cme = fit_cme(x_v, lambda_v, kernel_v)

    clamped = np.array(data.x)
    clamped[:, v_columns] = v

    predictions = predict_nuisances(models, clamped)
    weights = cme_weights(cme, v)
    estimate, cate_variance, exogenous, mean_effect = weighted_vte(predictions, weights)

    logger.info(f"Covariate-conditioned CVTE estimate {estimate:.4f} at columns {v_columns} = {v.tolist()}")

    return _report(data, models, estimate, cate_variance, exogenous, mean_effect, "cvte", {"v": cme.lambda_v})


def estimate_cvte_external(data, v_columns, v, models=None, kernel_v=None, lambda_policy=None, lambda_v=None,
                           lambda_v_grid=LAMBDA_GRID, cme_selection_rows=DEFAULT_CME_SELECTION_ROWS):
    """CVTE(v) for conditioning columns of data.v, fitting whatever is not supplied.

    Args:
        data: A Dataset with conditioning columns.
        v_columns: Column indices into data.v.
        v: The conditioning value, one entry per column.
        models: NuisanceModels fitted on data; fitted here when None.
        kernel_v: KernelSpec on the chosen columns; median heuristic when None.
        lambda_policy: LambdaPolicy for the nuisance models when they are fitted here.
        lambda_v: Fixed embedding regularizer; selected by embedding leave-one-out when None.
        lambda_v_grid: Candidates for lambda_v.
        cme_selection_rows: At most this many evenly spaced rows are used to select lambda_v.

    Returns:
        An EstimateReport with estimand "cvte".
    """
    if data.v is None:
        logger.error("CVTE with an external conditioning variable needs dataset conditioning columns")
        raise VteInputError("CVTE with an external conditioning variable needs dataset conditioning columns")

    v_columns = [int(c) for c in v_columns]
    if len(v_columns) == 0 or min(v_columns) < 0 or max(v_columns) >= data.v.shape[1]:
        logger.error(f"Conditioning columns {v_columns} must lie in 0..{data.v.shape[1] - 1}")
        raise VteInputError(f"Conditioning columns {v_columns} must lie in 0..{data.v.shape[1] - 1}")

    v_rows = data.v[:, v_columns]
    if models is None:
        models = fit_nuisances(data, None, lambda_policy)
    if kernel_v is None:
        kernel_v = default_kernel(v_rows)

    if lambda_v is None:
        lambda_v = _select_embedding_lambda(v_rows, data.x, kernel_v, models.kernel, lambda_v_grid, cme_selection_rows)

    narrowed = Dataset(data.x, data.a, data.y, v=v_rows, outcome_bound=data.outcome_bound,
                       covariate_names=data.covariate_names,
                       conditioning_names=[data.conditioning_names[c] for c in v_columns])

    return estimate_cvte(narrowed, models, fit_cme(v_rows, lambda_v, kernel_v), v)
