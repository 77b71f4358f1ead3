"""Conditional mean embedding weights w(v) = (K_V + n lambda_V I)^-1 k_V(v)."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from logger import get_logger
from vte_errors import VteInputError, VteNumericError
from vte_kernel import gram_matrix
from vte_krr import LAMBDA_GRID, MIN_LEVERAGE_GAP, GramSpectrum, check_grid, check_lambda

logger = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class CMEModel:
    """A factorized conditional mean embedding system.

    The embeddings of X given V = v are never built; they are represented by
    the weights, mu(v) = sum_i w_i(v) phi(x_i).

    Attributes:
        train_v: An (n, d_V) read-only array of conditioning rows.
        factor: The lower Cholesky factor tuple of K_V + n lambda_V I.
        lambda_v: The per-sample regularizer.
        kernel_v: The KernelSpec on V.
    """

    train_v: np.ndarray
    factor: tuple
    lambda_v: float
    kernel_v: object

    def weights_rows(self, v_rows):
        """Returns an (n, m) array whose column j holds w(v_rows[j])."""
        v_rows = np.asarray(v_rows, dtype=float)
        if v_rows.ndim == 1:
            v_rows = v_rows.reshape(1, -1)

        if v_rows.shape[1] != self.train_v.shape[1]:
            logger.error(f"Conditioning value has dimension {v_rows.shape[1]}, embedding expects {self.train_v.shape[1]}")
            raise VteInputError(f"Conditioning value has dimension {v_rows.shape[1]}, embedding expects {self.train_v.shape[1]}")

        return linalg.cho_solve(self.factor, gram_matrix(self.kernel_v, self.train_v, v_rows))


def _as_rows(rows):
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    return rows


def fit_cme(v_rows, lambda_v, kernel_v):
    """Factorizes K_V + n lambda_V I once for repeated weight queries.

    Args:
        v_rows: An (n, d_V) array with n >= 1.
        lambda_v: A positive float.
        kernel_v: A KernelSpec on V.

    Returns:
        A CMEModel.

    Raises:
        VteNumericError: If the Cholesky factorization fails.
    """
    v_rows = _as_rows(v_rows)
    check_lambda(lambda_v)

    n = v_rows.shape[0]
    if n < 1:
        raise VteInputError("Conditional mean embedding needs at least one row")

    system = gram_matrix(kernel_v, v_rows) + n * lambda_v * np.eye(n)

    try:
        factor = linalg.cho_factor(system, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        logger.error(f"Embedding system factorization failed for n={n}, lambda_v={lambda_v}: {exc}")
        raise VteNumericError(f"Embedding system factorization failed for n={n}, lambda_v={lambda_v}: {exc}") from exc

    train_v = np.array(v_rows)
    train_v.setflags(write=False)

    logger.info(f"Fitted conditional mean embedding on {n} rows with lambda_v={lambda_v:.3g}")

    return CMEModel(train_v, factor, float(lambda_v), kernel_v)


def cme_weights(model, v):
    """Returns the length-n weight vector w(v); entries may be negative and need not sum to 1."""
    v = np.asarray(v, dtype=float).ravel()

    return model.weights_rows(v.reshape(1, -1))[:, 0]


def embedding_loo_error(spectrum, gram_x, lam):
    """Kernelized leave-one-out error of the embedding for one lambda.

    Held-out weights follow from the full ones by the hat-matrix correction, so
    the feature-space residual of row i has coefficients G^-1[i, :] / G^-1[i, i]
    with G = K_V + n lambda I, and its squared norm is (G^-1 K_X G^-1)_ii / G^-1[i, i]^2.
    """
    check_lambda(lam)

    if np.any(spectrum.leverage_gaps(lam) <= MIN_LEVERAGE_GAP):
        logger.warning(f"Embedding hat matrix diagonal reaches 1 at lambda_v={lam}")
        raise VteNumericError(f"Embedding hat matrix diagonal reaches 1 at lambda_v={lam}")

    scale = 1.0 / (spectrum.eigenvalues + spectrum.n * lam)
    scaled_vectors = spectrum.eigenvectors * scale
    inverse = scaled_vectors @ spectrum.eigenvectors.T
    sandwich_diagonal = np.sum((inverse @ gram_x) * inverse, axis=1)
    inverse_diagonal = np.diag(inverse)

    return float(np.mean(sandwich_diagonal / inverse_diagonal ** 2))


def select_lambda_v(v_rows, x_rows, kernel_v, kernel_x, grid=LAMBDA_GRID):
    """Picks lambda_V by kernelized leave-one-out embedding error, ties to the larger lambda.

    Args:
        v_rows: An (n, d_V) array of conditioning rows.
        x_rows: An (n, d_X) array of the embedded variable.
        kernel_v: KernelSpec on V.
        kernel_x: KernelSpec on X.
        grid: Candidate lambdas.

    Returns:
        The selected positive float.
    """
    v_rows = _as_rows(v_rows)
    x_rows = _as_rows(x_rows)
    grid = check_grid(grid)

    if v_rows.shape[0] != x_rows.shape[0]:
        logger.error(f"V has {v_rows.shape[0]} rows but X has {x_rows.shape[0]}")
        raise VteInputError(f"V has {v_rows.shape[0]} rows but X has {x_rows.shape[0]}")

    if len(grid) == 1:
        return grid[0]

    spectrum = GramSpectrum.from_inputs(v_rows, kernel_v)
    gram_x = gram_matrix(kernel_x, x_rows)

    best_lam = None
    best_error = np.inf

    for lam in sorted(grid):
        try:
            error = embedding_loo_error(spectrum, gram_x, lam)
        except VteNumericError:
            continue

        logger.debug(f"Embedding leave-one-out error {error:.6g} at lambda_v={lam:.3g}")

        if error <= best_error:
            best_error = error
            best_lam = lam

    if best_lam is None:
        logger.error("Every lambda_v on the grid was ill-conditioned")
        raise VteNumericError("Every lambda_v on the grid was ill-conditioned")

    logger.info(f"Selected lambda_v={best_lam:.3g} on {v_rows.shape[0]} rows")

    return float(best_lam)
