"""Kernel ridge regression with closed-form leave-one-out regularization selection."""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from logger import get_logger
from vte_errors import VteInputError, VteNumericError
from vte_kernel import gram_matrix

logger = get_logger(__name__)

LAMBDA_GRID = tuple(float(lam) for lam in np.logspace(-6, 1, 20))
RESIDUAL_TOLERANCE = 1e-8
MIN_LEVERAGE_GAP = 1e-12


@dataclass(frozen=True, eq=False)
class KRRModel:
    """A fitted kernel ridge regressor f(x) = k(x)^T alpha.

    Attributes:
        train_inputs: An (n, d) read-only array of training rows.
        dual_weights: A length-n read-only array alpha = (K + n lambda I)^-1 targets.
        lam: The per-sample regularizer lambda (n lambda is added to the diagonal).
        kernel: The KernelSpec used for K.
    """

    train_inputs: np.ndarray
    dual_weights: np.ndarray
    lam: float
    kernel: object

    def predict_rows(self, rows):
        """Predicts at every row of an (m, d) array."""
        rows = np.asarray(rows, dtype=float)
        if rows.ndim == 1:
            rows = rows.reshape(1, -1)

        if rows.shape[1] != self.train_inputs.shape[1]:
            logger.error(f"Prediction rows have {rows.shape[1]} columns, model was trained on {self.train_inputs.shape[1]}")
            raise VteInputError(f"Prediction rows have {rows.shape[1]} columns, model was trained on {self.train_inputs.shape[1]}")

        return gram_matrix(self.kernel, rows, self.train_inputs) @ self.dual_weights


def _as_inputs(inputs, targets):
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs.reshape(-1, 1)
    targets = np.asarray(targets, dtype=float).ravel()

    if inputs.shape[0] != targets.shape[0]:
        logger.error(f"Inputs have {inputs.shape[0]} rows but there are {targets.shape[0]} targets")
        raise VteInputError(f"Inputs have {inputs.shape[0]} rows but there are {targets.shape[0]} targets")
    if targets.shape[0] < 1:
        raise VteInputError("Kernel ridge regression needs at least one row")
    if not np.all(np.isfinite(targets)):
        logger.error("Regression targets contain non-finite values")
        raise VteInputError("Regression targets contain non-finite values")

    return inputs, targets


def check_lambda(lam):
    if not np.isfinite(lam) or lam <= 0:
        logger.error(f"Regularizer lambda must be positive, got {lam}")
        raise VteInputError(f"Regularizer lambda must be positive, got {lam}")


def _read_only(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def fit_krr(inputs, targets, lam, kernel, gram=None):
    """Fits alpha = (K + n lambda I)^-1 targets by Cholesky factorization.

    Args:
        inputs: An (n, d) array of training rows.
        targets: A length-n array.
        lam: A positive float.
        kernel: A KernelSpec.
        gram: Optional precomputed K on inputs, reused to avoid rebuilding it.

    Returns:
        An immutable KRRModel.

    Raises:
        VteInputError: If lambda is not positive or shapes disagree.
        VteNumericError: If the system cannot be factorized.
    """
    inputs, targets = _as_inputs(inputs, targets)
    check_lambda(lam)

    n = inputs.shape[0]
    if gram is None:
        gram = gram_matrix(kernel, inputs)

    system = gram + n * lam * np.eye(n)

    try:
        factor = linalg.cho_factor(system, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        logger.error(f"Cholesky factorization failed for n={n}, lambda={lam}: {exc}")
        raise VteNumericError(f"Cholesky factorization failed for n={n}, lambda={lam}: {exc}") from exc

    alpha = linalg.cho_solve(factor, targets)

    residual = np.linalg.norm(system @ alpha - targets)
    if residual > RESIDUAL_TOLERANCE * np.linalg.norm(targets):
        logger.warning(f"Ridge solve residual {residual:.3e} exceeds tolerance for n={n}, lambda={lam}")

    return KRRModel(_read_only(inputs), _read_only(alpha), float(lam), kernel)


def predict(model, x):
    """Returns k(x)^T alpha for a single vector x."""
    x = np.asarray(x, dtype=float).ravel()

    if x.shape[0] != model.train_inputs.shape[1]:
        logger.error(f"Query has dimension {x.shape[0]}, model expects {model.train_inputs.shape[1]}")
        raise VteInputError(f"Query has dimension {x.shape[0]}, model expects {model.train_inputs.shape[1]}")

    return float(model.predict_rows(x.reshape(1, -1))[0])


class GramSpectrum:
    """Eigendecomposition of a Gram matrix, shared across a lambda grid.

    With K = U diag(s) U^T, the inverse (K + n lambda I)^-1 is U diag(1 / (s + n lambda)) U^T,
    so every grid point costs O(n^2) once the O(n^3) decomposition is paid.

    Attributes:
        gram: The (n, n) Gram matrix.
        eigenvalues: Eigenvalues of gram, clipped at zero.
        eigenvectors: Orthonormal eigenvectors as columns.
    """

    def __init__(self, gram):
        self.gram = np.asarray(gram, dtype=float)
        eigenvalues, self.eigenvectors = linalg.eigh(self.gram)
        self.eigenvalues = np.clip(eigenvalues, 0.0, None)
        self.n = self.gram.shape[0]

    @classmethod
    def from_inputs(cls, inputs, kernel):
        return cls(gram_matrix(kernel, inputs))

    def inverse_diagonal(self, lam):
        """Diagonal of (K + n lambda I)^-1."""
        return (self.eigenvectors ** 2) @ (1.0 / (self.eigenvalues + self.n * lam))

    def solve(self, targets, lam):
        """Returns (K + n lambda I)^-1 targets."""
        return self.eigenvectors @ ((self.eigenvectors.T @ targets) / (self.eigenvalues + self.n * lam))

    def leverage_gaps(self, lam):
        """Returns 1 - H_ii for the hat matrix H = K (K + n lambda I)^-1."""
        return self.n * lam * self.inverse_diagonal(lam)

    def loo_error(self, targets, lam):
        """Mean squared closed-form leave-one-out residual.

        Uses y - H y = n lambda alpha, so r_i = alpha_i / [(K + n lambda I)^-1]_ii.
        """
        check_lambda(lam)
        gaps = self.leverage_gaps(lam)

        if np.any(gaps <= MIN_LEVERAGE_GAP):
            logger.warning(f"Hat matrix diagonal reaches 1 at lambda={lam}")
            raise VteNumericError(f"Hat matrix diagonal reaches 1 at lambda={lam}, leave-one-out is ill-conditioned")

        alpha = self.solve(targets, lam)
        residuals = alpha / self.inverse_diagonal(lam)

        return float(np.mean(residuals ** 2))

    def select_lambda(self, targets, grid=LAMBDA_GRID):
        """Returns the grid value with the smallest leave-one-out error, ties to the larger lambda."""
        grid = check_grid(grid)
        targets = np.asarray(targets, dtype=float).ravel()

        best_lam = None
        best_error = np.inf

        for lam in sorted(grid):
            try:
                error = self.loo_error(targets, lam)
            except VteNumericError:
                continue

            logger.debug(f"Leave-one-out error {error:.6g} at lambda={lam:.3g}")

            if error <= best_error:
                best_error = error
                best_lam = lam

        if best_lam is None:
            logger.error("Every lambda on the grid was ill-conditioned")
            raise VteNumericError("Every lambda on the grid was ill-conditioned")

        return float(best_lam)


def check_grid(grid):
    grid = [float(lam) for lam in grid]

    if len(grid) == 0:
        raise VteInputError("Lambda grid is empty")
    for lam in grid:
        check_lambda(lam)

    return grid


def loo_error(inputs, targets, lam, kernel):
    """Closed-form leave-one-out mean squared error of a ridge fit.

    Args:
        inputs: An (n, d) array with n >= 2.
        targets: A length-n array.
        lam: A positive float.
        kernel: A KernelSpec.

    Returns:
        A nonnegative float.

    Raises:
        VteNumericError: If some H_ii is within 1e-12 of 1.
    """
    inputs, targets = _as_inputs(inputs, targets)
    check_lambda(lam)

    if inputs.shape[0] < 2:
        raise VteInputError("Leave-one-out error needs at least 2 rows")

    return GramSpectrum.from_inputs(inputs, kernel).loo_error(targets, lam)


def select_lambda(inputs, targets, kernel, grid=LAMBDA_GRID):
    """Picks lambda from the grid by closed-form leave-one-out error."""
    inputs, targets = _as_inputs(inputs, targets)
    grid = check_grid(grid)

    if len(grid) == 1:
        return grid[0]

    return GramSpectrum.from_inputs(inputs, kernel).select_lambda(targets, grid)
