"""Gaussian and product kernels, Gram matrices and the median bandwidth heuristic."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist

from logger import get_logger
from vte_errors import VteInputError

logger = get_logger(__name__)

GAUSSIAN = "gaussian"
PRODUCT = "product"


@dataclass(frozen=True)
class KernelSpec:
    """Describes a kernel family and its bandwidth(s).

    Attributes:
        family: "gaussian" or "product".
        bandwidth: A positive float, the Gaussian length scale (None for products).
        parts: For products, a tuple of (column index tuple, KernelSpec) pairs whose
            column sets are disjoint and together cover 0..d-1.
    """

    family: str
    bandwidth: float = None
    parts: tuple = ()

    def __post_init__(self):
        if self.family == GAUSSIAN:
            if self.bandwidth is None or not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
                logger.error(f"Gaussian kernel bandwidth must be positive, got {self.bandwidth}")
                raise VteInputError(f"Gaussian kernel bandwidth must be positive, got {self.bandwidth}")
        elif self.family == PRODUCT:
            if len(self.parts) == 0:
                raise VteInputError("Product kernel needs at least one part")

            seen = []
            for columns, _ in self.parts:
                if len(columns) == 0:
                    raise VteInputError("Product kernel part has an empty column set")
                seen.extend(columns)

            if len(set(seen)) != len(seen):
                logger.error(f"Product kernel column sets overlap: {seen}")
                raise VteInputError(f"Product kernel column sets overlap: {seen}")
            if sorted(seen) != list(range(len(seen))):
                logger.error(f"Product kernel column sets do not cover 0..{len(seen) - 1}: {seen}")
                raise VteInputError(f"Product kernel column sets do not cover 0..{len(seen) - 1}: {seen}")
        else:
            raise VteInputError(f"Unknown kernel family: {self.family}")

    @classmethod
    def gaussian(cls, bandwidth):
        return cls(GAUSSIAN, float(bandwidth))

    @classmethod
    def product(cls, parts):
        """Builds a product kernel from (columns, KernelSpec) pairs."""
        return cls(PRODUCT, None, tuple((tuple(int(c) for c in columns), spec) for columns, spec in parts))

    @property
    def input_dim(self):
        """Number of input columns the kernel requires, or None if any dimension is accepted."""
        if self.family == GAUSSIAN:
            return None
        return sum(len(columns) for columns, _ in self.parts)


def _as_rows(rows, name):
    rows = np.asarray(rows, dtype=float)

    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    if rows.ndim != 2:
        raise VteInputError(f"{name} must be a matrix, got an array with {rows.ndim} dimensions")
    if not np.all(np.isfinite(rows)):
        logger.error(f"{name} contains non-finite entries")
        raise VteInputError(f"{name} contains non-finite entries")

    return rows


def _check_dim(spec, dim, name):
    expected = spec.input_dim

    if expected is not None and expected != dim:
        logger.error(f"{name} has {dim} columns but the kernel expects {expected}")
        raise VteInputError(f"{name} has {dim} columns but the kernel expects {expected}")


def _gram(spec, rows_a, rows_b):
    if spec.family == GAUSSIAN:
        squared = cdist(rows_a, rows_b, "sqeuclidean")
        return np.exp(-squared / (2.0 * spec.bandwidth ** 2))

    gram = np.ones((rows_a.shape[0], rows_b.shape[0]))
    for columns, part in spec.parts:
        cols = list(columns)
        gram *= _gram(part, rows_a[:, cols], rows_b[:, cols])

    return gram


def eval_kernel(spec, x, x_prime):
    """Evaluates k(x, x') for two vectors.

    Args:
        spec: A KernelSpec.
        x: A 1-D array-like.
        x_prime: A 1-D array-like of the same length.

    Returns:
        A float in (0, 1].

    Raises:
        VteInputError: If the vectors differ in length, do not match the kernel, or are not finite.
    """
    x = np.asarray(x, dtype=float).ravel()
    x_prime = np.asarray(x_prime, dtype=float).ravel()

    if x.shape != x_prime.shape:
        logger.error(f"Kernel arguments differ in dimension: {x.shape[0]} vs {x_prime.shape[0]}")
        raise VteInputError(f"Kernel arguments differ in dimension: {x.shape[0]} vs {x_prime.shape[0]}")

    rows_a = _as_rows(x.reshape(1, -1), "x")
    rows_b = _as_rows(x_prime.reshape(1, -1), "x_prime")
    _check_dim(spec, rows_a.shape[1], "x")

    return float(_gram(spec, rows_a, rows_b)[0, 0])


def gram_matrix(spec, rows_a, rows_b=None):
    """Builds the matrix of kernel values between two row sets.

    Args:
        spec: A KernelSpec.
        rows_a: An (n_a, d) array.
        rows_b: An (n_b, d) array; rows_a is used when None.

    Returns:
        An (n_a, n_b) array whose (i, j) entry is k(rows_a[i], rows_b[j]).
    """
    rows_a = _as_rows(rows_a, "rows_a")
    rows_b = rows_a if rows_b is None else _as_rows(rows_b, "rows_b")

    if rows_a.shape[1] != rows_b.shape[1]:
        logger.error(f"Row sets differ in dimension: {rows_a.shape[1]} vs {rows_b.shape[1]}")
        raise VteInputError(f"Row sets differ in dimension: {rows_a.shape[1]} vs {rows_b.shape[1]}")
    _check_dim(spec, rows_a.shape[1], "rows")

    return _gram(spec, rows_a, rows_b)


def median_heuristic(rows):
    """Chooses a Gaussian bandwidth as the median pairwise Euclidean distance.

    A zero median falls back to the smallest positive distance; if every
    distance is zero the bandwidth is 1.0.

    Args:
        rows: An (n, d) array with n >= 2.

    Returns:
        A positive float.
    """
    rows = _as_rows(rows, "rows")

    if rows.shape[0] < 2:
        logger.error(f"Median heuristic needs at least 2 rows, got {rows.shape[0]}")
        raise VteInputError(f"Median heuristic needs at least 2 rows, got {rows.shape[0]}")

    distances = pdist(rows, "euclidean")
    sigma = float(np.median(distances))

    if sigma > 0:
        return sigma

    positive = distances[distances > 0]
    if positive.size > 0:
        logger.info("Median pairwise distance is zero, using the smallest positive distance")
        return float(positive.min())

    logger.info("All pairwise distances are zero, using bandwidth 1.0")
    return 1.0


def kernel_bandwidths(spec):
    """Lists the Gaussian bandwidths of a kernel in part order."""
    if spec.family == GAUSSIAN:
        return (spec.bandwidth,)

    bandwidths = ()
    for _, part in spec.parts:
        bandwidths += kernel_bandwidths(part)

    return bandwidths
