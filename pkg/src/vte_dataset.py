import numpy as np
import pandas as pd

from logger import get_logger
from vte_errors import VteInputError

logger = get_logger(__name__)

DEFAULT_OUTCOME_BOUND = 1e6


class Dataset:
    """Holds observational data for variance-of-treatment-effect estimation.

    Attributes:
        x: An (n, d) float array of covariates.
        a: A length-n int array of binary treatments.
        y: A length-n float array of observed outcomes.
        v: An optional (n, d_V) float array of conditioning variables.
        outcome_bound: A positive float R with |y_i| <= R.
        covariate_names: A tuple of d column names.
        conditioning_names: A tuple of d_V column names (empty without v).
    """

    def __init__(self, x, a, y, v=None, outcome_bound=DEFAULT_OUTCOME_BOUND,
                 covariate_names=None, conditioning_names=None):
        """Validates and stores read-only copies of the arrays.

        Raises:
            VteInputError: If shapes disagree, entries are non-finite, treatments are
                not 0/1, or an outcome exceeds the bound.
        """
        x = np.array(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.array(y, dtype=float).ravel()
        a_raw = np.asarray(a).ravel()

        n = y.shape[0]

        if x.ndim != 2 or x.shape[0] != n or a_raw.shape[0] != n:
            logger.error(f"Dataset arrays disagree in length: x {x.shape}, a {a_raw.shape}, y {y.shape}")
            raise VteInputError(f"Dataset arrays disagree in length: x {x.shape}, a {a_raw.shape}, y {y.shape}")

        if not np.all(np.isin(a_raw, (0, 1))):
            bad = int(np.flatnonzero(~np.isin(a_raw, (0, 1)))[0])
            logger.error(f"Treatment value {a_raw[bad]} at row {bad + 1} is not 0 or 1")
            raise VteInputError(f"Treatment value {a_raw[bad]} at row {bad + 1} is not 0 or 1", row=bad + 1)

        if not np.all(np.isfinite(x)):
            logger.error("Covariates contain non-finite values")
            raise VteInputError("Covariates contain non-finite values")
        if not np.all(np.isfinite(y)):
            logger.error("Outcomes contain non-finite values")
            raise VteInputError("Outcomes contain non-finite values")

        if not np.isfinite(outcome_bound) or outcome_bound <= 0:
            raise VteInputError(f"Outcome bound must be positive, got {outcome_bound}")
        if n > 0 and np.max(np.abs(y)) > outcome_bound:
            bad = int(np.argmax(np.abs(y)))
            logger.error(f"Outcome {y[bad]} at row {bad + 1} exceeds the bound {outcome_bound}")
            raise VteInputError(f"Outcome {y[bad]} at row {bad + 1} exceeds the bound {outcome_bound}", row=bad + 1)

        if v is not None:
            v = np.array(v, dtype=float)
            if v.ndim == 1:
                v = v.reshape(-1, 1)
            if v.shape[0] != n:
                logger.error(f"Conditioning variables have {v.shape[0]} rows, expected {n}")
                raise VteInputError(f"Conditioning variables have {v.shape[0]} rows, expected {n}")
            if not np.all(np.isfinite(v)):
                logger.error("Conditioning variables contain non-finite values")
                raise VteInputError("Conditioning variables contain non-finite values")
            v.setflags(write=False)

        a = a_raw.astype(int)
        for array in (x, a, y):
            array.setflags(write=False)

        self.x = x
        self.a = a
        self.y = y
        self.v = v
        self.outcome_bound = float(outcome_bound)
        self.covariate_names = tuple(covariate_names) if covariate_names is not None else tuple(f"x{j + 1}" for j in range(x.shape[1]))
        if v is None:
            self.conditioning_names = ()
        else:
            self.conditioning_names = tuple(conditioning_names) if conditioning_names is not None else tuple(f"v{j + 1}" for j in range(v.shape[1]))

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def d(self):
        return self.x.shape[1]

    @property
    def n0(self):
        return int(np.sum(self.a == 0))

    @property
    def n1(self):
        return int(np.sum(self.a == 1))

    def arm(self, treatment):
        """Returns the row indices of one treatment arm."""
        return np.flatnonzero(self.a == treatment)

    def subset(self, mask):
        """Returns a new Dataset with only the rows selected by a boolean mask or index array."""
        mask = np.asarray(mask)

        return Dataset(
            self.x[mask], self.a[mask], self.y[mask],
            v=None if self.v is None else self.v[mask],
            outcome_bound=self.outcome_bound,
            covariate_names=self.covariate_names,
            conditioning_names=self.conditioning_names or None,
        )

    def with_outcomes(self, y, outcome_bound=None):
        """Returns a copy whose outcomes are replaced by y."""
        return Dataset(
            self.x, self.a, y, v=self.v,
            outcome_bound=self.outcome_bound if outcome_bound is None else outcome_bound,
            covariate_names=self.covariate_names,
            conditioning_names=self.conditioning_names or None,
        )

    def require_both_arms(self, minimum=1):
        """Raises VteInputError unless each arm has at least `minimum` rows."""
        if self.n0 < minimum or self.n1 < minimum:
            logger.error(f"Each treatment arm needs at least {minimum} rows, got n0={self.n0}, n1={self.n1}")
            raise VteInputError(f"Each treatment arm needs at least {minimum} rows, got n0={self.n0}, n1={self.n1}")

    def to_frame(self, treatment_name="a", outcome_name="y"):
        """Lays the dataset out as a pandas DataFrame: covariates, conditioning, treatment, outcome."""
        frame = pd.DataFrame(self.x, columns=list(self.covariate_names))

        if self.v is not None:
            for j, name in enumerate(self.conditioning_names):
                frame[name] = self.v[:, j]

        frame[treatment_name] = self.a
        frame[outcome_name] = self.y

        return frame

    def __eq__(self, other):
        """Compares contents of self with contents of other dataset.

        Returns:
            A boolean, True, if both datasets hold the same arrays and names, else False"""
        if not isinstance(other, Dataset):
            return False

        if (self.v is None) != (other.v is None):
            return False

        same_v = self.v is None or (self.v.shape == other.v.shape and np.array_equal(self.v, other.v))

        return (self.x.shape == other.x.shape and np.array_equal(self.x, other.x)
                and np.array_equal(self.a, other.a) and np.array_equal(self.y, other.y) and same_v
                and self.covariate_names == other.covariate_names
                and self.conditioning_names == other.conditioning_names)

    def __repr__(self):
        return f"Dataset(n={self.n}, d={self.d}, n0={self.n0}, n1={self.n1}, d_v={0 if self.v is None else self.v.shape[1]})"
