import numpy as np
import pandas as pd
from pathlib import Path

from logger import get_logger
from vte_dataset import DEFAULT_OUTCOME_BOUND, Dataset
from vte_errors import VteInputError

logger = get_logger(__name__)

COVARIATE = "covariate"
CATEGORICAL = "categorical"
TREATMENT = "treatment"
OUTCOME = "outcome"
CONDITIONING = "conditioning"
ROLES = (COVARIATE, CATEGORICAL, TREATMENT, OUTCOME, CONDITIONING)


class VteFileReader:
    """Loads and writes observational datasets as CSV files.

    Attributes:
        outcome_bound: The bound R given to every Dataset read.
        logger: A general logger passed from logger.py.
    """

    def __init__(self, outcome_bound=DEFAULT_OUTCOME_BOUND):
        """Initializes the instance with default values."""

        self.outcome_bound = outcome_bound
        self.logger = get_logger(__name__)

    def _fail(self, message, row=None, column=None):
        self.logger.error(message)
        raise VteInputError(message, row=row, column=column)

    def default_schema(self, columns, treatment="a", outcome="y", conditioning=(), categorical=()):
        """Builds a role map: named treatment, outcome, conditioning and categorical columns, every other column a covariate.

        Returns:
            A dict, column name -> role, in file column order.
        """

        schema = {}
        for column in columns:
            if column == treatment:
                schema[column] = TREATMENT
            elif column == outcome:
                schema[column] = OUTCOME
            elif column in conditioning:
                schema[column] = CONDITIONING
            elif column in categorical:
                schema[column] = CATEGORICAL
            else:
                schema[column] = COVARIATE

        return schema

    def read_columns(self, path):
        """Returns the header of a CSV file as a list of column names."""

        return list(pd.read_csv(Path(path), nrows=0, encoding="utf-8").columns)

    def _numeric_column(self, frame, column):
        """Parses a column of strings as floats, failing on the first bad cell."""

        values = pd.to_numeric(frame[column].str.strip(), errors="coerce")
        bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))

        if bad.any():
            position = int(np.flatnonzero(bad.to_numpy())[0])
            self._fail(f"Non-numeric or non-finite value '{frame[column].iloc[position]}' at row {position + 1}, column {column}",
                       row=position + 1, column=column)

        return values.to_numpy(dtype=float)

    def read_dataset(self, path, schema=None):
        """Reads a Dataset from a comma-separated file with a header row.

        Covariate, treatment, outcome and conditioning cells must be plain decimal
        numbers. Categorical covariate columns are one-hot encoded, levels sorted,
        with the new columns named "<column>=<level>" and placed where the column was.

        Args:
            path: Path of a UTF-8 CSV file.
            schema: A dict, column name -> one of "covariate", "categorical",
                "treatment", "outcome", "conditioning". Columns left out are ignored.
                Defaults to default_schema on the header.

        Returns:
            A Dataset.

        Raises:
            VteInputError: For a missing column, a bad role, a non-numeric cell or a
                non-binary treatment, naming the 1-based data row and the column.
        """

        path = Path(path)
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
        self.logger.info(f"Read {len(frame)} rows and {len(frame.columns)} columns from {path}")

        if schema is None:
            schema = self.default_schema(frame.columns)

        for column, role in schema.items():
            if column not in frame.columns:
                self._fail(f"Column {column} named in the schema is missing from {path}", column=column)
            if role not in ROLES:
                self._fail(f"Column {column} has unknown role {role}", column=column)

        treatment_columns = [column for column, role in schema.items() if role == TREATMENT]
        outcome_columns = [column for column, role in schema.items() if role == OUTCOME]

        if len(treatment_columns) != 1 or len(outcome_columns) != 1:
            self._fail(f"Schema needs exactly one treatment and one outcome column, got {treatment_columns} and {outcome_columns}")

        covariates = []
        covariate_names = []
        conditioning = []
        conditioning_names = []

        for column in frame.columns:
            role = schema.get(column)

            if role == COVARIATE:
                covariates.append(self._numeric_column(frame, column))
                covariate_names.append(column)
            elif role == CATEGORICAL:
                cells = frame[column].str.strip()
                for level in sorted(cells.unique()):
                    covariates.append((cells == level).to_numpy(dtype=float))
                    covariate_names.append(f"{column}={level}")
            elif role == CONDITIONING:
                conditioning.append(self._numeric_column(frame, column))
                conditioning_names.append(column)

        if len(covariates) == 0:
            self._fail(f"No covariate columns found in {path}")

        treatment_column = treatment_columns[0]
        treatment = self._numeric_column(frame, treatment_column)
        not_binary = ~np.isin(treatment, (0.0, 1.0))
        if not_binary.any():
            position = int(np.flatnonzero(not_binary)[0])
            self._fail(f"Treatment value '{frame[treatment_column].iloc[position]}' at row {position + 1}, column {treatment_column} is not 0 or 1",
                       row=position + 1, column=treatment_column)

        outcome_column = outcome_columns[0]
        outcome = self._numeric_column(frame, outcome_column)
        over = np.abs(outcome) > self.outcome_bound
        if over.any():
            position = int(np.flatnonzero(over)[0])
            self._fail(f"Outcome {outcome[position]} at row {position + 1}, column {outcome_column} exceeds the bound {self.outcome_bound}",
                       row=position + 1, column=outcome_column)

        data = Dataset(
            np.column_stack(covariates),
            treatment.astype(int),
            outcome,
            v=np.column_stack(conditioning) if conditioning else None,
            outcome_bound=self.outcome_bound,
            covariate_names=covariate_names,
            conditioning_names=conditioning_names or None,
        )

        self.logger.info(f"Imported dataset with n={data.n}, d={data.d}, n0={data.n0}, n1={data.n1}")

        return data

    def write_dataset(self, data, path, treatment="a", outcome="y"):
        """Writes a Dataset as CSV with full float precision.

        Returns:
            The schema that read_dataset needs to re-read the file.
        """

        path = Path(path)
        frame = data.to_frame(treatment, outcome)

        try:
            frame.to_csv(path, index=False, float_format="%.17g")
        except OSError as exc:
            self.logger.error(f"Cannot write dataset to {path}: {exc}")
            raise

        self.logger.info(f"Wrote dataset with n={data.n} to {path}")

        return self.default_schema(frame.columns, treatment, outcome, data.conditioning_names)


def normalize_outcomes(data):
    """Rescales outcomes to unit population variance.

    Returns:
        A (Dataset, scale) tuple where the new outcomes are y / scale.

    Raises:
        VteInputError: If n < 2 or the outcomes are constant.
    """
    if data.n < 2:
        logger.error("Outcome normalization needs at least 2 rows")
        raise VteInputError("Outcome normalization needs at least 2 rows")

    scale = float(np.std(data.y))
    if scale == 0.0:
        logger.error("Outcomes are constant and cannot be normalized")
        raise VteInputError("Outcomes are constant and cannot be normalized")

    logger.info(f"Normalized outcomes by scale {scale:.6g}")

    return data.with_outcomes(data.y / scale, outcome_bound=data.outcome_bound / scale), scale
