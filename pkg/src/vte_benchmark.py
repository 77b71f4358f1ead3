"""Seeded benchmark grid over methods and sample sizes, with per-repetition records."""

import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from logger import get_logger
from vte_baselines import MatchConfig, cate_variance_baseline, fit_propensity, match_vte, naive_vte
from vte_errors import VteError, VteInputError
from vte_estimators import (DEFAULT_CME_SELECTION_ROWS, LambdaPolicy, estimate_cvte_external,
                            estimate_cvte_subset, estimate_vte, fit_nuisances)
from vte_krr import LAMBDA_GRID
from vte_simdata import SynthConfig, gen_synthetic, true_cvte, true_vte

logger = get_logger(__name__)

PROPOSED = "proposed"
NAIVE = "naive"
CATE_VAR = "cate_var"
MATCH_EUCLID = "match_euclid"
MATCH_PSM = "match_psm"
METHODS = (PROPOSED, NAIVE, CATE_VAR, MATCH_EUCLID, MATCH_PSM)
ESTIMANDS = ("vte", "cvte")

_CONDITION_PATTERN = re.compile(r"^\s*([xv])(\d+)\s*=\s*(\S+)\s*$")


@dataclass(frozen=True)
class Condition:
    """A conditioning query such as x2=0.

    Attributes:
        source: "x" for a covariate column, "v" for an external conditioning column.
        column: 0-based column index.
        value: The conditioning value.
    """

    source: str
    column: int
    value: float

    def __str__(self):
        return f"{self.source}{self.column + 1}={self.value:g}"


def parse_condition(text):
    """Parses "xK=c" or "vK=c" with 1-based K into a Condition."""
    match = _CONDITION_PATTERN.match(str(text))

    if match is None or int(match.group(2)) < 1:
        logger.error(f"Cannot parse condition '{text}', expected e.g. x2=0")
        raise VteInputError(f"Cannot parse condition '{text}', expected e.g. x2=0")

    try:
        value = float(match.group(3))
    except ValueError:
        raise VteInputError(f"Condition value in '{text}' is not a number")

    return Condition(match.group(1), int(match.group(2)) - 1, value)


@dataclass
class RunConfig:
    """Benchmark settings; JSON config files and command line flags map onto these fields."""

    methods: tuple = METHODS
    sizes: tuple = (500, 1000, 5000)
    reps: int = 20
    seed: int = 0
    estimand: str = "vte"
    condition: str = None
    subset_tolerance: float = 0.1
    k: int = 1
    d: int = 100
    rho: float = 0.5
    noise_sd: float = 1.0
    coupling: str = "independent"
    lambda_grid: tuple = LAMBDA_GRID
    lambda_v_grid: tuple = LAMBDA_GRID
    cme_selection_rows: int = DEFAULT_CME_SELECTION_ROWS
    workers: int = 1
    out: str = "results"
    formats: tuple = ("json", "csv", "plotdata")

    def __post_init__(self):
        for name in ("methods", "sizes", "lambda_grid", "lambda_v_grid", "formats"):
            value = getattr(self, name)
            if isinstance(value, str):
                value = [part.strip() for part in value.split(",") if part.strip()]
            setattr(self, name, tuple(value))
        self.sizes = tuple(int(size) for size in self.sizes)
        self.lambda_grid = tuple(float(lam) for lam in self.lambda_grid)
        self.lambda_v_grid = tuple(float(lam) for lam in self.lambda_v_grid)

    def validate(self):
        if self.reps < 1:
            raise VteInputError(f"reps must be at least 1, got {self.reps}")
        if len(self.sizes) == 0 or min(self.sizes) < 4:
            raise VteInputError(f"sizes must be non-empty and at least 4, got {self.sizes}")
        unknown = [method for method in self.methods if method not in METHODS]
        if unknown or len(self.methods) == 0:
            raise VteInputError(f"Unknown or missing methods {unknown}; choose from {METHODS}")
        if self.estimand not in ESTIMANDS:
            raise VteInputError(f"Unknown estimand {self.estimand}")
        if (self.estimand == "cvte") != (self.condition is not None):
            raise VteInputError("A condition is required for cvte and only allowed for cvte")
        if self.condition is not None:
            condition = parse_condition(self.condition)
            if condition.source != "x" or condition.column != 1:
                raise VteInputError(f"Synthetic benchmarks condition on x2, got {self.condition}")
        if self.subset_tolerance <= 0 or self.k < 1 or self.workers < 1:
            raise VteInputError("subset_tolerance, k and workers must be positive")

    def to_dict(self):
        return {key: list(value) if isinstance(value, tuple) else value for key, value in asdict(self).items()}

    @classmethod
    def from_dict(cls, values):
        """Builds a RunConfig from a dict, rejecting unknown keys."""
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)

        if unknown:
            logger.error(f"Unknown config keys: {unknown}")
            raise VteInputError(f"Unknown config keys: {unknown}")

        return cls(**values)


@dataclass
class RepetitionRecord:
    """Outcome of one method on one repetition."""

    rep: int
    seed: int
    estimate: float = None
    abs_error: float = None
    error: str = None
    seconds: float = field(default=0.0, compare=False)

    @property
    def failed(self):
        return self.error is not None


@dataclass
class CellResult:
    """All repetitions of one method at one sample size."""

    method: str
    size: int
    truth: float
    runs: list = field(default_factory=list)

    def _errors(self):
        return np.array([run.abs_error for run in self.runs if not run.failed], dtype=float)

    @property
    def estimates(self):
        return [run.estimate for run in self.runs if not run.failed]

    @property
    def excluded(self):
        return sum(1 for run in self.runs if run.failed)

    @property
    def mae(self):
        errors = self._errors()
        return float(np.mean(errors)) if errors.size else float("nan")

    @property
    def se(self):
        errors = self._errors()
        if errors.size < 2:
            return 0.0
        return float(np.std(errors, ddof=1) / np.sqrt(errors.size))

    @property
    def estimate_sd(self):
        estimates = np.array(self.estimates, dtype=float)
        if estimates.size < 2:
            return 0.0
        return float(np.std(estimates, ddof=1))


@dataclass
class BenchmarkResult:
    """Benchmark cells ordered by size, then by method order in the config."""

    config: dict
    cells: list = field(default_factory=list)

    def cell(self, method, size):
        for cell in self.cells:
            if cell.method == method and cell.size == size:
                return cell
        raise KeyError((method, size))


def subset_mask(data, condition, tolerance):
    """Rows whose conditioning coordinate lies within tolerance of the condition value."""
    column = data.x[:, condition.column] if condition.source == "x" else data.v[:, condition.column]
    return np.abs(column - condition.value) <= tolerance


class MethodRunner:
    """Runs the benchmark methods on one dataset, sharing fitted nuisances between them.

    Attributes:
        data: The Dataset.
        estimand: "vte" or "cvte".
        condition: A Condition for cvte, else None.
        cfg: The RunConfig supplying k, tolerances and lambda grids.
    """

    def __init__(self, data, estimand, condition, cfg):
        self.data = data
        self.estimand = estimand
        self.condition = condition
        self.cfg = cfg
        self._nuisances = None

    def nuisances(self):
        if self._nuisances is None:
            self._nuisances = fit_nuisances(self.data, None, LambdaPolicy(self.cfg.lambda_grid))
        return self._nuisances

    def baseline_data(self):
        """Data the naive and matching baselines see: the whole sample, or the conditioning subset."""
        if self.estimand == "vte":
            return self.data

        mask = subset_mask(self.data, self.condition, self.cfg.subset_tolerance)
        logger.info(f"Conditioning subset {self.condition} +/- {self.cfg.subset_tolerance} keeps {int(mask.sum())} rows")

        return self.data.subset(mask)

    def proposed_report(self):
        """Full EstimateReport of the kernel estimator for this runner's estimand."""
        policy = LambdaPolicy(self.cfg.lambda_grid)

        if self.estimand == "vte":
            return estimate_vte(self.data, self.nuisances())

        if self.condition.source == "x":
            return estimate_cvte_subset(
                self.data, [self.condition.column], [self.condition.value],
                lambda_policy=policy,
                lambda_v_grid=self.cfg.lambda_v_grid,
                cme_selection_rows=self.cfg.cme_selection_rows,
            )

        return estimate_cvte_external(
            self.data, [self.condition.column], [self.condition.value],
            models=self.nuisances(),
            lambda_v_grid=self.cfg.lambda_v_grid,
            cme_selection_rows=self.cfg.cme_selection_rows,
        )

    def proposed(self):
        return self.proposed_report().estimate

    def naive(self):
        return naive_vte(self.baseline_data())

    def cate_var(self):
        if self.estimand == "vte":
            return cate_variance_baseline(self.data, self.nuisances())
        return cate_variance_baseline(self.data, self.nuisances(), subset_mask(self.data, self.condition, self.cfg.subset_tolerance))

    def match_euclid(self):
        return match_vte(self.baseline_data(), MatchConfig(self.cfg.k, "euclidean"))

    def match_psm(self):
        data = self.baseline_data()
        return match_vte(data, MatchConfig(self.cfg.k, "propensity"), fit_propensity(data))

    def run(self, method):
        if method not in METHODS:
            raise VteInputError(f"Unknown method {method}")
        return float(getattr(self, method)())


def run_method(method, data, estimand="vte", condition=None, cfg=None):
    """Runs a single method on a single dataset and returns its estimate."""
    cfg = cfg or RunConfig()
    if isinstance(condition, str):
        condition = parse_condition(condition)

    return MethodRunner(data, estimand, condition, cfg).run(method)


def _truth(cfg, size, seed, condition):
    synth = SynthConfig(n=size, d=cfg.d, rho=cfg.rho, noise_sd=cfg.noise_sd, seed=seed, coupling=cfg.coupling)

    if cfg.estimand == "vte":
        return synth, true_vte(synth).value
    return synth, true_cvte(synth, condition.value).value


def _run_repetition(cfg, size, rep, condition):
    seed = cfg.seed + rep
    synth, truth = _truth(cfg, size, seed, condition)
    data, _ = gen_synthetic(synth)
    runner = MethodRunner(data, cfg.estimand, condition, cfg)
    records = {}

    for method in cfg.methods:
        started = time.perf_counter()
        try:
            estimate = runner.run(method)
            records[method] = RepetitionRecord(rep, seed, estimate, abs(estimate - truth), None, time.perf_counter() - started)
        except (VteError, np.linalg.LinAlgError) as exc:
            logger.warning(f"Method {method} failed at n={size}, repetition {rep}: {exc}")
            records[method] = RepetitionRecord(rep, seed, None, None, str(exc), time.perf_counter() - started)

    logger.info(f"Finished repetition {rep} at n={size}")

    return truth, records


def run_benchmark(cfg):
    """Runs every method on cfg.reps seeded synthetic datasets per size.

    Repetition r uses seed cfg.seed + r. Failed method runs are recorded with their
    error and left out of MAE and SE. Results are assembled in (size, repetition)
    order whatever the worker count, so equal configs give equal results.

    Returns:
        A BenchmarkResult.
    """
    cfg.validate()
    condition = parse_condition(cfg.condition) if cfg.condition is not None else None
    result = BenchmarkResult(cfg.to_dict())

    for size in cfg.sizes:
        reps = list(range(cfg.reps))

        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                outcomes = list(pool.map(lambda rep: _run_repetition(cfg, size, rep, condition), reps))
        else:
            outcomes = [_run_repetition(cfg, size, rep, condition) for rep in reps]

        truth = outcomes[0][0]
        for method in cfg.methods:
            cell = CellResult(method, size, truth, [records[method] for _, records in outcomes])
            result.cells.append(cell)
            logger.info(f"{method} at n={size}: MAE {cell.mae:.3f} (SE {cell.se:.3f}), {cell.excluded} excluded")

    return result
