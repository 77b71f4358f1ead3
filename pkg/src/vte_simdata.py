"""Synthetic confounded data with known VTE/CVTE and the non-identifiability fixture."""

from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg
from scipy.stats import norm

from logger import get_logger
from vte_dataset import Dataset
from vte_errors import VteInputError

logger = get_logger(__name__)

INDEPENDENT_NOISES = "independent"
SHARED_NOISE = "shared"
CLOSED_FORM = "closed_form"
MONTE_CARLO = "monte_carlo"
DEFAULT_MC_SAMPLES = 10 ** 6


@dataclass(frozen=True)
class SynthConfig:
    """Settings for the tridiagonal-Gaussian confounded generator.

    Attributes:
        n: Number of rows.
        d: Covariate dimension.
        rho: Correlation of adjacent covariates.
        noise_sd: Standard deviation of the potential-outcome noises.
        seed: Seed of the numpy PCG64 generator.
        coupling: "independent" draws eps0 and eps1 separately; "shared" sets eps1 = eps0.
        effect_scale: Multiplier of X1 in the treatment effect (0 ablates the heterogeneous effect).
        conditioning: "none", or "independent" to append a V ~ N(0, 1) column unrelated to X, A and Y.
    """

    n: int
    d: int = 100
    rho: float = 0.5
    noise_sd: float = 1.0
    seed: int = 0
    coupling: str = INDEPENDENT_NOISES
    effect_scale: float = 1.0
    conditioning: str = "none"

    def validate(self):
        if self.n < 1 or self.d < 1:
            logger.error(f"Synthetic config needs n >= 1 and d >= 1, got n={self.n}, d={self.d}")
            raise VteInputError(f"Synthetic config needs n >= 1 and d >= 1, got n={self.n}, d={self.d}")
        if self.noise_sd < 0:
            raise VteInputError(f"noise_sd must be nonnegative, got {self.noise_sd}")
        if self.coupling not in (INDEPENDENT_NOISES, SHARED_NOISE):
            raise VteInputError(f"Unknown noise coupling: {self.coupling}")
        if self.conditioning not in ("none", "independent"):
            raise VteInputError(f"Unknown conditioning column mode: {self.conditioning}")
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise VteInputError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")

        # Eigenvalues of the tridiagonal matrix are 1 + 2 rho cos(k pi / (d + 1)).
        if self.d > 1 and 1.0 - 2.0 * abs(self.rho) * np.cos(np.pi / (self.d + 1)) <= 0:
            logger.error(f"rho={self.rho} makes the covariance singular for d={self.d}")
            raise VteInputError(f"rho={self.rho} makes the covariance singular for d={self.d}")


@dataclass(frozen=True)
class OracleValue:
    """A ground-truth value and how it was obtained.

    Attributes:
        value: The true VTE or CVTE.
        method: "closed_form" or "monte_carlo".
        mc_samples: Number of Monte-Carlo draws used (None for closed forms).
        mc_stderr: Standard error of the Monte-Carlo value (None for closed forms).
    """

    value: float
    method: str = CLOSED_FORM
    mc_samples: int = None
    mc_stderr: float = None


@dataclass(frozen=True, eq=False)
class PotentialOutcomes:
    """Hidden potential outcomes behind a generated dataset."""

    y0: np.ndarray
    y1: np.ndarray

    @property
    def effects(self):
        return self.y1 - self.y0


@dataclass(frozen=True, eq=False)
class NonidentifiablePair:
    """Two datasets sharing one observational law but with different true VTEs."""

    identical_outcomes: Dataset
    mirrored_outcomes: Dataset
    oracle_vtes: tuple = (0.0, 4.0)


def covariance_matrix(d, rho):
    """Tridiagonal covariance with ones on the diagonal and rho next to it."""
    return np.eye(d) + rho * (np.eye(d, k=1) + np.eye(d, k=-1))


def outcome_coefficients(d):
    """beta_i = 1 / (i + 1)^2 for i = 1..d."""
    return 1.0 / (np.arange(1, d + 1) + 1.0) ** 2


def _cholesky(cfg):
    try:
        return linalg.cholesky(covariance_matrix(cfg.d, cfg.rho), lower=True)
    except linalg.LinAlgError as exc:
        logger.error(f"Covariance is not positive definite for d={cfg.d}, rho={cfg.rho}")
        raise VteInputError(f"Covariance is not positive definite for d={cfg.d}, rho={cfg.rho}") from exc


def gen_synthetic(cfg):
    """Draws one dataset from the confounded generator.

    X ~ N(0, Sigma), A ~ Bernoulli(Phi(beta^T X)), Y0 = beta^T X + eps0,
    Y1 = beta^T X + effect_scale * X1 + eps1, Y = Y_A.

    Args:
        cfg: A SynthConfig.

    Returns:
        A (Dataset, PotentialOutcomes) tuple.
    """
    cfg.validate()
    chol = _cholesky(cfg)
    rng = np.random.default_rng(cfg.seed)

    x = rng.standard_normal((cfg.n, cfg.d)) @ chol.T
    beta = outcome_coefficients(cfg.d)
    index = x @ beta

    a = (rng.uniform(size=cfg.n) < norm.cdf(index)).astype(int)

    eps0 = cfg.noise_sd * rng.standard_normal(cfg.n)
    eps1 = cfg.noise_sd * rng.standard_normal(cfg.n)
    if cfg.coupling == SHARED_NOISE:
        eps1 = eps0

    y0 = index + eps0
    y1 = index + cfg.effect_scale * x[:, 0] + eps1
    y = np.where(a == 1, y1, y0)

    v = None
    if cfg.conditioning == "independent":
        v = rng.standard_normal((cfg.n, 1))

    data = Dataset(x, a, y, v=v)

    logger.info(f"Generated synthetic data n={cfg.n}, d={cfg.d}, seed={cfg.seed}, n1={data.n1}")

    return data, PotentialOutcomes(y0, y1)


def _variance_with_stderr(samples):
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[0]
    centered = samples - samples.mean()
    variance = float(np.mean(centered ** 2))
    fourth = float(np.mean(centered ** 4))

    return variance, float(np.sqrt(max(fourth - variance ** 2, 0.0) / m))


def true_vte(cfg, method=CLOSED_FORM, mc_samples=DEFAULT_MC_SAMPLES):
    """True VTE of the generator under conditionally uncorrelated potential outcomes.

    The closed form is effect_scale^2 Var(X1) + 2 noise_sd^2 regardless of coupling;
    the Monte-Carlo cross-check simulates Y1 - Y0 with independent noises.

    Returns:
        An OracleValue.
    """
    cfg.validate()

    if method == CLOSED_FORM:
        return OracleValue(cfg.effect_scale ** 2 + 2.0 * cfg.noise_sd ** 2)

    if method != MONTE_CARLO:
        raise VteInputError(f"Unknown oracle method: {method}")

    rng = np.random.default_rng(cfg.seed)
    x1 = rng.standard_normal(mc_samples)
    effects = cfg.effect_scale * x1 + cfg.noise_sd * (rng.standard_normal(mc_samples) - rng.standard_normal(mc_samples))
    value, stderr = _variance_with_stderr(effects)

    return OracleValue(value, MONTE_CARLO, mc_samples, stderr)


def true_cvte(cfg, condition_value=0.0, method=CLOSED_FORM, mc_samples=DEFAULT_MC_SAMPLES, window=0.01):
    """True CVTE given X2 = condition_value.

    For jointly Gaussian X, Var(X1 | X2 = c) = 1 - rho^2 whatever c is, so the closed
    form is effect_scale^2 (1 - rho^2) + 2 noise_sd^2. The Monte-Carlo cross-check keeps
    draws with |X2 - c| <= window until mc_samples have been accepted.

    Returns:
        An OracleValue.
    """
    cfg.validate()

    if cfg.d < 2:
        logger.error("Conditioning on X2 needs d >= 2")
        raise VteInputError("Conditioning on X2 needs d >= 2")

    if method == CLOSED_FORM:
        return OracleValue(cfg.effect_scale ** 2 * (1.0 - cfg.rho ** 2) + 2.0 * cfg.noise_sd ** 2)

    if method != MONTE_CARLO:
        raise VteInputError(f"Unknown oracle method: {method}")

    rng = np.random.default_rng(cfg.seed)
    chol = np.array([[1.0, 0.0], [cfg.rho, np.sqrt(1.0 - cfg.rho ** 2)]])
    accepted = []
    count = 0
    batch = max(mc_samples, 10 ** 5)

    while count < mc_samples:
        pairs = rng.standard_normal((batch, 2)) @ chol.T
        keep = pairs[np.abs(pairs[:, 1] - condition_value) <= window, 0]
        accepted.append(keep)
        count += keep.shape[0]

    x1 = np.concatenate(accepted)[:mc_samples]
    effects = cfg.effect_scale * x1 + cfg.noise_sd * (rng.standard_normal(mc_samples) - rng.standard_normal(mc_samples))
    value, stderr = _variance_with_stderr(effects)

    return OracleValue(value, MONTE_CARLO, mc_samples, stderr)


def gen_nonidentifiable_pair(n, seed):
    """Builds two datasets with identical observational laws but VTEs 0 and 4.

    X ~ N(0, 1), A ~ Bernoulli(0.5), Y0 ~ N(0, 1). The first case sets Y1 = Y0,
    the second Y1 = -Y0; in both, Y | A, X is standard normal.

    Returns:
        A NonidentifiablePair.
    """
    if n < 2:
        raise VteInputError(f"Non-identifiability fixture needs n >= 2, got {n}")

    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 1))
    a = (rng.uniform(size=n) < 0.5).astype(int)
    y0 = rng.standard_normal(n)

    identical = Dataset(x, a, y0)
    mirrored = Dataset(x, a, np.where(a == 1, -y0, y0))

    return NonidentifiablePair(identical, mirrored, (0.0, 4.0))


def with_seed(cfg, seed):
    """Returns a copy of cfg with another seed."""
    return replace(cfg, seed=seed)
