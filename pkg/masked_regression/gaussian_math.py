"""
Gaussian facts and samplers used by every other module.

Closed forms for total variation and KL between Gaussians, the rank-one
inverse, conditioning a standard Gaussian on a noisy linear observation,
and a splittable seeded random stream.
"""

from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import special

from masked_regression.errors import InvalidInputError, SingularityError

SYMMETRY_TOL = 1e-12
PSD_TOL = 1e-10
PIVOT_TOL = 1e-12


# --- Random streams ---

class RngStream:
    """Seeded numpy Generator that splits into independent children by index.

    A child depends only on (seed, path), never on how much the parent has
    already consumed, so trial i gets the same stream whatever the thread
    layout.
    """

    def __init__(self, seed: int = 0, path: Tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = tuple(int(p) for p in path)
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        self.generator = np.random.default_rng(seq)

    def child(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.path + (int(index),))

    def standard_normal(self, size=None) -> np.ndarray:
        return self.generator.standard_normal(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def permuted(self, x: np.ndarray, axis: int = -1) -> np.ndarray:
        return self.generator.permuted(x, axis=axis)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def choice(self, a, size=None, replace=True):
        return self.generator.choice(a, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


# --- Distribution types ---

@dataclass(frozen=True)
class UnivariateGaussian:
    mean: float
    variance: float

    def __post_init__(self):
        if not np.isfinite(self.mean) or not np.isfinite(self.variance):
            raise InvalidInputError(f"non-finite Gaussian parameters: {self.mean}, {self.variance}")
        if self.variance < 0:
            raise InvalidInputError(f"variance must be >= 0, got {self.variance}")

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))

    def pdf(self, x):
        if self.variance == 0:
            raise SingularityError("density of a point mass is undefined")
        z = (np.asarray(x, dtype=float) - self.mean) / self.std
        return np.exp(-0.5 * z * z) / (self.std * np.sqrt(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class MultivariateGaussian:
    """N(mean, covariance) with a PSD covariance (rank deficiency allowed)."""

    mean: np.ndarray
    covariance: np.ndarray
    _sqrt: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(-1)
        cov = np.asarray(self.covariance, dtype=float)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise InvalidInputError(f"covariance shape {cov.shape} does not match mean length {d}")
        scale = max(1.0, float(np.max(np.abs(cov)))) if d else 1.0
        if d and np.max(np.abs(cov - cov.T)) > SYMMETRY_TOL * scale:
            raise InvalidInputError("covariance is not symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_sqrt", psd_sqrt(cov))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def sqrt_factor(self) -> np.ndarray:
        """Symmetric square root S with S @ S = covariance."""
        return self._sqrt


def psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root via eigendecomposition; tolerates singular input."""
    cov = 0.5 * (cov + cov.T)
    if cov.size == 0:
        return cov.copy()
    w, v = scipy.linalg.eigh(cov)
    if w[0] < -PSD_TOL:
        raise InvalidInputError(f"covariance is not PSD (smallest eigenvalue {w[0]:.3g})")
    w = np.clip(w, 0.0, None)
    return (v * np.sqrt(w)) @ v.T


# --- Distances ---

def _check_equal_variance(g1: UnivariateGaussian, g2: UnivariateGaussian):
    if g1.variance <= 0 or g2.variance <= 0:
        raise InvalidInputError("variances must be positive")
    if not np.isclose(g1.variance, g2.variance, rtol=1e-12, atol=0.0):
        raise InvalidInputError(f"unequal variances {g1.variance} and {g2.variance}")


def tv_bound_univariate(g1: UnivariateGaussian, g2: UnivariateGaussian) -> float:
    """Upper bound (1/sqrt 2)|mu1 - mu2|/sigma on TV for equal variances."""
    _check_equal_variance(g1, g2)
    return abs(g1.mean - g2.mean) / (np.sqrt(2.0) * g1.std)


def tv_exact_univariate_equal_var(g1: UnivariateGaussian, g2: UnivariateGaussian) -> float:
    """Exact TV = 2 Phi(|delta| / (2 sigma)) - 1."""
    _check_equal_variance(g1, g2)
    z = abs(g1.mean - g2.mean) / (2.0 * g1.std)
    # 2 Phi(z) - 1 == erf(z / sqrt 2), which keeps precision near zero
    return float(special.erf(z / np.sqrt(2.0)))


def tv_exact_from_shift(delta, sigma):
    """Vectorized exact TV between N(m, s^2) and N(m + delta, s^2)."""
    return special.erf(np.abs(delta) / (2.0 * np.sqrt(2.0) * sigma))


def kl_gaussians(p: MultivariateGaussian, q: MultivariateGaussian) -> float:
    """KL(p || q) in closed form; +inf when p is singular and q is not."""
    if p.dim != q.dim:
        raise InvalidInputError(f"dimension mismatch: {p.dim} vs {q.dim}")
    try:
        factor = scipy.linalg.cho_factor(q.covariance, lower=True)
    except np.linalg.LinAlgError as e:
        raise SingularityError("q covariance is singular") from e
    diag = np.diag(factor[0])
    if np.min(diag) < np.sqrt(PIVOT_TOL) * max(1.0, np.max(diag)):
        raise SingularityError("q covariance is numerically singular")
    sign_p, logdet_p = np.linalg.slogdet(p.covariance)
    if sign_p <= 0:
        return float("inf")
    logdet_q = 2.0 * np.sum(np.log(diag))
    delta = q.mean - p.mean
    trace_term = np.trace(scipy.linalg.cho_solve(factor, p.covariance))
    mahal = float(delta @ scipy.linalg.cho_solve(factor, delta))
    kl = 0.5 * (logdet_q - logdet_p - p.dim + trace_term + mahal)
    return max(0.0, float(kl))


def pinsker_tv_bound(kl: float) -> float:
    """sqrt(kl / 2). May exceed 1; callers clamp."""
    if kl < 0 or not np.isfinite(kl):
        raise InvalidInputError(f"KL must be a finite nonnegative number, got {kl}")
    return float(np.sqrt(kl / 2.0))


# --- Structured inverses and conditionals ---

def sherman_morrison_inverse(u: Sequence[float], v: Sequence[float]) -> np.ndarray:
    """Inverse of I + u v^T."""
    u = np.asarray(u, dtype=float).reshape(-1)
    v = np.asarray(v, dtype=float).reshape(-1)
    if u.shape != v.shape:
        raise InvalidInputError(f"u and v differ in length: {u.shape[0]} vs {v.shape[0]}")
    pivot = 1.0 + float(v @ u)
    if abs(pivot) < PIVOT_TOL:
        raise SingularityError(f"1 + v^T u = {pivot:.3g} is too close to zero")
    return np.eye(u.shape[0]) - np.outer(u, v) / pivot


def conditional_given_linear(d: int, u: Sequence[float], sigma: float, r: float) -> MultivariateGaussian:
    """Law of X ~ N(0, I_d) given u^T X + xi = r, xi ~ N(0, sigma^2)."""
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.shape[0] != d:
        raise InvalidInputError(f"u has length {u.shape[0]}, expected {d}")
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    denom = float(u @ u) + sigma * sigma
    if denom <= 0:
        raise InvalidInputError("u = 0 and sigma = 0: the observation carries no noise and no signal")
    mean = r * u / denom
    cov = np.eye(d) - np.outer(u, u) / denom
    return MultivariateGaussian(mean, cov)


# --- Samplers ---

def sample_gaussian(g: MultivariateGaussian, rng: RngStream) -> np.ndarray:
    z = rng.standard_normal(g.dim)
    return g.mean + g.sqrt_factor @ z


def sample_gaussian_batch(g: MultivariateGaussian, m: int, rng: RngStream) -> np.ndarray:
    """m draws as an (m, d) array."""
    z = rng.standard_normal((m, g.dim))
    return g.mean[None, :] + z @ g.sqrt_factor


def sample_sum_conditioned(d: int, t: float, rng: RngStream) -> np.ndarray:
    """Draw from N(0, I_d) conditioned on the coordinate sum being t."""
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    z = rng.standard_normal(d)
    return z - z.mean() + t / d


def sample_sum_conditioned_batch(d: int, t: np.ndarray, rng: RngStream) -> np.ndarray:
    """Row k is conditioned on summing to t[k]."""
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    t = np.asarray(t, dtype=float).reshape(-1)
    z = rng.standard_normal((t.shape[0], d))
    return z - z.mean(axis=1, keepdims=True) + (t / d)[:, None]
