"""
Clean data model, masked datasets, and the hypothesis pairs used by the
lower-bound constructions.

A missing entry (the erasure symbol) is stored as NaN in memory and as
JSON null on disk.
"""

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import numpy as np

from masked_regression.errors import InvalidInputError, RegimeError
from masked_regression.gaussian_math import RngStream, UnivariateGaussian

NORM_TOL = 1e-9


class Regime(str, Enum):
    SMALL_BETA = "small-beta"
    BIG_ETA = "big-eta"
    INTERM_ETA = "interm-eta"
    SMALL_ETA = "small-eta"


# --- Core types ---

@dataclass(frozen=True, eq=False)
class RegressionInstance:
    """y = beta^T x + xi with x ~ N(0, I_d), xi ~ N(0, sigma^2)."""

    d: int
    beta: np.ndarray
    sigma: float

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float).reshape(-1)
        if self.d < 1:
            raise InvalidInputError(f"d must be >= 1, got {self.d}")
        if beta.shape[0] != self.d:
            raise InvalidInputError(f"beta has length {beta.shape[0]}, expected d={self.d}")
        if self.sigma < 0:
            raise InvalidInputError(f"sigma must be >= 0, got {self.sigma}")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma", float(self.sigma))

    @property
    def beta_norm(self) -> float:
        return float(np.linalg.norm(self.beta))


@dataclass(frozen=True, eq=False)
class LabeledSample:
    x: np.ndarray
    y: float


@dataclass(frozen=True, eq=False)
class MaskedSample:
    """Covariates and label where NaN marks an erased entry."""

    x: np.ndarray
    y: float

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.x)

    @property
    def label_missing(self) -> bool:
        return bool(np.isnan(self.y))

    def to_json(self) -> dict:
        return {"x": [_to_json_value(v) for v in self.x], "y": _to_json_value(self.y)}


@dataclass(frozen=True, eq=False)
class HypothesisPair:
    beta0: np.ndarray
    beta1: np.ndarray
    sigma: float
    regime: Regime

    def __post_init__(self):
        b0 = np.asarray(self.beta0, dtype=float).reshape(-1)
        b1 = np.asarray(self.beta1, dtype=float).reshape(-1)
        if b0.shape != b1.shape:
            raise InvalidInputError("hypotheses differ in dimension")
        if abs(np.linalg.norm(b0) - np.linalg.norm(b1)) > NORM_TOL * max(1.0, np.linalg.norm(b0)):
            raise InvalidInputError("hypotheses must have equal norms")
        object.__setattr__(self, "beta0", b0)
        object.__setattr__(self, "beta1", b1)

    @property
    def d(self) -> int:
        return self.beta0.shape[0]

    @property
    def beta_norm(self) -> float:
        return float(np.linalg.norm(self.beta0))

    @property
    def separation(self) -> float:
        return float(np.linalg.norm(self.beta0 - self.beta1))

    def instance(self, side: int) -> RegressionInstance:
        beta = self.beta0 if side == 0 else self.beta1
        return RegressionInstance(self.d, beta, self.sigma)


# --- Datasets ---

def _to_json_value(v: float) -> Optional[float]:
    return None if np.isnan(v) else float(v)


class Dataset:
    """n samples held column-wise: X is (n, d), y is (n,). NaN means erased."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise InvalidInputError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise InvalidInputError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
        if np.isinf(X).any() or np.isinf(y).any():
            raise InvalidInputError("dataset entries must be finite or erased")
        self.X = X
        self.y = y

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[Union[LabeledSample, MaskedSample]]:
        masked = self.has_missing
        for row, label in zip(self.X, self.y):
            if masked:
                yield MaskedSample(row.copy(), float(label))
            else:
                yield LabeledSample(row.copy(), float(label))

    def __getitem__(self, i: int) -> MaskedSample:
        return MaskedSample(self.X[i].copy(), float(self.y[i]))

    @property
    def has_missing(self) -> bool:
        return bool(np.isnan(self.X).any() or np.isnan(self.y).any())

    def missing_counts(self) -> np.ndarray:
        """Erased entries per covariate column, then the label column last."""
        return np.concatenate([np.isnan(self.X).sum(axis=0), [np.isnan(self.y).sum()]]).astype(int)

    def complete_rows(self) -> np.ndarray:
        return ~(np.isnan(self.X).any(axis=1) | np.isnan(self.y))

    def copy(self) -> "Dataset":
        return Dataset(self.X.copy(), self.y.copy())

    def identical_to(self, other: "Dataset") -> bool:
        """Bitwise equality, treating erased entries as equal to each other."""
        return (self.X.shape == other.X.shape
                and np.array_equal(self.X, other.X, equal_nan=True)
                and np.array_equal(self.y, other.y, equal_nan=True))

    @classmethod
    def from_samples(cls, samples: Iterable[Union[LabeledSample, MaskedSample]]) -> "Dataset":
        samples = list(samples)
        if not samples:
            raise InvalidInputError("no samples")
        X = np.vstack([np.asarray(s.x, dtype=float) for s in samples])
        y = np.array([s.y for s in samples], dtype=float)
        return cls(X, y)

    def save_jsonl(self, path: Path):
        write_jsonl(self, path)

    @classmethod
    def load_jsonl(cls, path: Path) -> "Dataset":
        return read_jsonl(path)


def write_jsonl(data: Dataset, path: Path):
    """One object per line: {"x": [...], "y": ...}; null encodes an erased entry."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for row, label in zip(data.X, data.y):
            entry = {"x": [_to_json_value(v) for v in row], "y": _to_json_value(label)}
            f.write(json.dumps(entry) + "\n")


def read_jsonl(path: Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"dataset file not found: {path}")
    rows, labels = [], []
    for line_num, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            x = [math.nan if v is None else float(v) for v in entry["x"]]
            y = math.nan if entry.get("y") is None else float(entry["y"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise InvalidInputError(f"{path}:{line_num}: malformed sample ({e})") from e
        if rows and len(x) != len(rows[0]):
            raise InvalidInputError(f"{path}:{line_num}: expected {len(rows[0])} covariates, got {len(x)}")
        rows.append(x)
        labels.append(y)
    if not rows:
        raise InvalidInputError(f"{path}: no samples")
    return Dataset(np.array(rows, dtype=float), np.array(labels, dtype=float))


# --- Sampling ---

def sample_clean(inst: RegressionInstance, n: int, rng: RngStream) -> Dataset:
    """n i.i.d. samples of the linear model. Iterating yields LabeledSample."""
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    X = rng.standard_normal((n, inst.d))
    y = X @ inst.beta
    if inst.sigma > 0:
        y = y + inst.sigma * rng.standard_normal(n)
    return Dataset(X, y)


def label_distribution(inst: RegressionInstance) -> UnivariateGaussian:
    return UnivariateGaussian(0.0, inst.beta_norm ** 2 + inst.sigma ** 2)


# --- Hypothesis pairs ---

def _require_even(d: int):
    if d < 2 or d % 2:
        raise InvalidInputError(f"d must be a positive even integer, got {d}")


def make_small_beta_pair(d: int, b: float, sigma: float, r: float = 0.0) -> HypothesisPair:
    """(r, +-b/sqrt(d-1) 1) when r > 0, else +-(b/sqrt d) 1.

    With r > 0 the first coordinate is shared and the remaining block carries
    norm b, so both regressors have norm sqrt(r^2 + b^2).
    """
    if b < 0 or r < 0 or sigma < 0:
        raise InvalidInputError("b, r and sigma must be nonnegative")
    if r > 0:
        if d < 2:
            raise InvalidInputError("the shared-coordinate variant needs d >= 2")
        block = np.full(d - 1, b / math.sqrt(d - 1))
        beta0 = np.concatenate([[r], block])
        beta1 = np.concatenate([[r], -block])
    else:
        if d < 1:
            raise InvalidInputError(f"d must be >= 1, got {d}")
        beta0 = np.full(d, b / math.sqrt(d))
        beta1 = -beta0
    return HypothesisPair(beta0, beta1, sigma, Regime.SMALL_BETA)


def make_big_eta_pair(d: int, s: float, sigma: float = 0.0) -> HypothesisPair:
    if s < 0:
        raise InvalidInputError(f"s must be >= 0, got {s}")
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    beta0 = np.full(d, float(s))
    return HypothesisPair(beta0, -beta0, sigma, Regime.BIG_ETA)


def make_interm_eta_pair(d: int, s: float, eps: float, sigma: float = 0.0) -> HypothesisPair:
    """s(+-eps on the first half, 1 on the second half)."""
    _require_even(d)
    if not 0.0 <= eps <= 1.0:
        raise InvalidInputError(f"eps must lie in [0, 1], got {eps}")
    if s < 0:
        raise InvalidInputError(f"s must be >= 0, got {s}")
    h = d // 2
    beta0 = s * np.concatenate([np.full(h, eps), np.ones(h)])
    beta1 = s * np.concatenate([np.full(h, -eps), np.ones(h)])
    return HypothesisPair(beta0, beta1, sigma, Regime.INTERM_ETA)


def interm_epsilon(eta: float, d: int, cprime: float = 0.1, C: float = 6.0) -> float:
    if not 0.0 < cprime < 0.25:
        raise InvalidInputError(f"cprime must lie in (0, 0.25), got {cprime}")
    if C <= 0:
        raise InvalidInputError(f"C must be positive, got {C}")
    threshold = 2.0 / ((1.0 - cprime) * d)
    if eta < threshold:
        raise RegimeError(f"eta={eta} is below the medium-eta threshold {threshold:.4g}")
    eps = (eta - threshold) * math.sqrt(d) / C
    if eps > 1.0:
        raise RegimeError(f"eps={eps:.4g} exceeds 1; eta={eta} is outside the medium-eta regime for C={C}")
    return eps


def make_small_eta_pair(d: int, B: float, E: float, sigma: float = 1.0) -> HypothesisPair:
    """(B/sqrt d on the first half, +-E/sqrt d on the second half)."""
    _require_even(d)
    if B < 0:
        raise InvalidInputError(f"B must be >= 0, got {B}")
    if not 0.0 <= E < 1.0:
        raise InvalidInputError(f"E must lie in [0, 1), got {E}")
    h = d // 2
    first = np.full(h, B / math.sqrt(d))
    second = np.full(h, E / math.sqrt(d))
    beta0 = np.concatenate([first, second])
    beta1 = np.concatenate([first, -second])
    return HypothesisPair(beta0, beta1, sigma, Regime.SMALL_ETA)


def small_eta_E(eta: float, d: int, sigma: float, B: float, C: float = 5.0) -> float:
    if min(eta, sigma, B) < 0 or d < 1:
        raise InvalidInputError("eta, sigma and B must be nonnegative")
    if C <= 0:
        raise InvalidInputError(f"C must be positive, got {C}")
    E = min(eta * d * sigma, eta * math.sqrt(d) * B) / (2.0 * C)
    if E >= 1.0:
        raise RegimeError(f"E={E:.4g} >= 1; eta={eta} is outside the small-eta regime")
    return E


# --- Norm targets ---

def big_eta_scale_for_norm(d: int, norm: float) -> float:
    return norm / math.sqrt(d)


def interm_scale_for_norm(d: int, eps: float, norm: float) -> float:
    """s with ||s(eps..., 1...)|| = norm, i.e. norm / sqrt(d (1 + eps^2) / 2)."""
    return norm / math.sqrt(d * (1.0 + eps * eps) / 2.0)


def small_eta_B_for_norm(E: float, norm: float) -> float:
    """B with (B^2 + E^2) / 2 = norm^2."""
    rest = 2.0 * norm * norm - E * E
    if rest < 0:
        raise RegimeError(f"norm {norm} is below the minimum E/sqrt 2 = {E / math.sqrt(2):.4g}")
    return math.sqrt(rest)


def regressor_for_norm(d: int, norm: float) -> np.ndarray:
    """The all-equal regressor of the given norm, used by benchmark grids."""
    return np.full(d, norm / math.sqrt(d))
