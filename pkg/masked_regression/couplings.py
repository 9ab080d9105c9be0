"""
Couplings between the sample laws of two regression hypotheses.

Every construction here is a reflection coupling applied one coordinate
at a time: draw from the first law, keep the draw for the second law with
probability min(1, q/p), otherwise mirror it through the midpoint of the
two means. For equal-variance Gaussians this is maximal, and a
disagreeing pair always has x - x' of the same sign as mu_p - mu_q.

All samplers are batched: they return m pairs at once as (m, d) arrays.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy import stats

from masked_regression.errors import InvalidInputError, RegimeError
from masked_regression.gaussian_math import (
    MultivariateGaussian,
    RngStream,
    UnivariateGaussian,
    sample_gaussian,
    sample_gaussian_batch,
)
from masked_regression.model_core import (
    HypothesisPair,
    LabeledSample,
    Regime,
    make_big_eta_pair,
    make_interm_eta_pair,
    make_small_beta_pair,
    make_small_eta_pair,
)

CHUNK_SIZE = 1000
DEGENERATE_VAR = 1e-14
MEAN_TOL = 1e-12


# --- Types ---

@dataclass(frozen=True, eq=False)
class CoupledPair:
    sample0: LabeledSample
    sample1: LabeledSample

    def __post_init__(self):
        if len(self.sample0.x) != len(self.sample1.x):
            raise InvalidInputError("coupled samples differ in dimension")


@dataclass(eq=False)
class CoupledBatch:
    """m coupled draws. switched marks draws where a pivot coupling disagreed."""

    X0: np.ndarray
    y0: np.ndarray
    X1: np.ndarray
    y1: np.ndarray
    switched: np.ndarray = None

    def __post_init__(self):
        if self.switched is None:
            self.switched = np.zeros(self.X0.shape[0], dtype=bool)

    @property
    def m(self) -> int:
        return self.X0.shape[0]

    def pair(self, k: int = 0) -> CoupledPair:
        return CoupledPair(LabeledSample(self.X0[k].copy(), float(self.y0[k])),
                           LabeledSample(self.X1[k].copy(), float(self.y1[k])))


@dataclass(frozen=True)
class SmallBeta:
    d: int
    b: float
    sigma: float
    r: float = 0.0
    regime = Regime.SMALL_BETA

    def __post_init__(self):
        self.pair()

    def pair(self) -> HypothesisPair:
        return make_small_beta_pair(self.d, self.b, self.sigma, self.r)

    def blocks(self) -> List[np.ndarray]:
        if self.r > 0:
            return [np.array([0]), np.arange(1, self.d)]
        return [np.arange(self.d)]


@dataclass(frozen=True)
class BigEta:
    d: int
    s: float
    sigma: float = 0.0
    regime = Regime.BIG_ETA

    def __post_init__(self):
        self.pair()
        if self.sigma < 0:
            raise InvalidInputError(f"sigma must be >= 0, got {self.sigma}")

    def pair(self) -> HypothesisPair:
        return make_big_eta_pair(self.d, self.s, self.sigma)

    def blocks(self) -> List[np.ndarray]:
        return [np.arange(self.d)]


@dataclass(frozen=True)
class IntermEta:
    d: int
    s: float
    eps: float
    sigma: float = 0.0
    regime = Regime.INTERM_ETA

    def __post_init__(self):
        self.pair()
        if self.sigma < 0:
            raise InvalidInputError(f"sigma must be >= 0, got {self.sigma}")

    def pair(self) -> HypothesisPair:
        return make_interm_eta_pair(self.d, self.s, self.eps, self.sigma)

    def blocks(self) -> List[np.ndarray]:
        h = self.d // 2
        return [np.arange(h), np.arange(h, self.d)]


@dataclass(frozen=True)
class SmallEta:
    d: int
    B: float
    E: float
    sigma: float = 1.0
    regime = Regime.SMALL_ETA

    def __post_init__(self):
        self.pair()

    def pair(self) -> HypothesisPair:
        return make_small_eta_pair(self.d, self.B, self.E, self.sigma)

    def blocks(self) -> List[np.ndarray]:
        h = self.d // 2
        return [np.arange(h), np.arange(h, self.d)]


CouplingSpec = Union[SmallBeta, BigEta, IntermEta, SmallEta]

SPEC_TYPES = {
    Regime.SMALL_BETA.value: SmallBeta,
    Regime.BIG_ETA.value: BigEta,
    Regime.INTERM_ETA.value: IntermEta,
    Regime.SMALL_ETA.value: SmallEta,
}


def spec_from_dict(data: dict) -> CouplingSpec:
    """Build a spec from {"regime": "big-eta", "d": 100, "s": 1.0, ...}."""
    data = dict(data)
    regime = data.pop("regime", None)
    if regime not in SPEC_TYPES:
        raise InvalidInputError(f"unknown regime {regime!r}; expected one of {sorted(SPEC_TYPES)}")
    try:
        return SPEC_TYPES[regime](**data)
    except TypeError as e:
        raise InvalidInputError(f"bad parameters for {regime}: {e}") from e


def spec_to_dict(spec: CouplingSpec) -> dict:
    out = {"regime": spec.regime.value}
    out.update(asdict(spec))
    return out


@dataclass
class DisagreementStats:
    mean_coord_disagreements: float
    label_disagreement_rate: float
    per_coordinate_rates: np.ndarray
    trials: int
    std_error: float
    switch_rate: float = 0.0

    def to_json(self) -> dict:
        return {
            "mean_coord_disagreements": self.mean_coord_disagreements,
            "label_disagreement_rate": self.label_disagreement_rate,
            "per_coordinate_rates": [float(v) for v in self.per_coordinate_rates],
            "trials": self.trials,
            "std_error": self.std_error,
            "switch_rate": self.switch_rate,
        }


# --- Reflection coupling ---

def _reflect(x, mean_p, mean_q, std, u):
    """Second coordinate of the reflection coupling, given x ~ N(mean_p, std^2)."""
    x = np.asarray(x, dtype=float)
    mean_p = np.broadcast_to(mean_p, x.shape)
    mean_q = np.broadcast_to(mean_q, x.shape)
    std = np.broadcast_to(np.asarray(std, dtype=float), x.shape)
    degenerate = std <= math.sqrt(DEGENERATE_VAR)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_ratio = ((x - mean_p) ** 2 - (x - mean_q) ** 2) / (2.0 * std * std)
        accept = u < np.exp(np.minimum(log_ratio, 0.0))
    accept = np.where(degenerate, mean_p == mean_q, accept | (mean_p == mean_q))
    mirrored = np.where(degenerate, mean_q, (mean_p + mean_q) - x)
    return np.where(accept, x, mirrored)


def maximal_coupling_univariate(p: UnivariateGaussian, q: UnivariateGaussian, rng: RngStream) -> Tuple[float, float]:
    """One draw (x, x') with x ~ p, x' ~ q and Pr[x != x'] = TV(p, q)."""
    x, xp = maximal_coupling_batch(p, q, 1, rng)
    return float(x[0]), float(xp[0])


def maximal_coupling_batch(p: UnivariateGaussian, q: UnivariateGaussian, m: int, rng: RngStream):
    if p.variance <= 0 or not np.isclose(p.variance, q.variance, rtol=1e-12, atol=0.0):
        raise InvalidInputError("maximal coupling needs equal positive variances")
    z = rng.standard_normal(m)
    u = rng.uniform(size=m)
    x = p.mean + p.std * z
    return x, _reflect(x, p.mean, q.mean, p.std, u)


# --- One-step and hybrid couplings ---

def _conditional_weights(cov: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Regression weights W (zero diagonal) and variances v of x_i given x_{-i}.

    E[x_i | x_{-i}] - mu_i = W[i] @ (x - mu); Var = v[i]. Uses the precision
    matrix when the covariance is nonsingular, pseudo-inverses otherwise.
    """
    k = cov.shape[0]
    try:
        factor = scipy.linalg.cho_factor(cov, lower=True)
        if np.min(np.diag(factor[0])) ** 2 < 1e-12 * max(1.0, np.max(np.diag(cov))):
            raise np.linalg.LinAlgError("ill-conditioned")
        precision = scipy.linalg.cho_solve(factor, np.eye(k))
        diag = np.diag(precision).copy()
        W = -precision / diag[:, None]
        np.fill_diagonal(W, 0.0)
        return W, 1.0 / diag
    except np.linalg.LinAlgError:
        pass
    W = np.zeros((k, k))
    v = np.zeros(k)
    for i in range(k):
        others = np.delete(np.arange(k), i)
        w = cov[i, others] @ scipy.linalg.pinvh(cov[np.ix_(others, others)])
        W[i, others] = w
        v[i] = max(0.0, cov[i, i] - w @ cov[others, i])
    return W, v


def _check_same_covariance(q: MultivariateGaussian, qprime: MultivariateGaussian):
    if q.dim != qprime.dim:
        raise InvalidInputError(f"dimension mismatch: {q.dim} vs {qprime.dim}")
    if not np.allclose(q.covariance, qprime.covariance, rtol=0.0, atol=1e-12):
        raise InvalidInputError("the two Gaussians must share a covariance")


def one_step_coupling(q: MultivariateGaussian, qprime: MultivariateGaussian, i: int,
                      rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    """Couple two Gaussians whose means differ only at coordinate i.

    Coordinates other than i are shared; coordinate i disagrees with
    probability TV(q, qprime).
    """
    _check_same_covariance(q, qprime)
    if not 0 <= i < q.dim:
        raise InvalidInputError(f"coordinate {i} out of range for d={q.dim}")
    others = np.delete(np.arange(q.dim), i)
    if np.max(np.abs(q.mean[others] - qprime.mean[others]), initial=0.0) > MEAN_TOL:
        raise InvalidInputError(f"means differ outside coordinate {i}")
    x = sample_gaussian(q, rng)
    u = rng.uniform()
    cov = q.covariance
    if others.size:
        w = cov[i, others] @ scipy.linalg.pinvh(cov[np.ix_(others, others)])
        var = max(0.0, cov[i, i] - w @ cov[others, i])
        base = w @ (x[others] - q.mean[others])
    else:
        var, base = cov[i, i], 0.0
    mean_p, mean_q = q.mean[i] + base, qprime.mean[i] + base
    if var <= DEGENERATE_VAR:
        x[i] = mean_p
    xp = x.copy()
    xp[i] = _reflect(x[i], mean_p, mean_q, math.sqrt(var), u)
    return x, xp


def hybrid_coupling_batch(mu: np.ndarray, muprime: np.ndarray, cov: np.ndarray, m: int,
                          rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    """m draws of the hybrid coupling of N(mu, cov) and N(muprime, cov).

    Walks the chain of Gaussians whose means switch from mu to muprime one
    coordinate at a time, coupling consecutive links with a one-step
    coupling conditioned on the current other coordinates.
    """
    mu = np.asarray(mu, dtype=float).reshape(-1)
    muprime = np.asarray(muprime, dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    k = mu.shape[0]
    if muprime.shape[0] != k or cov.shape != (k, k):
        raise InvalidInputError("mu, muprime and cov must agree in dimension")
    g = MultivariateGaussian(mu, cov)
    x0 = sample_gaussian_batch(g, m, rng)
    u = rng.uniform(size=(m, k))
    W, v = _conditional_weights(g.covariance)
    cur = x0.copy()
    chain_mean = mu.copy()
    for i in range(k):
        if mu[i] == muprime[i]:
            continue
        base = (cur - chain_mean) @ W[i]
        if v[i] <= DEGENERATE_VAR:
            cur[:, i] = mu[i] + base
            x0[:, i] = cur[:, i]
        cur[:, i] = _reflect(cur[:, i], mu[i] + base, muprime[i] + base, math.sqrt(v[i]), u[:, i])
        chain_mean[i] = muprime[i]
    return x0, cur


def hybrid_coupling(mu: np.ndarray, muprime: np.ndarray, cov: np.ndarray,
                    rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    x0, x1 = hybrid_coupling_batch(mu, muprime, cov, 1, rng)
    return x0[0], x1[0]


def _rank_one_hybrid(mu: np.ndarray, muprime: np.ndarray, a: np.ndarray,
                     rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    """Hybrid coupling for the precision I + a a^T with per-row means.

    mu and muprime are (m, k). The covariance is I - a a^T / (1 + |a|^2),
    so conditional weights and the initial draw come in closed form and
    each step costs O(m).
    """
    m, k = mu.shape
    norm2 = float(a @ a)
    z = rng.standard_normal((m, k))
    u = rng.uniform(size=(m, k))
    if norm2 > 0:
        c = a / math.sqrt(1.0 + norm2)
        cc = norm2 / (1.0 + norm2)
        gamma = (1.0 - math.sqrt(1.0 - cc)) / cc
        z = z - gamma * np.outer(z @ c, c)
    x0 = mu + z
    cur = x0.copy()
    resid = z.copy()
    s = resid @ a
    for i in range(k):
        ai = a[i]
        lam = 1.0 + ai * ai
        base = -ai * (s - ai * resid[:, i]) / lam
        new = _reflect(cur[:, i], mu[:, i] + base, muprime[:, i] + base, 1.0 / math.sqrt(lam), u[:, i])
        new_resid = new - muprime[:, i]
        s = s + ai * (new_resid - resid[:, i])
        resid[:, i] = new_resid
        cur[:, i] = new
    return x0, cur


# --- Sum-conditioned coupling ---

def sum_conditioned_coupling_batch(d: int, t: np.ndarray, tprime: np.ndarray,
                                   rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    """Row k couples N(0, I_d) given sum t[k] with N(0, I_d) given sum tprime[k].

    The first d - 1 coordinates follow N((t/d) 1, I - 1 1^T/d), whose
    precision is I + 1 1^T; the last coordinate closes the sum.
    """
    if d < 1:
        raise InvalidInputError(f"d must be >= 1, got {d}")
    t = np.asarray(t, dtype=float).reshape(-1)
    tprime = np.asarray(tprime, dtype=float).reshape(-1)
    m = t.shape[0]
    k = d - 1
    mu = np.repeat((t / d)[:, None], k, axis=1)
    muprime = np.repeat((tprime / d)[:, None], k, axis=1)
    head0, head1 = _rank_one_hybrid(mu, muprime, np.ones(k), rng)
    x0 = np.empty((m, d))
    x1 = np.empty((m, d))
    x0[:, :k] = head0
    x1[:, :k] = head1
    x0[:, k] = t - head0.sum(axis=1)
    x1[:, k] = tprime - head1.sum(axis=1)
    return x0, x1


def sum_conditioned_coupling(d: int, t: float, tprime: float, rng: RngStream) -> Tuple[np.ndarray, np.ndarray]:
    x0, x1 = sum_conditioned_coupling_batch(d, [t], [tprime], rng)
    return x0[0], x1[0]


# --- Regime pair generators ---

def _couple_given_label(block: np.ndarray, sigma: float, t: np.ndarray, rng: RngStream):
    """Covariates of beta = block and beta = -block given the shared label t."""
    V = float(block @ block) + sigma * sigma
    mu = np.outer(t / V, block)
    return _rank_one_hybrid(mu, -mu, block / sigma, rng)


def _draw_small_beta(spec: SmallBeta, m: int, rng: RngStream) -> CoupledBatch:
    if spec.sigma <= 0:
        raise RegimeError("the small-beta coupling needs sigma > 0; use the big-eta coupling instead")
    beta0 = spec.pair().beta0
    if spec.r > 0:
        block = beta0[1:]
        first = rng.standard_normal(m)
        t = rng.normal(0.0, math.sqrt(float(block @ block) + spec.sigma ** 2), size=m)
        b0, b1 = _couple_given_label(block, spec.sigma, t, rng)
        X0 = np.column_stack([first, b0])
        X1 = np.column_stack([first, b1])
        y = spec.r * first + t
    else:
        y = rng.normal(0.0, math.sqrt(float(beta0 @ beta0) + spec.sigma ** 2), size=m)
        X0, X1 = _couple_given_label(beta0, spec.sigma, y, rng)
    return CoupledBatch(X0, y, X1, y.copy())


def _shared_noise(sigma: float, m: int, rng: RngStream) -> np.ndarray:
    return sigma * rng.standard_normal(m) if sigma > 0 else np.zeros(m)


def _draw_big_eta(spec: BigEta, m: int, rng: RngStream) -> CoupledBatch:
    z = math.sqrt(spec.d) * rng.standard_normal(m)
    X0, X1 = sum_conditioned_coupling_batch(spec.d, z, -z, rng)
    y = spec.s * z + _shared_noise(spec.sigma, m, rng)
    return CoupledBatch(X0, y, X1, y.copy())


def _draw_interm_eta(spec: IntermEta, m: int, rng: RngStream) -> CoupledBatch:
    h = spec.d // 2
    eps = spec.eps
    scale = 1.0 + eps * eps
    z = math.sqrt(scale * h) * rng.standard_normal(m)
    t = rng.normal(eps * z / scale, math.sqrt(h / scale))
    tprime = t - 2.0 * eps * z / scale
    a0, a1 = sum_conditioned_coupling_batch(h, t, tprime, rng)
    b0, b1 = sum_conditioned_coupling_batch(h, z - eps * t, z + eps * tprime, rng)
    y = spec.s * z + _shared_noise(spec.sigma, m, rng)
    return CoupledBatch(np.hstack([a0, b0]), y, np.hstack([a1, b1]), y.copy())


def _draw_small_eta(spec: SmallEta, m: int, rng: RngStream) -> CoupledBatch:
    if spec.sigma <= 0 or spec.B <= 0:
        raise RegimeError("the small-eta coupling needs sigma > 0 and B > 0")
    if spec.E > spec.sigma:
        raise RegimeError(f"E/sigma = {spec.E / spec.sigma:.3g} exceeds 1")
    d, h = spec.d, spec.d // 2
    B, E, sigma = spec.B, spec.E, spec.sigma
    V = (B * B + E * E) / 2.0 + sigma * sigma
    y = rng.normal(0.0, math.sqrt(V), size=m)

    # second-half sum given the label; the two hypotheses mirror its mean
    c2 = E * math.sqrt(d) / 2.0
    std2 = math.sqrt(h - c2 * c2 / V)
    s2 = y * c2 / V + std2 * rng.standard_normal(m)
    s2p = _reflect(s2, y * c2 / V, -y * c2 / V, std2, rng.uniform(size=m))

    # first-half sum given what is left of the label
    resid0 = y - (E / math.sqrt(d)) * s2
    resid1 = y + (E / math.sqrt(d)) * s2p
    v1 = B * B / 2.0 + sigma * sigma
    c1 = B * math.sqrt(d) / 2.0
    std1 = math.sqrt(h - c1 * c1 / v1)
    s1 = resid0 * c1 / v1 + std1 * rng.standard_normal(m)
    s1p = _reflect(s1, resid0 * c1 / v1, resid1 * c1 / v1, std1, rng.uniform(size=m))

    a0, a1 = sum_conditioned_coupling_batch(h, s1, s1p, rng)
    b0, b1 = sum_conditioned_coupling_batch(h, s2, s2p, rng)
    return CoupledBatch(np.hstack([a0, b0]), y, np.hstack([a1, b1]), y.copy(), switched=s2 != s2p)


_DRAWERS = {
    SmallBeta: _draw_small_beta,
    BigEta: _draw_big_eta,
    IntermEta: _draw_interm_eta,
    SmallEta: _draw_small_eta,
}


def draw_pairs(spec: CouplingSpec, m: int, rng: RngStream) -> CoupledBatch:
    """m coupled labeled examples; side 0 follows beta0, side 1 follows beta1."""
    if m < 1:
        raise InvalidInputError(f"m must be >= 1, got {m}")
    try:
        drawer = _DRAWERS[type(spec)]
    except KeyError:
        raise InvalidInputError(f"not a coupling spec: {spec!r}") from None
    return drawer(spec, m, rng)


def draw_small_beta_pair(spec: SmallBeta, rng: RngStream) -> CoupledPair:
    return _draw_small_beta(spec, 1, rng).pair()


def draw_big_eta_pair(spec: BigEta, rng: RngStream) -> CoupledPair:
    return _draw_big_eta(spec, 1, rng).pair()


def draw_interm_eta_pair(spec: IntermEta, rng: RngStream) -> CoupledPair:
    return _draw_interm_eta(spec, 1, rng).pair()


def draw_small_eta_pair(spec: SmallEta, rng: RngStream) -> CoupledPair:
    return _draw_small_eta(spec, 1, rng).pair()


def permute_within_blocks(batch: CoupledBatch, blocks: Sequence[np.ndarray], rng: RngStream) -> CoupledBatch:
    """Apply one random permutation per row, shared by both sides, inside each block."""
    X0, X1 = batch.X0.copy(), batch.X1.copy()
    m = batch.m
    for idx in blocks:
        if idx.size < 2:
            continue
        order = rng.permuted(np.tile(np.arange(idx.size), (m, 1)), axis=1)
        cols = idx[order]
        rows = np.arange(m)[:, None]
        X0[:, idx] = X0[rows, cols]
        X1[:, idx] = X1[rows, cols]
    return CoupledBatch(X0, batch.y0, X1, batch.y1, batch.switched)


# --- Monte Carlo verification ---

def disagreement_bound(spec: CouplingSpec, constants: Optional[Dict[str, float]] = None) -> float:
    """Expected-disagreement bound of the construction (K constants from calibration)."""
    constants = constants or {}
    if isinstance(spec, SmallBeta):
        k = spec.d - 1 if spec.r > 0 else spec.d
        if spec.b == 0:
            return 0.0
        return math.sqrt(2 * k) * spec.b / math.sqrt(spec.sigma ** 2 + spec.b ** 2)
    if isinstance(spec, BigEta):
        return 3.0 * math.sqrt(spec.d)
    if isinstance(spec, IntermEta):
        return 2.0 + constants.get("K_interm_eta", 3.0) * spec.eps * math.sqrt(spec.d)
    if isinstance(spec, SmallEta):
        return constants.get("K_small_eta", 2.0) * (spec.E / spec.sigma + math.sqrt(spec.d) * spec.E / spec.B)
    raise InvalidInputError(f"not a coupling spec: {spec!r}")


def _chunks(trials: int) -> List[Tuple[int, int]]:
    return [(c, min(CHUNK_SIZE, trials - c * CHUNK_SIZE)) for c in range(math.ceil(trials / CHUNK_SIZE))]


def map_chunks(fn, trials: int, threads: int):
    chunks = _chunks(trials)
    if threads <= 1 or len(chunks) == 1:
        return [fn(c, size) for c, size in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda cs: fn(*cs), chunks))


def estimate_disagreements(spec: CouplingSpec, trials: int, rng: RngStream,
                           threads: int = 1, permute: bool = False) -> DisagreementStats:
    """Monte Carlo estimate of the expected number of disagreeing coordinates.

    Trials run in chunks of CHUNK_SIZE, chunk c on rng.child(c), so the result
    does not depend on the thread count.
    """
    if trials < 100:
        raise InvalidInputError(f"trials must be >= 100, got {trials}")
    blocks = spec.blocks()

    def run(c, size):
        stream = rng.child(c)
        batch = draw_pairs(spec, size, stream.child(0))
        if permute:
            batch = permute_within_blocks(batch, blocks, stream.child(1))
        diff = batch.X0 != batch.X1
        counts = diff.sum(axis=1)
        return (diff.sum(axis=0), int(counts.sum()), int((counts.astype(np.int64) ** 2).sum()),
                int((batch.y0 != batch.y1).sum()), int(batch.switched.sum()))

    results = map_chunks(run, trials, threads)
    per_coord = np.sum([r[0] for r in results], axis=0)
    total = sum(r[1] for r in results)
    total_sq = sum(r[2] for r in results)
    labels = sum(r[3] for r in results)
    switched = sum(r[4] for r in results)
    mean = total / trials
    var = max(0.0, (total_sq - trials * mean * mean) / (trials - 1))
    return DisagreementStats(
        mean_coord_disagreements=float(mean),
        label_disagreement_rate=labels / trials,
        per_coordinate_rates=per_coord / trials,
        trials=trials,
        std_error=math.sqrt(var / trials),
        switch_rate=switched / trials,
    )


def _ks_pvalue(values: np.ndarray, std: float) -> float:
    return float(stats.kstest(values, "norm", args=(0.0, std)).pvalue)


def marginal_report(spec: CouplingSpec, n: int, rng: RngStream, alpha: float = 0.01,
                    max_ks_columns: int = 32, threads: int = 1) -> dict:
    """Check both sides of a coupling against the linear model they should follow.

    KS tests run on up to max_ks_columns evenly spaced covariate columns, the
    label, and the residual y - beta^T x; E[y x] is compared with beta through
    per-column z-scores on every column. Thresholds are Bonferroni-corrected
    across all tests of the report.
    """
    pair = spec.pair()
    d = pair.d
    ks_cols = np.unique(np.linspace(0, d - 1, min(d, max_ks_columns)).round().astype(int))
    n_tests = 2 * (len(ks_cols) + 2)
    ks_threshold = alpha / n_tests
    z_threshold = float(stats.norm.ppf(1.0 - alpha / (2.0 * 2 * d)))

    def run(c, size):
        batch = draw_pairs(spec, size, rng.child(c))
        out = {"labels_equal": int((batch.y0 == batch.y1).sum())}
        for side, (X, y, beta) in enumerate(((batch.X0, batch.y0, pair.beta0), (batch.X1, batch.y1, pair.beta1))):
            yx = y[:, None] * X
            out[side] = (X[:, ks_cols], y, y - X @ beta, yx.sum(axis=0), (yx ** 2).sum(axis=0))
        return out

    results = map_chunks(run, n, threads)
    label_std = math.sqrt(pair.beta_norm ** 2 + pair.sigma ** 2)
    report = {"n": n, "alpha": alpha, "ks_threshold": ks_threshold, "z_threshold": z_threshold,
              "label_equality_rate": sum(r["labels_equal"] for r in results) / n}
    passed = report["label_equality_rate"] == 1.0
    for side, beta in ((0, pair.beta0), (1, pair.beta1)):
        cols = np.vstack([r[side][0] for r in results])
        y = np.concatenate([r[side][1] for r in results])
        resid = np.concatenate([r[side][2] for r in results])
        s1 = np.sum([r[side][3] for r in results], axis=0)
        s2 = np.sum([r[side][4] for r in results], axis=0)
        mean_yx = s1 / n
        sd_yx = np.sqrt(np.maximum(s2 / n - mean_yx ** 2, 1e-300))
        z = (mean_yx - beta) / (sd_yx / math.sqrt(n))
        col_p = [_ks_pvalue(cols[:, j], 1.0) for j in range(cols.shape[1])]
        label_p = _ks_pvalue(y, label_std) if label_std > 0 else 1.0
        if pair.sigma > 0:
            resid_p = _ks_pvalue(resid, pair.sigma)
            resid_ok = resid_p >= ks_threshold
        else:
            resid_p = None
            resid_ok = bool(np.all(np.abs(resid) <= 1e-8 * (1.0 + np.abs(y))))
        side_ok = (min(col_p) >= ks_threshold and label_p >= ks_threshold and resid_ok
                   and float(np.max(np.abs(z))) <= z_threshold)
        report[f"side{side}"] = {
            "ks_columns": [int(j) for j in ks_cols],
            "ks_min_pvalue": min(col_p),
            "label_ks_pvalue": label_p,
            "residual_ks_pvalue": resid_p,
            "residual_exact": resid_p is None and resid_ok,
            "yx_max_abs_z": float(np.max(np.abs(z))),
            "pass": bool(side_ok),
        }
        passed = passed and side_ok
    report["pass"] = bool(passed)
    return report


def block_uniformity_pvalues(stats_: DisagreementStats, spec: CouplingSpec) -> List[float]:
    """Chi-square p-value of equal disagreement rates inside each block."""
    pvalues = []
    counts = np.rint(stats_.per_coordinate_rates * stats_.trials)
    for idx in spec.blocks():
        block = counts[idx]
        if idx.size < 2 or block.sum() == 0:
            pvalues.append(1.0)
            continue
        pvalues.append(float(stats.chisquare(block).pvalue))
    return pvalues
