"""
Batch experiments: regime table, coupling verification, forced-error
demonstration and constant calibration.

Every runner takes a seed and a thread count; work units get child
streams keyed by their index and results are reduced in index order, so
outputs do not depend on the number of threads.
"""

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import yaml

from masked_regression.adversaries import ADVERSARIES, AdversaryConfig, coupling_adversary
from masked_regression.couplings import (
    IntermEta,
    SmallEta,
    BigEta,
    CouplingSpec,
    block_uniformity_pvalues,
    disagreement_bound,
    estimate_disagreements,
    marginal_report,
    spec_from_dict,
    spec_to_dict,
)
from masked_regression.errors import InvalidInputError, MaskedRegressionError
from masked_regression.estimators import (
    MetaConfig,
    estimation_error,
    estimator_a1,
    estimator_a2,
    estimator_a3,
    run_estimator,
    unified_estimator,
)
from masked_regression.gaussian_math import RngStream
from masked_regression.model_core import (
    RegressionInstance,
    Regime,
    regressor_for_norm,
    sample_clean,
)

PRESETS_DIR = Path(__file__).parent / "presets"

CSV_HEADER = [
    "regime", "d", "eta", "beta_norm", "sigma", "n", "seed", "estimator", "adversary",
    "error_median", "error_iqr", "bound_upper", "bound_lower",
]
BRANCHES = ("A1", "A2", "A3")
INTERIOR_FACTOR = 4.0
WINNER_TOLERANCE = 2.0
UNIFIED_TOLERANCE = 5.0
FORCED_ERROR_RTOL = 1e-12


# --- Presets ---

def load_yaml(path: Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"config file not found: {path}")
    with open(path) as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as e:
            raise InvalidInputError(f"{path}: {e}") from e
    if not isinstance(data, dict):
        raise InvalidInputError(f"{path}: expected a mapping at the top level")
    return data


def dump_yaml(data: dict, path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        yaml.safe_dump(data, f, default_flow_style=False, sort_keys=True)


def load_preset(name: str) -> dict:
    return load_yaml(PRESETS_DIR / f"{name}.yaml")


def load_constants(path: Optional[Path] = None) -> Dict[str, float]:
    data = load_yaml(path) if path else load_preset("constants")
    return {k: float(v) for k, v in data.get("constants", data).items()}


def meta_config_from(constants: Dict[str, float]) -> MetaConfig:
    return MetaConfig(C=constants.get("meta_C", 3.0),
                      C_prime=constants.get("meta_C_prime", 4.0),
                      C_dprime=constants.get("meta_C_dprime", 40.0))


def _ordered_map(fn, tasks: Sequence, threads: int) -> list:
    if threads <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks))


# --- Regime predictions ---

def regime_of(d: int, eta: float) -> str:
    if eta >= 4.0 / math.sqrt(d):
        return "large-eta"
    if eta >= 0.49 / d:
        return "medium-eta"
    return "small-eta"


def predicted_winner(d: int, eta: float, beta_norm: float, sigma: float) -> str:
    """Which of A1/A2/A3 attains the best error bound for these parameters."""
    regime = regime_of(d, eta)
    if regime == "large-eta" or beta_norm < eta * math.sqrt(d) * sigma:
        return "A3"
    if regime == "small-eta" and beta_norm >= math.sqrt(d) * sigma:
        return "A1"
    return "A2"


def is_interior(d: int, eta: float, beta_norm: float, sigma: float, factor: float = INTERIOR_FACTOR) -> bool:
    """True when scaling eta or |beta| by factor or 1/factor keeps the predicted winner."""
    winner = predicted_winner(d, eta, beta_norm, sigma)
    for scale in (factor, 1.0 / factor):
        if predicted_winner(d, min(eta * scale, 1.0), beta_norm, sigma) != winner:
            return False
        if predicted_winner(d, eta, beta_norm * scale, sigma) != winner:
            return False
    return True


def upper_bound_ref(d: int, eta: float, beta_norm: float, sigma: float) -> float:
    """Best guarantee among the three algorithms, constants dropped."""
    bounds = [beta_norm, eta * math.sqrt(d) * math.hypot(beta_norm, sigma)]
    if eta * (d + 1) < 0.49:
        bounds.append(eta * d * sigma)
    return min(bounds)


def lower_bound_ref(d: int, eta: float, beta_norm: float, sigma: float) -> float:
    """Information-theoretic lower bound of the matching table cell, constants dropped."""
    regime = regime_of(d, eta)
    if regime == "large-eta" or beta_norm < eta * math.sqrt(d) * sigma:
        return beta_norm
    if beta_norm < sigma:
        return eta * math.sqrt(d) * sigma
    if regime == "small-eta" and beta_norm >= math.sqrt(d) * sigma:
        return eta * d * sigma
    return eta * math.sqrt(d) * beta_norm


def separation_lower_bound(spec: CouplingSpec, eta: float) -> float:
    """Order of the error every estimator is forced to make under this construction."""
    pair = spec.pair()
    norm, d, sigma = pair.beta_norm, pair.d, pair.sigma
    if pair.regime is Regime.SMALL_BETA:
        return min(norm, eta * math.sqrt(d) * sigma)
    if pair.regime is Regime.BIG_ETA:
        return norm
    if pair.regime is Regime.INTERM_ETA:
        return eta * math.sqrt(d) * norm
    return min(eta * d * sigma, eta * math.sqrt(d) * norm)


# --- Regime table ---

@dataclass
class ExperimentConfig:
    d_values: List[int]
    etas: List[float]
    ratios: List[float]
    n: int = 200_000
    trials: int = 5
    seed: int = 0
    sigma: float = 1.0
    threads: int = 1
    adversaries: Tuple[str, ...] = ("oblivious", "sign-flip")
    meta: MetaConfig = field(default_factory=MetaConfig)
    output: Optional[Path] = None

    def __post_init__(self):
        if not self.d_values or not self.etas or not self.ratios:
            raise InvalidInputError("grid needs at least one d, eta and ratio")
        if any(d < 2 for d in self.d_values):
            raise InvalidInputError("every d must be >= 2")
        if any(not 0.0 < e <= 1.0 for e in self.etas):
            raise InvalidInputError("every eta must lie in (0, 1]")
        if any(r < 0 for r in self.ratios):
            raise InvalidInputError("ratios |beta|/sigma must be >= 0")
        if self.n < 1 or self.trials < 1:
            raise InvalidInputError("n and trials must be >= 1")
        if self.sigma <= 0:
            raise InvalidInputError("sigma must be positive")
        unknown = [a for a in self.adversaries if a not in ADVERSARIES]
        if unknown:
            raise InvalidInputError(f"unknown adversaries {unknown}; expected {sorted(ADVERSARIES)}")

    @classmethod
    def from_dict(cls, data: dict, **overrides) -> "ExperimentConfig":
        data = dict(data.get("grid", data))
        data.update({k: v for k, v in overrides.items() if v is not None})
        if "adversaries" in data:
            data["adversaries"] = tuple(data["adversaries"])
        if "output" in data and data["output"] is not None:
            data["output"] = Path(data["output"])
        try:
            return cls(**data)
        except TypeError as e:
            raise InvalidInputError(f"bad grid config: {e}") from e

    def cells(self) -> List[Tuple[int, float, float]]:
        """(d, eta, beta_norm) in grid order."""
        return [(d, eta, ratio * self.sigma) for d in self.d_values for eta in self.etas for ratio in self.ratios]


@dataclass
class ResultRecord:
    regime: str
    d: int
    eta: float
    beta_norm: float
    sigma: float
    n: int
    seed: int
    estimator: str
    adversary: str
    error_median: float
    error_iqr: float
    bound_upper: float
    bound_lower: float

    def to_row(self) -> List[str]:
        return [_csv_value(getattr(self, k)) for k in CSV_HEADER]


@dataclass
class CellCheck:
    d: int
    eta: float
    beta_norm: float
    regime: str
    predicted: str
    empirical_best: str
    interior: bool
    winner_ok: bool
    unified_ok: bool
    worst_case_errors: Dict[str, float]

    @property
    def passed(self) -> bool:
        return self.unified_ok and (self.winner_ok or not self.interior)

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        out["worst_case_errors"] = {k: _json_float(v) for k, v in self.worst_case_errors.items()}
        out["passed"] = self.passed
        return out


@dataclass
class RegimeTableReport:
    records: List[ResultRecord]
    cells: List[CellCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cells)

    def to_json(self) -> dict:
        return {"cells": [c.to_json() for c in self.cells], "pass": self.passed}


def _csv_value(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _json_float(v: float):
    return None if v is None or math.isnan(v) else float(v)


def write_csv(records: Sequence[ResultRecord], path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(r.to_row())


def _estimator_errors(data, eta: float, beta: np.ndarray, meta: MetaConfig) -> Dict[str, float]:
    """Errors of A1/A2/A3/unified on one dataset; NaN where an estimator does not apply."""
    errors = {}
    try:
        a1 = estimator_a1(data, eta)
        errors["A1"] = estimation_error(a1.beta_hat, beta)
    except MaskedRegressionError:
        a1 = None
        errors["A1"] = math.nan
    a2 = estimator_a2(data, eta, trim=meta.trim_fraction)
    errors["A2"] = estimation_error(a2.beta_hat, beta)
    errors["A3"] = estimation_error(estimator_a3(data.d).beta_hat, beta)
    try:
        unified = unified_estimator(data, eta, meta, a1=a1, a2=a2)
        errors["unified"] = estimation_error(unified.beta_hat, beta)
    except MaskedRegressionError:
        errors["unified"] = math.nan
    return errors


def _nan_stats(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if np.all(np.isnan(arr)):
        return math.nan, math.nan
    q1, med, q3 = np.nanpercentile(arr, [25, 50, 75])
    return float(med), float(q3 - q1)


def run_regime_table(cfg: ExperimentConfig) -> RegimeTableReport:
    """Run every estimator against every adversary on every grid cell.

    An estimator's cell error is its median over trials; its worst-case
    error is the largest median across adversaries. The empirical winner
    is the branch with the smallest worst-case error.
    """
    cells = cfg.cells()
    tasks = [(ci, trial) for ci in range(len(cells)) for trial in range(cfg.trials)]

    def run(task):
        ci, trial = task
        d, eta, norm = cells[ci]
        rng = RngStream(cfg.seed, (ci, trial))
        inst = RegressionInstance(d, regressor_for_norm(d, norm), cfg.sigma)
        clean = sample_clean(inst, cfg.n, rng.child(0))
        return {name: _estimator_errors(ADVERSARIES[name](clean, eta, rng.child(1 + k)), eta, inst.beta, cfg.meta)
                for k, name in enumerate(cfg.adversaries)}

    results = _ordered_map(run, tasks, cfg.threads)
    records, checks = [], []
    for ci, (d, eta, norm) in enumerate(cells):
        trial_results = results[ci * cfg.trials:(ci + 1) * cfg.trials]
        regime = regime_of(d, eta)
        upper = upper_bound_ref(d, eta, norm, cfg.sigma)
        lower = lower_bound_ref(d, eta, norm, cfg.sigma)
        worst: Dict[str, float] = {}
        for est in (*BRANCHES, "unified"):
            medians = []
            for adv in cfg.adversaries:
                med, iqr = _nan_stats([t[adv][est] for t in trial_results])
                medians.append(med)
                records.append(ResultRecord(regime, d, eta, norm, cfg.sigma, cfg.n, cfg.seed,
                                            est, adv, med, iqr, upper, lower))
            worst[est] = math.nan if all(math.isnan(m) for m in medians) else float(np.nanmax(medians))
        branch_errors = {b: worst[b] for b in BRANCHES if not math.isnan(worst[b])}
        best = min(branch_errors, key=lambda b: (branch_errors[b], b))
        best_err = branch_errors[best]
        predicted = predicted_winner(d, eta, norm, cfg.sigma)
        pred_err = branch_errors.get(predicted, math.inf)
        checks.append(CellCheck(
            d=d, eta=eta, beta_norm=norm, regime=regime, predicted=predicted, empirical_best=best,
            interior=is_interior(d, eta, norm, cfg.sigma),
            winner_ok=bool(pred_err <= WINNER_TOLERANCE * best_err),
            unified_ok=bool(worst["unified"] <= UNIFIED_TOLERANCE * best_err),
            worst_case_errors=worst,
        ))
    return RegimeTableReport(records, checks)


# --- Coupling verification ---

def parse_spec_entry(entry: dict) -> Tuple[CouplingSpec, Optional[float], float]:
    """A spec mapping plus optional `eta` (budget to fit) and `slack_c`."""
    entry = dict(entry)
    eta = entry.pop("eta", None)
    slack = float(entry.pop("slack_c", 0.1))
    return spec_from_dict(entry), (None if eta is None else float(eta)), slack


def verify_coupling(spec: CouplingSpec, trials: int, rng: RngStream, constants: Dict[str, float],
                    marginal_n: int = 0, eta: Optional[float] = None, slack_c: float = 0.1,
                    threads: int = 1) -> dict:
    """Disagreement budget, shared labels, block exchangeability and (optionally) marginals."""
    stats_ = estimate_disagreements(spec, trials, rng.child(0), threads=threads)
    permuted = estimate_disagreements(spec, trials, rng.child(1), threads=threads, permute=True)
    bound = disagreement_bound(spec, constants)
    slack = 3.0 * stats_.std_error
    checks = {
        "budget": stats_.mean_coord_disagreements <= bound + slack,
        "labels_shared": stats_.label_disagreement_rate == 0.0,
    }
    pvalues = block_uniformity_pvalues(permuted, spec)
    checks["block_uniformity"] = min(pvalues) >= 0.01 / len(pvalues)
    if isinstance(spec, SmallEta):
        p = stats_.switch_rate
        checks["switch_rate"] = p <= spec.E / spec.sigma + 3.0 * math.sqrt(max(p * (1 - p), 0.0) / trials)
    if eta is not None:
        checks["premise"] = stats_.mean_coord_disagreements + slack <= eta * spec.d * (1.0 - slack_c)
    report = {
        "spec": spec_to_dict(spec),
        "stats": stats_.to_json(),
        "bound": bound,
        "block_uniformity_pvalues": pvalues,
        "checks": checks,
    }
    if eta is not None:
        report["eta"] = eta
        report["slack_c"] = slack_c
    if marginal_n > 0:
        report["marginals"] = marginal_report(spec, marginal_n, rng.child(2), threads=threads)
        checks["marginals"] = report["marginals"]["pass"]
    report["pass"] = all(checks.values())
    return report


def run_coupling_verification(entries: Sequence[dict], trials: int, seed: int, constants: Dict[str, float],
                              marginal_n: int = 0, threads: int = 1) -> dict:
    results = []
    for i, entry in enumerate(entries):
        spec, eta, slack_c = parse_spec_entry(entry)
        results.append(verify_coupling(spec, trials, RngStream(seed, (i,)), constants,
                                       marginal_n=marginal_n, eta=eta, slack_c=slack_c, threads=threads))
    return {
        "seed": seed,
        "trials": trials,
        "marginal_n": marginal_n,
        "results": results,
        "pass": all(r["pass"] for r in results),
    }


# --- Forced error ---

def run_forced_error_demo(spec: CouplingSpec, n: int, eta: float, estimators: Sequence[str], runs: int,
                          seed: int, mode: str = "erase", meta: Optional[MetaConfig] = None,
                          min_success_rate: float = 0.0, threads: int = 1) -> dict:
    """Run the coupling adversary; on success every estimator sees one dataset
    that is valid under both hypotheses, so its worse error is at least half
    the separation. Checked exactly on every successful run."""
    if runs < 1:
        raise InvalidInputError(f"runs must be >= 1, got {runs}")
    meta = meta or MetaConfig()
    pair = spec.pair()
    half = pair.separation / 2.0
    cfg = AdversaryConfig(eta, mode=mode)
    per_est = {name: {"min_forced_error": None, "violations": 0, "not_applicable": 0} for name in estimators}
    successes = 0
    identical_violations = 0
    missing_on_success = 0
    max_edits = 0
    for r in range(runs):
        paired = coupling_adversary(spec, n, cfg, RngStream(seed, (r,)), threads=threads)
        max_edits = max(max_edits, int(paired.edits_per_coordinate.max(initial=0)))
        if not paired.success:
            continue
        successes += 1
        if not paired.dataset0.identical_to(paired.dataset1):
            identical_violations += 1
        data = paired.dataset0
        missing_on_success += int(np.isnan(data.X).sum() + np.isnan(data.y).sum())
        for name in estimators:
            entry = per_est[name]
            try:
                out = run_estimator(name, data, eta, meta)
            except MaskedRegressionError:
                entry["not_applicable"] += 1
                continue
            forced = max(estimation_error(out.beta_hat, pair.beta0), estimation_error(out.beta_hat, pair.beta1))
            # the zero vector sits exactly at half the separation for symmetric pairs
            if forced < half * (1.0 - FORCED_ERROR_RTOL):
                entry["violations"] += 1
            if entry["min_forced_error"] is None or forced < entry["min_forced_error"]:
                entry["min_forced_error"] = forced
    success_rate = successes / runs
    passed = (identical_violations == 0 and success_rate >= min_success_rate
              and all(e["violations"] == 0 for e in per_est.values()))
    if mode == "replace":
        passed = passed and missing_on_success == 0
    return {
        "spec": spec_to_dict(spec),
        "eta": eta,
        "n": n,
        "mode": mode,
        "seed": seed,
        "runs": runs,
        "successes": successes,
        "success_rate": success_rate,
        "budget": int(math.floor(eta * n + 1e-9)),
        "max_edits_per_coordinate": max_edits,
        "separation": pair.separation,
        "half_separation": half,
        "predicted_lower_bound": separation_lower_bound(spec, eta),
        "missing_entries_on_success": missing_on_success,
        "identical_violations": identical_violations,
        "estimators": per_est,
        "pass": bool(passed),
    }


# --- Calibration ---

def _median_error(inst: RegressionInstance, n: int, eta: float, adversary: str, estimator: str,
                  trials: int, rng: RngStream, threads: int) -> float:
    def run(trial):
        stream = rng.child(trial)
        clean = sample_clean(inst, n, stream.child(0))
        data = ADVERSARIES[adversary](clean, eta, stream.child(1))
        return estimation_error(run_estimator(estimator, data, eta).beta_hat, inst.beta)

    return float(np.median(_ordered_map(run, list(range(trials)), threads)))


def calibrate_constants(seed: int, frozen: Dict[str, float], trials: int = 10_000, est_trials: int = 5,
                        est_n: int = 100_000, threads: int = 1) -> dict:
    """Measure the unspecified constants on reference cells and compare with the frozen ones."""
    rng = RngStream(seed)
    measured: Dict[str, float] = {}
    checks: Dict[str, bool] = {}

    big = estimate_disagreements(BigEta(d=100, s=1.0, sigma=0.0), trials, rng.child(0), threads=threads)
    measured["big_eta_ratio"] = big.mean_coord_disagreements / (3.0 * math.sqrt(100))
    checks["big_eta_within_bound"] = measured["big_eta_ratio"] <= 1.0

    k_values = []
    for i, d in enumerate((100, 400)):
        eps = 0.05
        st = estimate_disagreements(IntermEta(d=d, s=1.0, eps=eps, sigma=0.0), trials, rng.child(1 + i), threads=threads)
        k = (st.mean_coord_disagreements - 2.0) / (eps * math.sqrt(d))
        measured[f"K_interm_eta_d{d}"] = k
        k_values.append(k)
    measured["K_interm_eta"] = max(k_values)
    checks["K_interm_eta_stable"] = abs(k_values[0] - k_values[1]) <= 0.25 * max(abs(k_values[1]), 1e-12)
    checks["K_interm_eta_frozen"] = measured["K_interm_eta"] <= frozen.get("K_interm_eta", math.inf)

    spec = SmallEta(d=100, B=1.0, E=0.01, sigma=1.0)
    st = estimate_disagreements(spec, trials, rng.child(3), threads=threads)
    measured["K_small_eta"] = st.mean_coord_disagreements / (spec.E / spec.sigma + math.sqrt(spec.d) * spec.E / spec.B)
    measured["small_eta_switch_rate"] = st.switch_rate
    checks["K_small_eta_frozen"] = measured["K_small_eta"] <= frozen.get("K_small_eta", math.inf)

    d, eta = 50, 0.02
    inst = RegressionInstance(d, regressor_for_norm(d, 1.0), 1.0)
    err = _median_error(inst, est_n, eta, "sign-flip", "a2", est_trials, rng.child(4), threads)
    measured["A2_constant"] = err / (eta * math.sqrt(d) * math.hypot(1.0, 1.0))
    checks["A2_constant_frozen"] = measured["A2_constant"] <= frozen.get("A2_constant", math.inf)

    d, eta = 20, 0.002
    inst = RegressionInstance(d, regressor_for_norm(d, 100.0), 1.0)
    err = _median_error(inst, est_n, eta, "oblivious", "a1", est_trials, rng.child(5), threads)
    measured["A1_constant"] = err / (eta * d * 1.0)
    checks["A1_constant_frozen"] = measured["A1_constant"] <= frozen.get("A1_constant", math.inf)

    a3_err = estimation_error(estimator_a3(d).beta_hat, inst.beta)
    checks["A3_exact"] = a3_err == float(np.linalg.norm(inst.beta))

    return {
        "seed": seed,
        "trials": trials,
        "measured": measured,
        "frozen": dict(sorted(frozen.items())),
        "proposed": propose_constants(measured, frozen),
        "checks": checks,
        "pass": all(checks.values()),
    }


def propose_constants(measured: Dict[str, float], frozen: Dict[str, float]) -> Dict[str, float]:
    """Frozen constants, raised to 1.5x the measurement (one decimal, rounded up) where exceeded."""
    proposed = dict(frozen)
    for key in ("K_interm_eta", "K_small_eta", "A1_constant", "A2_constant"):
        if key in measured:
            needed = math.ceil(15.0 * measured[key]) / 10.0
            proposed[key] = max(frozen.get(key, 0.0), needed)
    return dict(sorted(proposed.items()))
