"""
Budgeted adversaries.

coupling_adversary draws pairs from a coupling and spends a per-column
budget of floor(eta * n) edits to hide every disagreement; when it
succeeds the two hypotheses produce the same dataset. oblivious_erasure
and sign_flip_replacement are stress adversaries for estimator benches.
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from masked_regression.couplings import (
    CouplingSpec,
    draw_pairs,
    map_chunks,
    permute_within_blocks,
    spec_to_dict,
)
from masked_regression.errors import BudgetExceededError, InvalidInputError
from masked_regression.gaussian_math import RngStream
from masked_regression.model_core import Dataset

MODES = ("erase", "replace")


def budget_for(eta: float, n: int) -> int:
    # small epsilon keeps eta * n = 450.0000000001 from losing an edit to rounding
    return int(math.floor(eta * n + 1e-9))


@dataclass
class BudgetState:
    per_coordinate_remaining: np.ndarray
    label_remaining: int

    @classmethod
    def initial(cls, d: int, eta: float, n: int) -> "BudgetState":
        budget = budget_for(eta, n)
        return cls(np.full(d, budget, dtype=int), budget)

    def to_json(self) -> dict:
        return {
            "per_coordinate_remaining": [int(v) for v in self.per_coordinate_remaining],
            "label_remaining": int(self.label_remaining),
        }


@dataclass(frozen=True)
class AdversaryConfig:
    eta: float
    slack_c: float = 0.1
    mode: str = "erase"

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise InvalidInputError(f"eta must lie in [0, 1], got {self.eta}")
        if not 0.0 < self.slack_c < 1.0:
            raise InvalidInputError(f"slack_c must lie in (0, 1), got {self.slack_c}")
        if self.mode not in MODES:
            raise InvalidInputError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass
class PairedMaskedDataset:
    dataset0: Dataset
    dataset1: Dataset
    success: bool
    budget_final: BudgetState
    edits_per_coordinate: np.ndarray
    eta: float
    seed: Optional[int] = None
    mode: str = "erase"
    spec: Optional[dict] = None

    @property
    def n(self) -> int:
        return self.dataset0.n

    def manifest(self) -> dict:
        return {
            "success": bool(self.success),
            "eta": self.eta,
            "n": self.n,
            "seed": self.seed,
            "mode": self.mode,
            "spec": self.spec,
            "edits_per_coordinate": [int(v) for v in self.edits_per_coordinate],
            "budget_final": self.budget_final.to_json(),
        }

    def save(self, directory: Path):
        """Write dataset0.jsonl, dataset1.jsonl and manifest.json."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.dataset0.save_jsonl(directory / "dataset0.jsonl")
        self.dataset1.save_jsonl(directory / "dataset1.jsonl")
        (directory / "manifest.json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")


def _changed(before: np.ndarray, after: np.ndarray) -> np.ndarray:
    same = (before == after) | (np.isnan(before) & np.isnan(after))
    return ~same


def modified_counts(original: Dataset, corrupted: Dataset) -> np.ndarray:
    """Modified entries per covariate column, label column last."""
    x = _changed(original.X, corrupted.X).sum(axis=0)
    y = _changed(original.y, corrupted.y).sum()
    return np.concatenate([x, [y]]).astype(int)


def assert_budget(original: Dataset, corrupted: Dataset, eta: float):
    budget = budget_for(eta, original.n)
    counts = modified_counts(original, corrupted)
    worst = int(counts.max(initial=0))
    if worst > budget:
        raise BudgetExceededError(f"column {int(counts.argmax())} has {worst} edits, budget is {budget}")


def coupling_adversary(spec: CouplingSpec, n: int, cfg: AdversaryConfig, rng: RngStream,
                       threads: int = 1) -> PairedMaskedDataset:
    """Draw n coupled pairs and edit both sides wherever they disagree.

    Each sample gets its own permutation of coordinates inside every block
    of equal coefficients, shared by the two sides. Disagreements are
    edited in sample order while the column budget lasts; success means no
    disagreement was left unedited.
    """
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    blocks = spec.blocks()

    def run(c, size):
        stream = rng.child(c)
        batch = draw_pairs(spec, size, stream.child(0))
        return permute_within_blocks(batch, blocks, stream.child(1))

    batches = map_chunks(run, n, threads)
    X0 = np.vstack([b.X0 for b in batches])
    X1 = np.vstack([b.X1 for b in batches])
    y0 = np.concatenate([b.y0 for b in batches])
    y1 = np.concatenate([b.y1 for b in batches])
    clean0, clean1 = Dataset(X0.copy(), y0.copy()), Dataset(X1.copy(), y1.copy())

    budget = budget_for(cfg.eta, n)
    disagree = np.column_stack([X0 != X1, y0 != y1])
    used = np.cumsum(disagree, axis=0)
    edited = disagree & (used <= budget)
    success = not bool((disagree & ~edited).any())

    ex, ey = edited[:, :-1], edited[:, -1]
    if cfg.mode == "erase":
        X0[ex] = np.nan
        X1[ex] = np.nan
        y0[ey] = np.nan
        y1[ey] = np.nan
    else:
        X0[ex] = X1[ex]
        y0[ey] = y1[ey]

    edits = edited.sum(axis=0)
    state = BudgetState.initial(X0.shape[1], cfg.eta, n)
    state.per_coordinate_remaining -= edits[:-1]
    state.label_remaining -= int(edits[-1])
    out = PairedMaskedDataset(Dataset(X0, y0), Dataset(X1, y1), success, state, edits[:-1],
                              cfg.eta, seed=rng.seed, mode=cfg.mode, spec=spec_to_dict(spec))
    assert_budget(clean0, out.dataset0, cfg.eta)
    assert_budget(clean1, out.dataset1, cfg.eta)
    return out


def oblivious_erasure(data: Dataset, eta: float, rng: RngStream) -> Dataset:
    """Erase each entry independently with probability eta, then clip columns to the budget."""
    if not 0.0 <= eta <= 1.0:
        raise InvalidInputError(f"eta must lie in [0, 1], got {eta}")
    n, d = data.n, data.d
    budget = budget_for(eta, n)
    mask = rng.uniform(size=(n, d + 1)) < eta
    for j in range(d + 1):
        hits = np.flatnonzero(mask[:, j])
        if hits.size > budget:
            mask[rng.choice(hits, size=hits.size - budget, replace=False), j] = False
    X = data.X.copy()
    y = data.y.copy()
    X[mask[:, :d]] = np.nan
    y[mask[:, d]] = np.nan
    out = Dataset(X, y)
    assert_budget(data, out, eta)
    return out


def sign_flip_replacement(data: Dataset, eta: float, rng: Optional[RngStream] = None) -> Dataset:
    """Negate x_j on the floor(eta n) samples with the largest |y x_j|, per column.

    Deterministic; ties go to the earlier sample. rng is accepted for a
    uniform adversary signature.
    """
    if not 0.0 <= eta <= 1.0:
        raise InvalidInputError(f"eta must lie in [0, 1], got {eta}")
    budget = budget_for(eta, data.n)
    X = data.X.copy()
    if budget > 0:
        score = np.abs(data.y)[:, None] * np.abs(data.X)
        for j in range(data.d):
            top = np.argsort(-score[:, j], kind="stable")[:budget]
            X[top, j] = -X[top, j]
    out = Dataset(X, data.y.copy())
    assert_budget(data, out, eta)
    return out


ADVERSARIES = {
    "oblivious": oblivious_erasure,
    "sign-flip": sign_flip_replacement,
}
