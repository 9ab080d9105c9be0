#!/usr/bin/env python3
"""
masked-regression benchmark - timing for coupling draws and estimators.

Draws coupled batches for each reference construction, runs the
estimators on a corrupted dataset, and reports timing stats.
Usage:
    python3 tests/benchmark.py
"""

import sys
import time
import statistics
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from masked_regression.adversaries import oblivious_erasure
from masked_regression.couplings import BigEta, IntermEta, SmallBeta, SmallEta, draw_pairs
from masked_regression.estimators import run_estimator
from masked_regression.gaussian_math import RngStream
from masked_regression.model_core import RegressionInstance, regressor_for_norm, sample_clean

REFERENCE_SPECS = [
    SmallBeta(d=16, b=0.1, sigma=1.0),
    BigEta(d=100, s=1.0),
    IntermEta(d=400, s=1.0, eps=0.05),
    SmallEta(d=100, B=1.0, E=0.01, sigma=1.0),
]


def _timing(times: list) -> dict:
    ordered = sorted(times)
    return {
        "iterations": len(times),
        "mean_ms": statistics.mean(times),
        "median_ms": statistics.median(times),
        "p95_ms": ordered[int(len(ordered) * 0.95)],
        "min_ms": ordered[0],
        "max_ms": ordered[-1],
        "total_s": sum(times) / 1000,
    }


def run_coupling_benchmark(spec, batch: int, iterations: int) -> dict:
    """Time draw_pairs on batches of the given size."""
    times = []
    for i in range(iterations):
        start = time.perf_counter()
        draw_pairs(spec, batch, RngStream(0, (i,)))
        times.append((time.perf_counter() - start) * 1000)
    out = _timing(times)
    out["pairs_per_second"] = batch * iterations / out["total_s"]
    return out


def run_estimator_benchmark(name: str, data, eta: float, iterations: int) -> dict:
    times = []
    for _ in range(iterations):
        start = time.perf_counter()
        run_estimator(name, data, eta)
        times.append((time.perf_counter() - start) * 1000)
    return _timing(times)


def main():
    print("masked-regression benchmark")
    print("=" * 60)

    print("\nPhase 1: coupling draws (batches of 1000, 20 iterations)...")
    slowest = 0.0
    for spec in REFERENCE_SPECS:
        r = run_coupling_benchmark(spec, 1000, 20)
        slowest = max(slowest, r["median_ms"])
        print(f"   {spec.regime.value:<11} d={spec.d:<4} median {r['median_ms']:.2f}ms | "
              f"p95 {r['p95_ms']:.2f}ms | {r['pairs_per_second']:.0f} pairs/s")

    d, n, eta = 100, 50_000, 0.001
    print(f"\nPhase 2: estimators (d={d}, n={n}, oblivious erasure eta={eta}, 5 iterations)...")
    inst = RegressionInstance(d, regressor_for_norm(d, 1.0), 1.0)
    data = oblivious_erasure(sample_clean(inst, n, RngStream(1)), eta, RngStream(2))
    for name in ("a1", "a2", "unified", "ols"):
        r = run_estimator_benchmark(name, data, eta, 5)
        print(f"   {name:<8} median {r['median_ms']:.1f}ms | max {r['max_ms']:.1f}ms")

    print(f"\n{'=' * 60}")
    print("Benchmark complete")
    if slowest < 50:
        print("   Verdict: FAST (median batch < 50ms)")
    elif slowest < 200:
        print("   Verdict: ACCEPTABLE (median batch < 200ms)")
    else:
        print("   Verdict: SLOW (median batch >= 200ms)")
    return 0


if __name__ == "__main__":
    sys.exit(main() or 0)
