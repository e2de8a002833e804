#!/usr/bin/env python3
"""
Acceptance run for the gap statistics: the log-log fit of <1/delta^2>, the
shape of the n = 11 histogram and determinism across worker counts.

    python verify_scaling.py [--workers 8] [--full]
"""
import argparse
import os
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent / "q2sat"))

from experiments import fit_loglog, run_histogram, run_scaling, write_histogram_csv, write_scaling_csv  # noqa: E402

SLOPE_RANGE = (3.4, 4.4)
FULL_SLOPE_RANGE = (3.7, 4.0)
MIN_R = 0.97


def test_fit(workers, full):
    print("Testing gap scaling fit (n = 5..11, d = 0.1)...")
    records = run_scaling(range(5, 12), 0.1, None if full else 500, workers=workers, full=full)
    fit = fit_loglog(records)
    for r in records:
        print(f"  n={r.n}: <1/delta^2>={r.mean_inv_sq_gap:.6g} ({r.sample_count} kept, {r.excluded_count} excluded)")
    print(f"OK: slope={fit.slope:.4f} intercept={fit.intercept:.4f} r={fit.correlation_r:.4f}")
    lo, hi = FULL_SLOPE_RANGE if full else SLOPE_RANGE
    if not lo <= fit.slope <= hi:
        print(f"FAIL: slope {fit.slope:.4f} outside [{lo}, {hi}]")
        sys.exit(1)
    if fit.correlation_r < MIN_R:
        print(f"FAIL: r = {fit.correlation_r:.4f} below {MIN_R}")
        sys.exit(1)


def test_histogram(workers):
    print("Testing 1/delta^2 histogram shape (n = 11, 2000 samples)...")
    hist = run_histogram(11, 0.1, 2000, workers=workers)
    modal = hist.modal_bin()
    print(f"OK: mean={hist.mean:.4f} median={hist.median:.4f} modal bin=({modal.lo:.1f}, {modal.hi:.1f}]")
    if not hist.median < hist.mean:
        print("FAIL: expected median < mean for a right-skewed distribution")
        sys.exit(1)
    if not modal.hi <= hist.mean:
        print("FAIL: expected the modal bin below the mean")
        sys.exit(1)


def test_determinism(worker_counts):
    print(f"Testing byte-identical outputs for workers in {worker_counts}...")
    outputs = []
    with tempfile.TemporaryDirectory() as tmp:
        for w in worker_counts:
            scaling = os.path.join(tmp, f"scaling_{w}.csv")
            hist = os.path.join(tmp, f"hist_{w}.csv")
            write_scaling_csv(scaling, run_scaling(range(5, 9), 0.1, 50, workers=w))
            write_histogram_csv(hist, run_histogram(9, 0.1, 100, workers=w).bins)
            outputs.append((Path(scaling).read_bytes(), Path(hist).read_bytes()))
    if any(o != outputs[0] for o in outputs[1:]):
        print("FAIL: outputs differ between worker counts")
        sys.exit(1)
    print("OK: identical")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--full", action="store_true", help="full sample counts (hours)")
    args = parser.parse_args()
    test_fit(args.workers, args.full)
    test_histogram(args.workers)
    test_determinism([1, 4, 16])
    print("All scaling checks passed")
