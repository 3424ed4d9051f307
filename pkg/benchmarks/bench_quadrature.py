"""Timing comparison of the compiled and pure-numpy phase-sum kernels.

The kernel benchmark drives ``radial_phase_sum`` (the selected backend)
and ``radial_phase_sum_numpy`` (the reference path) on synthetic axis
data shaped like the radial quadrature workload, checks both agree, and
reports best-of-N wall times.  The end-to-end benchmark times a full
oscillatory-integral evaluation; when the compiled backend is active, a
subprocess with EQUILOC_DISABLE_NUMBA=1 provides the numpy figure for
the same scenario.

Usage: python3 benchmarks/bench_quadrature.py [--nodes N] [--repeats R]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from equiloc._kernels import backend, radial_phase_sum, radial_phase_sum_numpy
from equiloc.amplitudes import parse_amplitude
from equiloc.models import LinearHamiltonianModel
from equiloc.oscillatory import brute_force_I


def kernel_workload(dims: int, nodes: int, table_size: int = 512,
                    seed: int = 0):
    rng = np.random.default_rng(seed)
    s_parts = []
    pw_parts = []
    for _ in range(dims):
        s = np.linspace(0.0, 4.0, nodes)
        phase = rng.uniform(0.0, 2.0 * np.pi, nodes)
        pw = np.exp(-s) * np.exp(1j * phase) * rng.uniform(0.5, 1.5, nodes)
        s_parts.append(s)
        pw_parts.append(pw)
    s_flat = np.concatenate(s_parts)
    pw_flat = np.concatenate(pw_parts)
    offs = np.zeros(dims + 1, dtype=np.int64)
    offs[1:] = np.cumsum([nodes] * dims)
    hi = 4.0 * dims
    table = np.exp(-np.linspace(0.0, hi, table_size) / 8.0)
    dt = hi / (table_size - 1)
    return s_flat, pw_flat, offs, table, 0.0, dt


def best_time(fn, repeats: int) -> tuple[complex, float]:
    value = fn()
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        value = fn()
        best = min(best, time.perf_counter() - start)
    return value, best


def end_to_end_seconds(repeats: int) -> float:
    model = LinearHamiltonianModel(2, 1, ((1,), (-1,)))
    amp = parse_amplitude("gauss(p) * gauss(X, 1/16)", 2, 1)
    _, seconds = best_time(lambda: brute_force_I(model, amp, 0.05,
                                                 mode="radial"), repeats)
    return seconds


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--nodes", type=int, default=48,
                        help="quadrature nodes per axis (default 48)")
    parser.add_argument("--repeats", type=int, default=3,
                        help="timing repeats, best is reported (default 3)")
    parser.add_argument("--end-to-end-only", action="store_true",
                        help=argparse.SUPPRESS)
    args = parser.parse_args(argv)

    if args.end_to_end_only:
        print(f"{end_to_end_seconds(args.repeats):.6f}")
        return 0

    active = backend()
    print(f"active backend: {active}")
    print()
    print(f"{'axes':>4} {'points':>10} {'selected (ms)':>14} "
          f"{'numpy (ms)':>12} {'ratio':>7}")
    for dims in (1, 2, 3):
        work = kernel_workload(dims, args.nodes)
        radial_phase_sum(*work)  # warm any compilation before timing
        sel_val, sel_t = best_time(lambda: radial_phase_sum(*work),
                                   args.repeats)
        ref_val, ref_t = best_time(lambda: radial_phase_sum_numpy(*work),
                                   args.repeats)
        gap = abs(sel_val - ref_val) / max(1.0, abs(ref_val))
        if gap > 1e-9:
            print(f"backend disagreement {gap:.3g} on {dims} axes",
                  file=sys.stderr)
            return 1
        ratio = ref_t / sel_t if sel_t > 0 else float("inf")
        print(f"{dims:>4} {args.nodes ** dims:>10} {1e3 * sel_t:>14.3f} "
              f"{1e3 * ref_t:>12.3f} {ratio:>7.2f}")

    print()
    own = end_to_end_seconds(args.repeats)
    print(f"end-to-end oscillatory integral ({active}): {1e3 * own:.1f} ms")
    if active == "numba":
        env = dict(os.environ, EQUILOC_DISABLE_NUMBA="1")
        proc = subprocess.run(
            [sys.executable, __file__, "--end-to-end-only",
             "--repeats", str(args.repeats)],
            env=env, capture_output=True, text=True)
        if proc.returncode == 0:
            other = float(proc.stdout.strip())
            print(f"end-to-end oscillatory integral (numpy): "
                  f"{1e3 * other:.1f} ms  "
                  f"(ratio {other / own:.2f})")
        else:
            print("numpy end-to-end run failed:", proc.stderr.strip(),
                  file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
