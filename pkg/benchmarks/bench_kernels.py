"""Compare the compiled and pure-Python kernels on representative inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Both backends must return identical results; the script fails otherwise.
"""

import argparse
import time

import numpy as np

from isingqec import _backend
from isingqec.annealer import AnnealerConfig, minimize
from isingqec.hamiltonian import build_hobo, hobo_to_qubo
from isingqec.lattice import build_layout
from isingqec.noise import NoiseSpec, extract_syndrome, sample


def _timed(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def bench_anneal(repeat):
    layout = build_layout(5)
    syndrome = extract_syndrome(layout, sample(layout, NoiseSpec("phenomenological", 0.02, 5), 11))
    qubo = hobo_to_qubo(build_hobo(layout, syndrome, sectors=("z",)))
    rows = []
    results = {}
    for name in ("compiled", "python"):
        config = AnnealerConfig(num_replicas=32, sweeps=200, stale_sweeps=0, seed=3, backend=name)
        secs, res = _timed(lambda: minimize(qubo, config), repeat)
        results[name] = res
        rows.append((f"anneal d=5 T=5 ({qubo.num_vars} vars, 32 replicas x 200 sweeps)", name, secs))
    a, b = results["compiled"], results["python"]
    assert a.best_energy == b.best_energy and np.array_equal(a.best_assignment, b.best_assignment)
    return rows


def bench_subset_dp(repeat):
    rng = np.random.default_rng(5)
    n = 14
    pts = rng.integers(0, 10, size=(n, 3))
    dist = np.abs(pts[:, None, :] - pts[None, :, :]).sum(axis=2).astype(np.int64)
    boundary = rng.integers(1, 6, size=n).astype(np.int64)
    rows, out = [], {}
    for name in ("compiled", "python"):
        kernels = _backend.get_kernels(name)
        secs, out[name] = _timed(lambda: kernels.subset_dp(boundary, dist), repeat)
        rows.append((f"subset DP ({n} defects)", name, secs))
    assert np.array_equal(out["compiled"], out["python"])
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if _backend.BACKEND != "compiled":
        raise SystemExit("compiled extension not built; nothing to compare")
    rows = bench_anneal(args.repeat) + bench_subset_dp(args.repeat)
    width = max(len(r[0]) for r in rows)
    for i in range(0, len(rows), 2):
        (label, _, fast), (_, _, slow) = rows[i], rows[i + 1]
        print(f"{label:<{width}}  compiled {fast * 1e3:9.2f} ms  python {slow * 1e3:9.2f} ms  x{slow / fast:7.1f}")


if __name__ == "__main__":
    main()
