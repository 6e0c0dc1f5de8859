"""Timing comparison of the compiled and reference kernel backends.

Runs each hot kernel on a batch of random games and reports the median
wall time per backend plus the speedup. Numbers are produced on whatever
machine this runs on; they are for relative comparison, not records.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from matrixgames import kernels


def _median_time(fn, repeats: int) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def make_batch(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    R = rng.integers(1, 51, size=(n, 4)).astype(float)
    C = rng.integers(1, 51, size=(n, 4)).astype(float)
    return R, C


def build_cases(n: int, seed: int):
    R, C = make_batch(n, seed)
    eta = np.full(n, 0.7)
    eta_o = np.full(n, 0.3)
    alpha = np.full(n, 0.05)
    x = np.linspace(-40.0, 40.0, n * 4)

    def case(backend):
        return {
            "logistic": lambda: backend.logistic(x),
            "cara": lambda: backend.cara(x, np.full(x.shape, 0.05)),
            "levelk_all": lambda: backend.levelk_all(R, C, eta, eta_o, alpha),
            "qre_solve": lambda: backend.qre_solve(R, C, eta, eta_o, alpha),
        }

    return case


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000, help="games per batch")
    ap.add_argument("--repeats", type=int, default=5, help="timed repeats, median reported")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "compiled" not in backends:
        print("compiled backend not built; run pip install -e . first")
    case = build_cases(args.n, args.seed)

    names = ["logistic", "cara", "levelk_all", "qre_solve"]
    results: dict[str, dict[str, float]] = {name: {} for name in names}
    for bname, backend in backends.items():
        table = case(backend)
        for name in names:
            table[name]()  # warm up, first call pays any lazy setup
            results[name][bname] = _median_time(table[name], args.repeats)

    print(f"batch of {args.n} games, median of {args.repeats} runs")
    header = f"{'kernel':<12} {'reference':>12} {'compiled':>12} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for name in names:
        ref_t = results[name].get("reference")
        com_t = results[name].get("compiled")
        if ref_t is None or com_t is None:
            continue
        print(f"{name:<12} {ref_t * 1e3:>10.2f}ms {com_t * 1e3:>10.2f}ms {ref_t / com_t:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
