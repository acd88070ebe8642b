"""Time the numba kernels against the pure-numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_backends.py

The first numba call pays JIT compilation, so each kernel is warmed up
before timing. End-to-end numbers use the default detector configuration.
"""

import time

import numpy as np

from squeezekit import epr, filters, ifo, kernels


def bench(fn, repeats=20):
    fn()  # warmup (JIT compile on the numba path)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def main():
    rng = np.random.default_rng(7)
    x = np.sort(rng.uniform(0.0, 10.0, 200_000))
    y = np.sin(x) * np.exp(-0.1 * x)
    rows = (rng.standard_normal((4000, 40)) + 1j * rng.standard_normal((4000, 40)))

    cfg = ifo.IfoConfig()
    solution, _ = filters.synthesize_filters(cfg)
    params = epr.select_epr_params(cfg, epr.solve_epr_params(cfg, solution))
    grid = filters.default_grid(points=400)

    cases = {
        "cumtrapz (200k points)": lambda: kernels.cumtrapz(y, x),
        "row_power (4000x40)": lambda: kernels.row_power(rows),
        "epr sensitivity curve (400 freqs)": lambda: epr.sensitivity_curve(
            cfg, "epr", grid, params=params
        ),
    }

    results = {}
    for backend in ("numpy", "numba"):
        try:
            kernels.set_backend(backend)
        except Exception as exc:
            print(f"{backend}: unavailable ({exc})")
            continue
        for name, fn in cases.items():
            results[(backend, name)] = bench(fn)

    print(f"{'case':<36} {'numpy [ms]':>12} {'numba [ms]':>12} {'speedup':>9}")
    for name in cases:
        t_np = results.get(("numpy", name))
        t_nb = results.get(("numba", name))
        if t_np is None or t_nb is None:
            continue
        print(f"{name:<36} {t_np * 1e3:>12.3f} {t_nb * 1e3:>12.3f} {t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
