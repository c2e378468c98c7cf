"""Time the compiled kernels against the numpy fallback.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Both routes are imported side by side, checked for agreement on the
benchmark inputs, then timed.  ``BRIDGEKIT_PURE=1`` is not needed here;
the script bypasses the dispatch layer and calls each implementation
directly.
"""

import time

import numpy as np

from bridgekit import _purekern
from bridgekit.network import _packed, build_drift_network, time_features
from bridgekit.transport import cost_matrix

try:
    from bridgekit import _ckern
except ImportError:
    _ckern = None


def best_of(fn, repeats: int = 5, min_time: float = 0.05) -> float:
    """Seconds per call, best of `repeats` timed batches."""
    fn()  # warm-up
    calls = 1
    while True:
        t0 = time.perf_counter()
        for _ in range(calls):
            fn()
        if time.perf_counter() - t0 > min_time / 4:
            break
        calls *= 4
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(calls):
            fn()
        best = min(best, (time.perf_counter() - t0) / calls)
    return best


def row(label: str, pure_s: float, comp_s: float | None) -> str:
    if comp_s is None:
        return f"{label:<28} {pure_s * 1e3:>10.3f} {'-':>10} {'-':>8}"
    return (f"{label:<28} {pure_s * 1e3:>10.3f} {comp_s * 1e3:>10.3f} "
            f"{pure_s / comp_s:>7.1f}x")


def bench_drift() -> list[str]:
    rng = np.random.default_rng(0)
    lines = []
    # small 1-D batches are the integrator loop's regime; the wide
    # batches show where threaded BLAS takes over
    for dim, batch in [(1, 32), (1, 128), (1, 2048), (8, 2048)]:
        net = build_drift_network(dim, seed=3, zero_final=False)
        packed = _packed(net)
        x = np.ascontiguousarray(rng.standard_normal((batch, dim)))
        femb = time_features(rng.uniform(0.0, 1.0, batch), net.n_freq)
        ref = _purekern.drift_eval(packed, x, femb)
        comp_s = None
        if _ckern is not None:
            got = _ckern.drift_eval(packed, x, femb)
            np.testing.assert_allclose(got, ref, atol=1e-12)
            comp_s = best_of(lambda: _ckern.drift_eval(packed, x, femb))
        pure_s = best_of(lambda: _purekern.drift_eval(packed, x, femb))
        lines.append(row(f"drift_eval D={dim} B={batch}", pure_s, comp_s))
    return lines


def bench_assign() -> list[str]:
    rng = np.random.default_rng(1)
    lines = []
    for n in (64, 128, 256, 512):
        a = rng.standard_normal((n, 2))
        b = rng.standard_normal((n, 2)) + [0.5, -0.5]
        cost = cost_matrix(a, b)
        total_ref, _ = _purekern.lap_assign(cost)
        comp_s = None
        if _ckern is not None:
            total, _ = _ckern.lap_assign(cost)
            np.testing.assert_allclose(total, total_ref, atol=1e-9)
            comp_s = best_of(lambda: _ckern.lap_assign(cost), repeats=3)
        pure_s = best_of(lambda: _purekern.lap_assign(cost), repeats=3)
        lines.append(row(f"lap_assign n={n}", pure_s, comp_s))
    return lines


def main() -> None:
    if _ckern is None:
        print("compiled extension not importable; timing the fallback only")
    header = f"{'kernel':<28} {'numpy ms':>10} {'ext ms':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for line in bench_drift():
        print(line)
    for line in bench_assign():
        print(line)


if __name__ == "__main__":
    main()
