"""Time the compiled kernels against the NumPy fallback.

    python benchmarks/bench_kernels.py [--frames 7500] [--repeat 5]

The inputs mimic one simulated player: 25 minutes at 5 frames per second,
segments of 10 frames at stride 1, and a bank with 120 active mixtures.
"""
import argparse
import timeit

import numpy as np

from hoopscore import _kernels_py

try:
    from hoopscore import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None


def cases(frames: int, rng: np.random.Generator):
    x = rng.random((frames, 4))
    means = rng.random((256, 8))
    variances = rng.uniform(1e-3, 0.1, size=(256, 8))
    active = np.sort(rng.choice(256, size=120, replace=False)).astype(np.int64)
    pooled = _kernels_py.window_halves_max(x, 10, 1)
    return {
        "window_halves_max": lambda k: k.window_halves_max(x, 10, 1),
        "window_mean": lambda k: k.window_mean(x[:, 0].copy(), 10, 1),
        "encode_batch": lambda k: k.encode_batch(pooled, means, variances, active),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--frames", type=int, default=7500)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e .` first")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<20}{'numpy ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in cases(args.frames, rng).items():
        np.testing.assert_allclose(fn(compiled), fn(_kernels_py), rtol=0, atol=1e-12)
        t_py = min(timeit.repeat(lambda: fn(_kernels_py), number=1, repeat=args.repeat)) * 1e3
        t_c = min(timeit.repeat(lambda: fn(compiled), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<20}{t_py:>12.3f}{t_c:>12.3f}{t_py / t_c:>9.1f}x")


if __name__ == "__main__":
    main()
