"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--suite]

Each kernel runs on the same seeded inputs under both backends; the output
is one line per kernel with the best-of-N time and the speedup. ``--suite``
also times a full multimodal planning pass over the scene suite in a
subprocess per backend.
"""

import argparse
import os
import subprocess
import sys
import time
import timeit

import numpy as np

from regrasp_tamp import _pykernels

try:
    from regrasp_tamp import _ckernels
except ImportError:
    _ckernels = None


def _convex(rng, n):
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = rng.uniform(0.2, 0.5)
    c = rng.uniform(-0.6, 0.6, 2)
    return np.ascontiguousarray(np.column_stack((c[0] + r * np.cos(ang), c[1] + r * np.sin(ang))))


def _inputs(seed=0):
    rng = np.random.default_rng(seed)
    pairs = [(_convex(rng, 6), _convex(rng, 6)) for _ in range(500)]
    arm = [_convex(rng, 4) for _ in range(6)]
    scene = [_convex(rng, 4) for _ in range(12)]
    n, m = 2000, 8000
    src = np.sort(rng.integers(0, n, m))
    ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=ptr[1:])
    mdp = dict(v=rng.normal(size=n), ptr=ptr, dst=rng.integers(0, n, m).astype(np.int64),
               rho=rng.choice([0.5, 1.0], m), reward=rng.choice([-1.0, 100.0], m),
               terminal=(rng.uniform(size=n) < 0.05).astype(np.uint8))
    return pairs, arm, scene, mdp


def _cases(mod, pairs, arm, scene, mdp):
    n = len(mdp["v"])
    out, best = np.empty(n), np.empty(n, dtype=np.int64)

    def gap():
        for a, b in pairs:
            mod.polygon_gap(a, b)

    def dist():
        for a, b in pairs:
            mod.polygon_distance(a, b)

    def collide():
        for _ in range(50):
            mod.parts_collide(arm, scene, 0.0, 1e-9)

    def sweep():
        mod.bellman_sweep(mdp["v"], mdp["ptr"], mdp["dst"], mdp["rho"], mdp["reward"], mdp["terminal"],
                          0.95, -100.0, out, best)

    return {"polygon_gap x500": gap, "polygon_distance x500": dist, "parts_collide x50": collide,
            "bellman_sweep 2000/8000": sweep}


def _suite_seconds(pure: bool) -> float:
    env = dict(os.environ)
    if pure:
        env["REGRASP_TAMP_PURE"] = "1"
    else:
        env.pop("REGRASP_TAMP_PURE", None)
    code = ("import time; from regrasp_tamp.cli import bench_rows; t = time.perf_counter(); "
            "bench_rows(0, planners=('multimodal',)); print(time.perf_counter() - t)")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--suite", action="store_true", help="also time planning over the scene suite")
    args = ap.parse_args(argv)

    data = _inputs()
    py = _cases(_pykernels, *data)
    cy = _cases(_ckernels, *data) if _ckernels is not None else {}
    if _ckernels is None:
        print("compiled extension not built; timing the fallback only")
    print(f"{'kernel':<26}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for name, fn in py.items():
        t_py = min(timeit.repeat(fn, number=1, repeat=args.repeat)) * 1e3
        if name in cy:
            t_cy = min(timeit.repeat(cy[name], number=1, repeat=args.repeat)) * 1e3
            print(f"{name:<26}{t_py:>12.3f}{t_cy:>12.3f}{t_py / t_cy:>9.1f}x")
        else:
            print(f"{name:<26}{t_py:>12.3f}{'-':>12}{'-':>10}")
    if args.suite:
        t0 = time.perf_counter()
        fast = _suite_seconds(False) if _ckernels is not None else float("nan")
        slow = _suite_seconds(True)
        print(f"{'suite (multimodal)':<26}{slow * 1e3:>12.0f}{fast * 1e3:>12.0f}{slow / fast:>9.1f}x")
        print(f"# suite timing took {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
