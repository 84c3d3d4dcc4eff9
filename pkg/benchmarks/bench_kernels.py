"""Compiled versus numpy kernels on boundary-sample clouds of growing size.

Usage: python3 benchmarks/bench_kernels.py [--repeat 7] [--out benchmarks/results.csv]

Each row is the best-of-``repeat`` mean time per call. Both backends are fed
identical inputs and their outputs are compared before timing, so a row is
only written when the backends agree bit for bit.
"""

import argparse
import csv
import sys
import timeit
from contextlib import contextmanager

import numpy as np

from sampled_cbf import kernels
from sampled_cbf.distance import evaluate_distance
from sampled_cbf.geometry import Disc, Rectangle, RobotBody, certify_rho, merge_samples, sample_boundary_grid

SIZES = ((50, 250), (100, 1000), (200, 4000), (400, 16000))


def cloud(n_body, n_obs):
    body_shape = Disc((0.0, 0.0), 0.25)
    body = RobotBody(certify_rho(sample_boundary_grid(body_shape, n_body), body_shape))
    parts = [sample_boundary_grid(Rectangle((0.0, 0.0), (12.0, 10.0)), n_obs // 2)]
    for k in range(4):
        parts.append(sample_boundary_grid(Disc((2.0 + 2.5 * k, 5.0), 0.8), n_obs // 8))
    return body, merge_samples(parts)


@contextmanager
def backend(module):
    saved = kernels._impl
    kernels._impl = module
    try:
        yield
    finally:
        kernels._impl = saved


def cases(body, obstacles):
    pts, obs = body.offset_set.points, obstacles.points
    shift = np.array([3.1, 5.05])
    queries = np.random.default_rng(0).uniform([0, 0], [12, 10], size=(1000, 2))
    x = np.array([3.1, 5.05, 0.3])
    return {
        "min_pair": lambda impl: impl.min_pair(pts, obs, shift),
        "pairs_within": lambda impl: impl.pairs_within(pts, obs, shift, 0.6),
        "nearest_sq": lambda impl: impl.nearest_sq(queries, obs),
        "active_pairs": lambda impl: impl.active_pairs(pts, obs, shift, 1e-2, body.radius, 1e-9),
        "evaluate_distance": lambda impl: _evaluate(impl, x, body, obstacles),
    }


def _evaluate(impl, x, body, obstacles):
    with backend(impl):
        ev = evaluate_distance(x, body, obstacles, 1e-2)
    return ev.min_squared, ev.body_index, ev.obstacle_index, ev.pair_squared


def _same(a, b):
    if isinstance(a, tuple):
        return len(a) == len(b) and all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(np.asarray(a), np.asarray(b))


def time_call(fn, repeat):
    timer = timeit.Timer(fn)
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7)
    parser.add_argument("--out", default="benchmarks/results.csv")
    args = parser.parse_args(argv)

    impls = kernels.backends()
    if "cython" not in impls:
        print("compiled extension not built; only the numpy backend is available", file=sys.stderr)
    rows = []
    for n_body, n_obs in SIZES:
        body, obstacles = cloud(n_body, n_obs)
        for name, call in cases(body, obstacles).items():
            outputs = {label: call(impl) for label, impl in impls.items()}
            ref = outputs["python"]
            if not all(_same(ref, out) for out in outputs.values()):
                raise SystemExit(f"backends disagree on {name} at {n_body}x{n_obs}")
            times = {label: time_call(lambda impl=impl: call(impl), args.repeat) for label, impl in impls.items()}
            cy = times.get("cython", float("nan"))
            row = dict(kernel=name, n_body=n_body, n_obstacle=len(obstacles), python_s=times["python"], cython_s=cy, speedup=times["python"] / cy)
            rows.append(row)
            print(f"{name:<18}{n_body:>6}{len(obstacles):>8}  python {row['python_s'] * 1e6:>10.1f} us  cython {cy * 1e6:>10.1f} us  x{row['speedup']:.1f}")

    with open(args.out, "w", newline="\n") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in row.items()})
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
