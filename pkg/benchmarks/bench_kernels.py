"""Compare the compiled and pure-python encode+pool kernels.

Times the per-image fused kernel on synthetic data across dictionary
sizes and prints a throughput table.  Run from the repository root:

    python benchmarks/bench_kernels.py [--images N]
"""

import argparse
import time

import numpy as np

from pdl import kernels
from pdl.encoder import patch_cell_index

PATCH_SIDE = 6
IMAGE_SIDE = 32
POOL_GRID = (2, 2)


def time_backend(impl, images, basis, offset, cell_idx, pool_max):
    impl.encode_pool_image(images[0], basis, offset, PATCH_SIDE, 1, 10.0,
                           cell_idx, 4, pool_max)  # warm up
    start = time.perf_counter()
    for img in images:
        impl.encode_pool_image(img, basis, offset, PATCH_SIDE, 1, 10.0,
                               cell_idx, 4, pool_max)
    return (time.perf_counter() - start) / len(images)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--images", type=int, default=50)
    parser.add_argument("--sizes", default="100,400,1600")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    d = 3 * PATCH_SIDE * PATCH_SIDE
    images = [np.ascontiguousarray(rng.uniform(0, 255,
                                               (3, IMAGE_SIDE, IMAGE_SIDE)))
              for _ in range(args.images)]
    cell_idx = patch_cell_index(IMAGE_SIDE, IMAGE_SIDE, PATCH_SIDE, 1,
                                POOL_GRID)

    backends = ["python"]
    try:
        kernels.get_backend("cython")
        backends.append("cython")
    except RuntimeError:
        print("compiled kernels unavailable; timing the python backend only")

    print(f"{'dict size':>10} {'pool':>5} "
          + "".join(f"{b + ' ms/img':>16}" for b in backends)
          + (f"{'speedup':>10}" if len(backends) == 2 else ""))
    for m in (int(s) for s in args.sizes.split(",")):
        basis = np.ascontiguousarray(rng.normal(size=(d, m)) / np.sqrt(d))
        offset = 0.01 * rng.normal(size=m)
        for pool_max in (False, True):
            times = [time_backend(kernels.get_backend(b), images, basis,
                                  offset, cell_idx, pool_max)
                     for b in backends]
            row = (f"{m:>10} {'max' if pool_max else 'avg':>5} "
                   + "".join(f"{t * 1e3:>16.3f}" for t in times))
            if len(times) == 2:
                row += f"{times[0] / times[1]:>10.2f}"
            print(row)

    # the two backends must agree numerically
    impls = [kernels.get_backend(b) for b in backends]
    if len(impls) == 2:
        basis = np.ascontiguousarray(rng.normal(size=(d, 64)) / np.sqrt(d))
        offset = 0.01 * rng.normal(size=64)
        out = [impl.encode_pool_image(images[0], basis, offset, PATCH_SIDE,
                                      1, 10.0, cell_idx, 4, False)
               for impl in impls]
        print(f"max |python - cython| = {np.abs(out[0] - out[1]).max():.3g}")


if __name__ == "__main__":
    main()
