"""Stepping throughput on a large 2-D torus.

    python benchmarks/bench_step.py --shape 512x512 --density 0.3 --steps 50
"""
import argparse
import time

from bmlnet.dynamics import Stepper, SwitchPolicy
from bmlnet.lattice import LatticeShape, random_configuration


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--shape", default="512x512")
    p.add_argument("--density", type=float, default=0.3)
    p.add_argument("--q", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    shape = LatticeShape.parse(args.shape)
    config = random_configuration(shape, int(args.density * shape.cell_count), seed=args.seed)
    stepper = Stepper(config, SwitchPolicy(args.q), args.seed)
    stepper.advance()  # warm the lookup tables
    start = time.perf_counter()
    for _ in range(args.steps):
        stepper.advance()
    elapsed = time.perf_counter() - start
    rate = shape.cell_count * args.steps / elapsed
    print(f"{shape} m={config.m} q={args.q:g}: {args.steps} steps in {elapsed:.3f}s, "
          f"{rate / 1e6:.1f}M cell-updates/s")


if __name__ == "__main__":
    main()
