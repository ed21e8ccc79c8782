"""Throughput of the SIC decoding kernel, compiled versus pure Python.

    python benchmarks/bench_sic.py [--blocks 2000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from satlink import _kernels
from satlink.phy import CRDSA_RULE, MUSCA_RULE, draw_placements
from satlink.rng import Rng


def batch(load, blocks, seed=1):
    slots = draw_placements(Rng(seed), load * blocks, 3, 100)
    offsets = np.arange(blocks + 1, dtype=np.int64) * load
    return slots, offsets


def best_time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--blocks", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = sorted(_kernels.BACKENDS)
    print(f"default backend: {_kernels.BACKEND}")
    print(f"{'rule':6s} {'load':>4s} " + " ".join(f"{b + ' blk/s':>16s}" for b in backends) + "   speedup")
    for name, rule in (("crdsa", CRDSA_RULE), ("musca", MUSCA_RULE)):
        for load in (30, 65, 100):
            slots, offsets = batch(load, args.blocks)
            call = (slots, offsets, 100, rule.part_credit, rule.required, 0)
            rates = {}
            results = {}
            for b in backends:
                fn = _kernels.BACKENDS[b]
                results[b] = fn(*call)
                rates[b] = args.blocks / best_time(fn, call, args.repeat)
            if len(results) > 1:
                ref = results["python"]
                assert all(np.array_equal(r[0], ref[0]) for r in results.values())
            speed = rates.get("cython", float("nan")) / rates["python"]
            cols = " ".join(f"{rates[b]:16.0f}" for b in backends)
            print(f"{name:6s} {load:4d} {cols}   {speed:7.1f}x")


if __name__ == "__main__":
    main()
