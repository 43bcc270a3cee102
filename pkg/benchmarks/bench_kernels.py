"""Time the compiled kernels against the numpy fallback on a default-size network.

Run from the repository root after building the extension::

    python benchmarks/bench_kernels.py --repeat 20
"""
import argparse
import timeit

import numpy as np

from jtenergy import _kernels_py
from jtenergy.coupling import received_power, scaled_demand
from jtenergy.model import PhysicalConstants, TopologySpec, generate_instance, initial_association

try:
    from jtenergy import _kernels
except ImportError:
    _kernels = None


def workload(seed, demand_bps):
    inst = generate_instance(TopologySpec(rng_seed=seed), PhysicalConstants(), demand_bps)
    assoc = initial_association(inst)
    A = received_power(inst, inst.power_max)
    kappa = np.ascontiguousarray(assoc.kappa, dtype=np.uint8)
    ds = scaled_demand(inst)
    x, *_ = _kernels_py.fixed_point(A, kappa, ds, inst.noise_power, np.zeros(inst.n_cells),
                                    1e-10, 10_000, 1e6, 0.0)
    # probe the strongest non-serving cell of UE 0
    c = int(np.argmax(np.where(kappa[:, 0] == 0, inst.gain[:, 0], -np.inf)))
    calls = {
        "load_map": lambda k: k.load_map(A, kappa, ds, inst.noise_power, x),
        "fixed_point": lambda k: k.fixed_point(A, kappa, ds, inst.noise_power,
                                               np.zeros(inst.n_cells), 1e-10, 10_000, 1e6, 0.0),
        "link_probe": lambda k: k.link_probe(A, kappa, ds, inst.noise_power, x, c, 0, 5),
    }
    return inst, calls


def best_time(fn, repeat):
    number = max(1, int(0.05 / max(timeit.timeit(fn, number=1), 1e-7)))
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--demand", type=float, default=150e3, help="per-UE demand in bit/s")
    ap.add_argument("--repeat", type=int, default=7)
    args = ap.parse_args()

    inst, calls = workload(args.seed, args.demand)
    print(f"network: {inst.n_cells} cells x {inst.n_ues} UEs, demand {args.demand:g} bit/s")
    if _kernels is None:
        print("compiled extension not built; timing the numpy fallback only")
    print(f"{'kernel':<12} {'numpy [us]':>12} {'cython [us]':>12} {'speedup':>8}")
    for name, call in calls.items():
        t_py = best_time(lambda: call(_kernels_py), args.repeat)
        if _kernels is None:
            print(f"{name:<12} {t_py * 1e6:12.1f}")
            continue
        t_cy = best_time(lambda: call(_kernels), args.repeat)
        print(f"{name:<12} {t_py * 1e6:12.1f} {t_cy * 1e6:12.1f} {t_py / t_cy:7.1f}x")


if __name__ == "__main__":
    main()
