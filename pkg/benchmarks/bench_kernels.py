"""Compare the compiled and pure-Python simulator kernels.

    python benchmarks/bench_kernels.py [--repeat 5] [--number 2000]

Reports the best per-call time for ``trilinear`` and for one control period
of ``integrate`` (all physics substeps) under each available backend, and
checks that both return identical numbers.
"""

import argparse
import timeit

import numpy as np

from gustpilot.kernels import get_backend
from gustpilot.vehicle import VehicleParams
from gustpilot.wind import GustSpec, generate_procedural


def workloads(mod, wind, params):
    args = wind.kernel_args("python" if mod.__name__.endswith("_py") else "cython")
    point = (3.3, -7.1, 8.2)
    state = [1.0, 2.0, 5.0, 0.5, -0.2, 0.1, 0.02, -0.03, 0.4, 0.0, 0.0, 0.0]
    h = params.dt_control / params.physics_substeps
    cy, sy = np.cos(0.4), np.sin(0.4)

    def tri():
        return mod.trilinear(*args, *point)

    def integ():
        return mod.integrate(state, params.hover_thrust * 1.1, 0.05, -0.04, params.mass,
                             params.gravity, params.attitude_lag, params.wind_drag, h,
                             params.physics_substeps, cy, sy, *args)
    return {"trilinear": tri, "integrate": integ}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=2000)
    args = ap.parse_args(argv)

    wind = generate_procedural(GustSpec(seed=0))
    params = VehicleParams()
    backends = {}
    for name in ("python", "cython"):
        try:
            backends[name] = workloads(get_backend(name), wind, params)
        except ImportError:
            print(f"{name}: not available")

    results = {}
    for name, work in backends.items():
        for kernel, fn in work.items():
            best = min(timeit.repeat(fn, repeat=args.repeat, number=args.number)) / args.number
            results[name, kernel] = (best, fn())
            print(f"{name:7s} {kernel:10s} {best * 1e6:9.2f} us/call")

    if len(backends) == 2:
        for kernel in ("trilinear", "integrate"):
            py, cy = results["python", kernel], results["cython", kernel]
            same = list(py[1]) == list(cy[1])
            print(f"{kernel:10s} speedup {py[0] / cy[0]:6.1f}x  identical output: {same}")


if __name__ == "__main__":
    main()
