"""Time the compiled and numpy path kernels on the shipped configuration.

    python bench/benchmark.py [--paths 2000] [--repeat 3]
"""
import argparse
import time

import numpy as np

from heatlq import _backend, load_spec, default_config_path
from heatlq.closedloop import full_plant_setup, full_batch, spectral_batch
from heatlq.riccati import solve_spec


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=2000)
    ap.add_argument("--full-paths", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    spec = load_spec(default_config_path())
    sol = solve_spec(spec)
    spec8 = spec.replace(disc__N=8)
    sol8 = solve_spec(spec8)
    setup = full_plant_setup(spec8, sol8.basis)
    idx = list(range(args.paths))
    idx_full = list(range(args.full_paths))

    backends = _backend.available()
    results = {}
    for name in backends:
        t_em, em = best_of(lambda: spectral_batch(sol.ops, sol.sched, sol.Z0, spec.disc.sim_dt,
                                                  spec.disc.seed, idx, backend=name), args.repeat)
        t_full, full = best_of(lambda: full_batch(spec8, sol8.sched, sol8.basis, sol8.u0,
                                                  spec.disc.seed, idx_full, setup=setup,
                                                  backend=name), args.repeat)
        results[name] = (t_em, t_full, em, full)

    print(f"{'backend':<8} {'spectral EM':>14} {'full plant':>14}")
    print(f"{'':<8} {f'{args.paths} paths':>14} {f'{args.full_paths} paths':>14}")
    for name, (t_em, t_full, *_) in results.items():
        print(f"{name:<8} {t_em:>13.3f}s {t_full:>13.3f}s")
    if len(results) == 2:
        c, p = results["cython"], results["python"]
        print(f"speedup  {p[0] / c[0]:>13.1f}x {p[1] / c[1]:>13.1f}x")
        dev_em = max(np.abs(a - b).max() for a, b in zip(c[2], p[2]))
        dev_full = max(np.abs(a - b).max() for a, b in zip(c[3], p[3]))
        print(f"max |cython - python|: spectral {dev_em:.2e}, full plant {dev_full:.2e}")


if __name__ == "__main__":
    main()
