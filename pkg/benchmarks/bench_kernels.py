"""Time the numba kernels against the numpy fallbacks.

    python benchmarks/bench_kernels.py --trials 2000 --repeat 3

Compilation is excluded: every kernel is called once before timing.
"""

import argparse
import time

import numpy as np

from scghg import climate as C
from scghg.damages import macro as M
from scghg.feedbacks import feedback_arrays
from scghg.scenario import synth_ensemble


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    ens = synth_ensemble(args.trials, 0)
    params = C.sample_param_ensemble(args.trials, 0)
    em = C.with_history(C.Emissions(ens.years, ens.co2, ens.ch4, ens.n2o), C.ClimateConfig())
    fb = feedback_arrays(0, np.arange(args.trials))
    temps = 13.62 + np.linspace(0, 4, em.years.size)[None, :] + np.random.default_rng(0).normal(
        0, 0.3, (args.trials, em.years.size))
    start = int(np.flatnonzero(em.years == ens.years[0])[0])

    cases = {"climate+feedbacks": lambda b: C.simulate(em, params, feedbacks=fb, backend=b)}
    for study in ("Harding2023", "Casey2023", "Kahn2021"):
        spec = M.load_spec(study)
        cases[f"macro:{study}"] = lambda b, s=spec: M.log_gap(s, temps, start, ens.gdp, b)

    print(f"{'kernel':<22}{'numpy s':>10}{'numba s':>10}{'speedup':>9}  max|diff|")
    for name, fn in cases.items():
        t_np = best_of(lambda: fn("numpy"), args.repeat)
        t_nb = best_of(lambda: fn("numba"), args.repeat)
        a, b = fn("numpy"), fn("numba")
        a = a.gmst if hasattr(a, "gmst") else a
        b = b.gmst if hasattr(b, "gmst") else b
        print(f"{name:<22}{t_np:>10.4f}{t_nb:>10.4f}{t_np / t_nb:>8.1f}x  {np.max(np.abs(a - b)):.1e}")


if __name__ == "__main__":
    main()
