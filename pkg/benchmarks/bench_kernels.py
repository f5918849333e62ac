"""Time the compiled and pure-Python search kernels on identical inputs.

Usage::

    python3 benchmarks/bench_kernels.py [--channels 600] [--repeat 5]

Prints one line per (kernel, backend) with the best wall time and the
speed-up of the compiled backend, and checks that both give the same result.
"""

import argparse
import time

import numpy as np

from mpa_codebook import kernels
from mpa_codebook.channel import ArrayConfig, ScenarioParams, line_panel_order
from mpa_codebook.codebook import BitAllocation, CodebookSpec
from mpa_codebook.evaluate import draw_channels
from mpa_codebook.quantizer import lp_search


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--channels", type=int, default=600)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    config = ArrayConfig()
    H = draw_channels(config, ScenarioParams(), -(-args.channels // 3), args.seed)
    H = H.reshape(-1, config.n_ports)[:args.channels][:, line_panel_order(config)]
    rng = np.random.default_rng(args.seed)
    proj = rng.standard_normal((args.channels, 32, 4)) + 1j * rng.standard_normal(
        (args.channels, 32, 4))
    alphabet = CodebookSpec.for_array("lp", config).build().slp.alphabet

    cases = {
        "greedy_search (32 hypotheses x 4 slots x 32 coefficients)":
            lambda mod: mod.greedy_search(proj, alphabet, kernels.TIE_RTOL),
        "phase_search (3 panels x 8 phases)":
            lambda mod: mod.phase_search(proj[:, 0, 0], proj[:, 1, :3],
                                         np.exp(2j * np.pi * np.arange(8) / 8),
                                         kernels.TIE_RTOL),
    }
    print(f"backends available: {sorted(kernels.BACKENDS)}; channels: {args.channels}")
    for name, fn in cases.items():
        results = {}
        for backend, mod in sorted(kernels.BACKENDS.items()):
            results[backend] = best_time(lambda: fn(mod), args.repeat)
            print(f"{name:<60} {backend:>9}: {1e3 * results[backend][0]:9.2f} ms")
        if len(results) == 2:
            (t_c, out_c), (t_p, out_p) = results["compiled"], results["python"]
            same = all(np.allclose(a, b) for a, b in zip(out_c, out_p))
            print(f"{'':<60} speed-up: {t_p / t_c:6.1f}x  identical={same}")

    cb = CodebookSpec.for_array("lp", config, BitAllocation(b_h=2)).build()
    for backend in sorted(kernels.BACKENDS):
        kernels.use_backend(backend)
        t, _ = best_time(lambda: lp_search(cb, H), args.repeat)
        print(f"{'end-to-end line-panel quantization (B=40)':<60} {backend:>9}: "
              f"{1e3 * t:9.2f} ms ({1e6 * t / len(H):.1f} us/channel)")


if __name__ == "__main__":
    main()
