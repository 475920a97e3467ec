"""Compiled vs pure-Python neighbor-feature kernel, plus a short end-to-end run.

    python3 bench/bench_kernels.py [--calls N] [--slots N]
"""

import argparse
import random
import time

from tschsim import kernels
from tschsim import _kernels_py
from tschsim.agent import AgentConfig
from tschsim.agent.agent import kernel_params


def _inputs(n_sets: int, width: int, seed: int = 7):
    rng = random.Random(seed)
    out = []
    for _ in range(n_sets):
        flat = []
        for _ in range(width):
            mu = rng.uniform(200, 2000)
            last = rng.uniform(0, 1e5)
            flat += (last, mu, rng.uniform(0, 0.1 * mu * mu), last + mu)
        out.append((rng.uniform(1e5, 1.1e5), flat))
    return out


def time_kernel(fn, inputs, params, repeat: int = 3) -> float:
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        for asn, flat in inputs:
            fn(asn, flat, params)
        best = min(best, time.perf_counter() - t)
    return best / len(inputs)


def time_run(slots: int) -> float:
    from tschsim.scenario import ScenarioConfig, train_model
    cfg = ScenarioConfig(protocol="rl-asl", mode="train", traffic="high",
                         duration_ms=slots * 10.0)
    t = time.perf_counter()
    train_model(cfg)
    return time.perf_counter() - t


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--calls", type=int, default=20000)
    ap.add_argument("--slots", type=int, default=500000)
    args = ap.parse_args()
    params = kernel_params(AgentConfig())
    print(f"selected backend: {kernels.BACKEND}")
    for width in (1, 3, 8):
        inputs = _inputs(args.calls, width)
        py = time_kernel(_kernels_py.neighbor_features, inputs, params)
        line = f"neighbors={width}: python {py * 1e6:7.2f} us/call"
        if kernels.compiled_available():
            from tschsim import _kernels
            cy = time_kernel(_kernels.neighbor_features, inputs, params)
            line += f"  cython {cy * 1e6:7.2f} us/call  speedup {py / cy:5.1f}x"
        print(line)
    print(f"training run, {args.slots} slots on simple5 ({kernels.BACKEND}): "
          f"{time_run(args.slots):.2f} s")


if __name__ == "__main__":
    main()
