"""Compare the compiled and pure-Python kernels on the bundled feeder.

    python benchmarks/bench_kernels.py [--runs 1000] [--iters 200] [--repeat 3]
"""

import argparse
import time

import numpy as np

from orpf.gossip import _kernel_args, ensemble_schedule
from orpf.kernels import backends
from orpf.model import centralized_optimum
from orpf.network_io import load_bundled


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=1000)
    ap.add_argument("--iters", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    net = load_bundled("ieee37_like")
    system = net.system()
    model, cl = system.model, system.clusters
    q0 = net.initial_q()
    kargs = _kernel_args(model, cl, q0)
    schedule = ensemble_schedule(len(cl), cl.rho, args.runs, args.iters, seed=0)

    sc = net.scenario
    X = net.green.X
    u_pcc = sc.U_N * np.exp(1j * sc.phi)

    found = backends()
    print(f"m = {model.m}, n = {net.grid.n}, runs = {args.runs}, iters = {args.iters}")
    print(f"{'kernel':<22} {'backend':<10} {'time [s]':>10} {'speedup':>8}")
    results = {}
    for label, call in [
        ("gossip ensemble", lambda mod: mod.gossip_model_ensemble(*kargs, schedule)),
        ("z-bus fixed point x50", lambda mod: [
            mod.zbus_fixed_point(X, sc.s_balanced, sc.eta, u_pcc, sc.U_N, 1e-10, 200)
            for _ in range(50)
        ]),
    ]:
        base = None
        for name in ("python", "compiled"):
            if name not in found:
                print(f"{label:<22} {name:<10} {'missing':>10}")
                continue
            t, out = best_of(lambda: call(found[name]), args.repeat)
            results[(label, name)] = out
            base = t if base is None else base
            print(f"{label:<22} {name:<10} {t:10.4f} {base / t:7.1f}x")
    if ("gossip ensemble", "compiled") in results:
        a = results[("gossip ensemble", "python")]
        b = results[("gossip ensemble", "compiled")]
        # scaled by the starting value: late entries sit at round-off level
        rel = np.max(np.abs(a - b)) / np.max(a[:, 0])
        print(f"max difference between backends (relative to J(0) - J_opt): {rel:.2e}")
    print(f"J_opt check: {model.cost(centralized_optimum(model)):.6e}")


if __name__ == "__main__":
    main()
