"""Compare the compiled kernels with the plain-numpy fallback.

Each variant runs in a fresh interpreter because the switch is read at
import time. Usage: ``python benchmarks/bench_kernels.py [--K 200000] [--n 100]``.
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from sega import NUMBA_ENABLED
from sega.problems import make_synthetic
from sega.sketch import SketchDistribution
from sega.solvers import StepsizePolicy, run_sega

K, n = int(sys.argv[1]), int(sys.argv[2])
pb = make_synthetic(3, n, seed=0)
out = {"numba": NUMBA_ENABLED}
for name, dist, pol in [("coordinate", SketchDistribution.uniform(n), StepsizePolicy("simple_uniform")),
                        ("gaussian", SketchDistribution.gaussian(n), StepsizePolicy("general"))]:
    run_sega(pb, dist, pol, K=10, seed=0)  # compile / warm up
    t = time.perf_counter()
    tr = run_sega(pb, dist, pol, K=K, seed=1, record_every=K)
    out[name] = {"seconds": time.perf_counter() - t, "f_gap": float(tr.last("f_gap"))}
print(json.dumps(out))
"""


def run(flag: str, K: int, n: int) -> dict:
    env = dict(os.environ, SEGA_DISABLE_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, str(K), str(n)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--K", type=int, default=200_000)
    ap.add_argument("--n", type=int, default=100)
    args = ap.parse_args()
    fast = run("0", args.K, args.n)
    slow = run("1", args.K, args.n)
    print(f"K={args.K} n={args.n}")
    print(f"{'sketch':<12}{'numba s':>10}{'numpy s':>10}{'speedup':>9}{'rel diff':>11}")
    for name in ("coordinate", "gaussian"):
        a, b = fast[name], slow[name]
        rel = abs(a["f_gap"] - b["f_gap"]) / max(abs(b["f_gap"]), 1e-300)
        print(f"{name:<12}{a['seconds']:>10.3f}{b['seconds']:>10.3f}"
              f"{b['seconds'] / a['seconds']:>9.1f}{rel:>11.1e}")


if __name__ == "__main__":
    main()
