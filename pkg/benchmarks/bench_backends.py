"""Compare the numba and pure-Python backends on the hot paths.

Each backend runs in its own interpreter because the backend is fixed at
import time by MELNIKOV_NUMBA.  Run from the repository root:

    python3 benchmarks/bench_backends.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, math, time
t0 = time.perf_counter()
from melnikov_sign import BACKEND, Parameters, parse, displacement, melnikov_values, delta3_tilde
import numpy as np
P = Parameters(1.0, 1.0, 2 * math.pi)
f = parse("sin(t) + 0.5*x*y")
# warm-up (compilation or cache load for numba)
displacement(0.3, 0.9, 1e-3, P, f)
melnikov_values([0.1], P, f)
t_warm = time.perf_counter() - t0

def timed(fn, repeat):
    best = math.inf
    for _ in range(repeat):
        t = time.perf_counter(); fn(); best = min(best, time.perf_counter() - t)
    return best

repeat = REPEAT
res = {
    "backend": BACKEND,
    "startup_s": t_warm,
    "displacement_x200_s": timed(lambda: [displacement(0.01 * k, 0.9, 1e-3, P, f) for k in range(200)], repeat),
    "melnikov_grid256_s": timed(lambda: melnikov_values(np.linspace(0, P.sigma, 256, endpoint=False), P, f), repeat),
    "delta3_tilde_x8_s": timed(lambda: [delta3_tilde(k * P.sigma / 8, 1e-3, P, f) for k in range(8)], repeat),
    "checksum": displacement(0.3, 0.9, 1e-3, P, f).delta3,
}
print(json.dumps(res))
"""


def run(backend_flag: str, repeat: int) -> dict:
    env = dict(os.environ, MELNIKOV_NUMBA=backend_flag)
    out = subprocess.run([sys.executable, "-c", WORKLOAD.replace("REPEAT", str(repeat))],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run("1", args.repeat)
    slow = run("0", args.repeat)
    keys = [k for k in fast if k.endswith("_s")]
    print(f"{'workload':<22}{'numba':>12}{'python':>12}{'speedup':>10}")
    for k in keys:
        speed = slow[k] / fast[k] if fast[k] > 0 else float("inf")
        print(f"{k:<22}{fast[k]:>12.4f}{slow[k]:>12.4f}{speed:>9.1f}x")
    same = fast["checksum"] == slow["checksum"]
    print(f"checksum identical across backends: {same}")


if __name__ == "__main__":
    main()
