"""Time the compiled trigonometric evaluation kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]

Also times one welding solve end to end under each backend (the solve
evaluates interpolants at off-grid points through these kernels).
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from eulerarnold import _fallback

try:
    from eulerarnold import _kernels
except ImportError:
    _kernels = None


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_table(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for K, P in ((32, 512), (128, 512), (256, 1024), (512, 2048)):
        c = rng.normal(size=K + 1) + 1j * rng.normal(size=K + 1)
        cn = rng.normal(size=K) + 1j * rng.normal(size=K)
        th = rng.uniform(0, 2 * np.pi, P)
        row = {"modes": K, "points": P,
               "numpy_real_ms": 1e3 * best(lambda: _fallback.eval_real(c, th), repeat),
               "numpy_complex_ms": 1e3 * best(lambda: _fallback.eval_complex(c, cn, th), repeat)}
        if _kernels is not None:
            row["cython_real_ms"] = 1e3 * best(lambda: _kernels.eval_real(c, th), repeat)
            row["cython_complex_ms"] = 1e3 * best(lambda: _kernels.eval_complex(c, cn, th), repeat)
            row["speedup_real"] = row["numpy_real_ms"] / row["cython_real_ms"]
            row["speedup_complex"] = row["numpy_complex_ms"] / row["cython_complex_ms"]
        rows.append(row)
    return rows


WELD = """
import timeit
from eulerarnold import _backend
from eulerarnold.spectral import FourierField
from eulerarnold.welding import CircleDiffeo, weld
eta = CircleDiffeo.from_displacement(FourierField.from_trig(3, sin={2: 0.1}, cos={3: 0.05}), {M})
print(_backend.BACKEND, min(timeit.repeat(lambda: weld(eta), number=1, repeat=3)))
"""


def weld_timing(M):
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, EULERARNOLD_PURE_PYTHON=flag)
        r = subprocess.run([sys.executable, "-c", WELD.replace("{M}", str(M))],
                           capture_output=True, text=True, env=env, check=True)
        name, secs = r.stdout.split()
        out[name] = float(secs)
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    rows = kernel_table(args.repeat)
    welds = {M: weld_timing(M) for M in (256, 512)}
    if args.json:
        print(json.dumps({"kernels": rows, "weld_seconds": welds}, indent=2))
        return
    print(f"{'modes':>6} {'points':>7} {'numpy re':>10} {'cython re':>10} {'x':>6}"
          f" {'numpy cx':>10} {'cython cx':>10} {'x':>6}")
    for r in rows:
        print(f"{r['modes']:>6} {r['points']:>7} {r['numpy_real_ms']:>9.3f}m"
              f" {r.get('cython_real_ms', float('nan')):>9.3f}m {r.get('speedup_real', float('nan')):>6.1f}"
              f" {r['numpy_complex_ms']:>9.3f}m {r.get('cython_complex_ms', float('nan')):>9.3f}m"
              f" {r.get('speedup_complex', float('nan')):>6.1f}")
    for M, t in welds.items():
        print(f"weld M={M}: " + ", ".join(f"{k} {v:.3f}s" for k, v in sorted(t.items())))


if __name__ == "__main__":
    main()
