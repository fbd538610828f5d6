"""Compare the compiled and pure-Python kernels.

Times the hot kernels directly, then one short simulation per backend in a
fresh interpreter (the backend is chosen at import time).

    python benchmarks/bench_backends.py [--ticks N]
"""

import argparse
import os
import subprocess
import sys
import timeit

from agvsched import _backend
from agvsched.link_adaptation import default_catalogue

SIM_SNIPPET = """
import time
from agvsched import BACKEND
from agvsched.simulator import SimConfig, run
cfg = SimConfig(total_ticks={ticks}, arrival_rate=6e-3)
t0 = time.perf_counter()
run(cfg)
print(BACKEND, time.perf_counter() - t0)
"""


def kernel_cases(k):
    e = default_catalogue().by_id(4)
    curve = k.TabulatedCurve(e.curve.snr_db, [10 ** v for v in e.curve.log_bler])
    return {
        "marcum_q1(3, 4)": lambda: k.marcum_q1(3.0, 4.0),
        "marcum_q1c(40, 41)": lambda: k.marcum_q1c(40.0, 41.0),
        "kibble_joint_cdf(2, 0.978)": lambda: k.kibble_joint_cdf(2.0, 0.978),
        "bessel_j0(7.3)": lambda: k.bessel_j0(7.3),
        "curve.at(31.6)": lambda: curve.at(31.6),
        "curve.expect_rayleigh(50)": lambda: curve.expect_rayleigh(50.0),
    }


def best_time(fn, number):
    return min(timeit.repeat(fn, number=number, repeat=5)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ticks", type=int, default=2000, help="ticks in the simulation run")
    args = ap.parse_args(argv)

    names = _backend.available()
    if "compiled" not in names:
        print("compiled kernels not built; only the Python backend is available")
    mods = {n: _backend.load(n) for n in names}
    cases = {n: kernel_cases(m) for n, m in mods.items()}

    print(f"{'kernel':28s}" + "".join(f"{n:>14s}" for n in names) + "   speed-up")
    for label in cases[names[0]]:
        ts = [best_time(cases[n][label], 200) for n in names]
        row = f"{label:28s}" + "".join(f"{t * 1e6:11.2f} us" for t in ts)
        if len(ts) == 2:
            row += f"   {ts[1] / ts[0]:7.1f}x"
        print(row)

    print(f"\nsimulation, {args.ticks} ticks at lambda=6e-3, instability policy")
    code = SIM_SNIPPET.format(ticks=args.ticks)
    for n in names:
        env = dict(os.environ)
        env["AGVSCHED_PURE_PYTHON"] = "1" if n == "python" else "0"
        out = subprocess.run([sys.executable, "-c", code], env=env,
                             capture_output=True, text=True, check=True).stdout.split()
        print(f"  {out[0]:10s} {float(out[1]):8.2f} s")


if __name__ == "__main__":
    main()
