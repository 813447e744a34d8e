"""Compiled vs pure-numpy kernels.

Runs the same workloads in two child processes, one with numba and one with
BBIM_DISABLE_NUMBA=1, and prints the per-sweep cost of each plus the ratio.
The first compiled call is timed separately as JIT warm-up.

    python benchmarks/bench_kernels.py [--sweeps 200] [--json out.json]
"""
import argparse
import json
import os
import subprocess
import sys
import textwrap

CHILD = textwrap.dedent("""
    import json, sys, time
    from bbim import _jit
    from bbim.dynamics import DynamicsConfig, run_trial
    from bbim.kernels import enumerate_energies
    from bbim.problems import gen_3r3x, gen_erdos_renyi, maxcut_to_ising, xorsat_to_second_order
    from bbim.oracle import demo_instance

    sweeps = int(sys.argv[1])
    cases = {
        "maxcut n=100 portable": (maxcut_to_ising(gen_erdos_renyi(100, seed=1)), "portable"),
        "maxcut n=100 lfsr32": (maxcut_to_ising(gen_erdos_renyi(100, seed=1)), "lfsr32"),
        "3r3x-2nd n=64 portable": (xorsat_to_second_order(gen_3r3x(64, seed=1)), "portable"),
    }
    out = {"numba": _jit.USE_NUMBA, "cases": {}}
    for name, (inst, mode) in cases.items():
        cfg = DynamicsConfig.for_budget(sweeps, bb=-0.5, seed=3, rng_mode=mode)
        t0 = time.perf_counter()
        run_trial(inst, DynamicsConfig.for_budget(32, bb=-0.5, seed=3, rng_mode=mode))
        warm = time.perf_counter() - t0
        t0 = time.perf_counter()
        r = run_trial(inst, cfg)
        dt = time.perf_counter() - t0
        out["cases"][name] = {"us_per_sweep": 1e6 * dt / r.sweeps_used, "warmup_s": warm}
    inst = xorsat_to_second_order(gen_3r3x(6, seed=2))
    enumerate_energies(inst)
    t0 = time.perf_counter()
    enumerate_energies(inst)
    out["cases"]["enumerate 2^12 states"] = {"us_per_sweep": 1e6 * (time.perf_counter() - t0),
                                            "warmup_s": 0.0}
    print(json.dumps(out))
""")


def run(disable: bool, sweeps: int) -> dict:
    env = dict(os.environ)
    env.pop("BBIM_DISABLE_NUMBA", None)
    if disable:
        env["BBIM_DISABLE_NUMBA"] = "1"
    res = subprocess.run([sys.executable, "-c", CHILD, str(sweeps)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sweeps", type=int, default=256, help="sweeps per timed trial")
    ap.add_argument("--json", help="also write the raw timings here")
    args = ap.parse_args(argv)

    fast = run(False, args.sweeps)
    slow = run(True, args.sweeps)
    if not fast["numba"]:
        print("numba is not importable; both runs used the numpy fallback")
    print(f"{'workload':28s} {'numba us':>10s} {'numpy us':>10s} {'speedup':>8s} {'jit s':>7s}")
    for name, f in fast["cases"].items():
        s = slow["cases"][name]
        print(f"{name:28s} {f['us_per_sweep']:10.1f} {s['us_per_sweep']:10.1f} "
              f"{s['us_per_sweep'] / f['us_per_sweep']:8.1f} {f['warmup_s']:7.2f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"numba": fast, "numpy": slow, "sweeps": args.sweeps}, fh, indent=2)


if __name__ == "__main__":
    main()
