"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own subprocess (the backend is fixed at import
time by ``NUCFRAG_PURE_NUMPY``). Every workload reports its wall time, its
event count and a SHA-256 digest of its raw outputs; the digests must agree
bit for bit across backends.

    python3 benchmarks/bench_backends.py            # small workloads, both backends
    python3 benchmarks/bench_backends.py --scale 4  # larger workloads
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import subprocess
import sys
import time

import numpy as np


def _digest(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(np.asarray(a, dtype=np.float64)).tobytes())
    return h.hexdigest()


def workloads(scale: int):
    from nucfrag.analysis import MMInfParams, mm_infinity_simulate_batch
    from nucfrag.branching import BranchingParams, run_branching
    from nucfrag.fragmentation import FragmentationSpec
    from nucfrag.model import ModelParams
    from nucfrag.simulator import ObserverSet, SimulationMode, StopRule, run

    cstar = ModelParams(4, (1, 1, 1), (1, 1, 1))

    def ssa_full():
        rec = run(cstar, 60 * scale, stop=StopRule.rescaled_horizon(1.0),
                  observers=ObserverSet(curve_points=32, levels=True, balance=True), seed=11)
        return rec.event_count, _digest([rec.end_time], rec.mass_curve, rec.balance_A, rec.balance_B,
                                        rec.final_state.as_tuple(60 * scale + 1))

    def ssa_truncated_mf():
        p = ModelParams(4, (1, 1, 1), (1, 1, 1), fragmentation=FragmentationSpec.multiple((0.3, 0.7)))
        rec = run(p, 60 * scale, SimulationMode.TRUNCATED, stop=StopRule.rescaled_horizon(1.0), seed=12)
        return rec.event_count, _digest([rec.end_time], rec.nucleation_event_times)

    def ssa_growing_lambda():
        p = ModelParams(4, (1, 1, 1, 2, 0.5), (1, 1, 0.05))
        rec = run(p, 60 * scale, stop=StopRule.polymerized(0.5, max_rescaled_time=40), seed=13)
        return rec.event_count, _digest([rec.end_time, rec.lag_time or -1.0], rec.level_times)

    def branching():
        rec = run_branching(BranchingParams(20.0, 1.0, 4, FragmentationSpec.binomial(0.4)), 10.0,
                            population_cap=200 * scale, seed=14)
        return rec.event_count, _digest(rec.population_curve, [rec.end_time])

    def mminf():
        T = mm_infinity_simulate_batch(MMInfParams(2.0, 1.0, 4), 2000 * scale, seed=15)
        return T.size, _digest(T)

    return {f.__name__: f for f in (ssa_full, ssa_truncated_mf, ssa_growing_lambda, branching, mminf)}


def run_backend(scale: int) -> dict:
    from nucfrag import BACKEND

    out = {"backend": BACKEND, "results": {}}
    for name, fn in workloads(scale).items():
        fn()  # warm-up (numba compilation or cache load)
        t0 = time.perf_counter()
        events, digest = fn()
        out["results"][name] = {"seconds": time.perf_counter() - t0, "events": int(events), "digest": digest}
    return out


def spawn(pure: bool, scale: int) -> dict:
    env = dict(os.environ)
    env.pop("NUCFRAG_PURE_NUMPY", None)
    if pure:
        env["NUCFRAG_PURE_NUMPY"] = "1"
    cmd = [sys.executable, os.path.abspath(__file__), "--child", "--scale", str(scale)]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def compare(scale: int = 1) -> dict:
    fast, slow = spawn(False, scale), spawn(True, scale)
    rows = {}
    for name, r in fast["results"].items():
        s = slow["results"][name]
        rows[name] = {
            "events": r["events"],
            "numba_s": r["seconds"],
            "numpy_s": s["seconds"],
            "speedup": s["seconds"] / max(r["seconds"], 1e-9),
            "identical": r["digest"] == s["digest"] and r["events"] == s["events"],
        }
    return {"backends": [fast["backend"], slow["backend"]], "workloads": rows}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=int, default=1)
    ap.add_argument("--child", action="store_true", help=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    if args.child:
        print(json.dumps(run_backend(args.scale)))
        return 0
    report = compare(args.scale)
    print(f"{'workload':<22}{'events':>10}{'numba s':>12}{'numpy s':>12}{'speedup':>10}  identical")
    for name, r in report["workloads"].items():
        print(f"{name:<22}{r['events']:>10}{r['numba_s']:>12.4f}{r['numpy_s']:>12.4f}{r['speedup']:>10.1f}  {r['identical']}")
    return 0 if all(r["identical"] for r in report["workloads"].values()) else 1


if __name__ == "__main__":
    sys.exit(main())
