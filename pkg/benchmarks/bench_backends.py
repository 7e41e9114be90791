"""Compare the numba kernels with the pure-numpy fallback.

Each backend runs in its own interpreter because ``LINKMOD_BACKEND`` is read
once at import.  Both runs see identical seeds; the parent checks that the
projected points agree and prints a timing table.

Run: python3 benchmarks/bench_backends.py [--n 20000] [--repeat 3]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

SPECS = {
    "multiquad": [[2.0, 1.0], [1.8, 1.2], [1.0, 2.0]],
    "nointsmooth": [[1.1, 0.9], [1.0, 1.0, 1.0], [1.0, 1.0]],
    "polygon": [[4.0], [4.0, 4.0, 1.0, 1.0]],
}


def _worker(n: int, repeat: int, dump: str) -> None:
    from linkmod import _accel
    from linkmod.core import MultipolygonSpec, project_many

    out = {"backend": _accel.BACKEND, "specs": {}}
    arrays = {}
    for name, chains in SPECS.items():
        spec = MultipolygonSpec.from_json({"chains": chains})
        rng = np.random.default_rng(0)
        X0 = rng.uniform(0.0, 2 * np.pi, size=(n, spec.n_free))
        project_many(X0[:8], spec)  # warm-up / jit
        best = np.inf
        for _ in range(repeat):
            t0 = time.perf_counter()
            X, ok, _ = project_many(X0, spec)
            best = min(best, time.perf_counter() - t0)
        edges = np.column_stack([np.arange(n - 1), np.arange(1, n)])[::2]
        _accel.union_find(n, edges[:4])
        t0 = time.perf_counter()
        labels = _accel.union_find(n, edges)
        t_uf = time.perf_counter() - t0
        out["specs"][name] = {"project_s": best, "union_find_s": t_uf,
                              "converged": int(ok.sum()), "components": int(labels.max() + 1)}
        arrays[name] = X
        arrays[name + "_ok"] = ok
    np.savez(dump, **arrays)
    print(json.dumps(out))


def _run(backend: str, n: int, repeat: int, dump: str) -> dict:
    env = dict(os.environ, LINKMOD_BACKEND=backend)
    cmd = [sys.executable, __file__, "--worker", "--n", str(n), "--repeat", str(repeat), "--dump", dump]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    p.add_argument("--dump", default=None, help=argparse.SUPPRESS)
    args = p.parse_args(argv)
    if args.worker:
        _worker(args.n, args.repeat, args.dump)
        return 0

    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        paths = {b: os.path.join(tmp, f"{b}.npz") for b in ("numba", "numpy")}
        runs = {b: _run(b, args.n, args.repeat, paths[b]) for b in paths}
        data = {b: np.load(paths[b]) for b in paths}
        print(f"n={args.n} seeds per spec, best of {args.repeat}")
        print(f"{'spec':<12} {'numba s':>9} {'numpy s':>9} {'speedup':>8} {'max |dx|':>10}  components")
        for name in SPECS:
            a, b = runs["numba"]["specs"][name], runs["numpy"]["specs"][name]
            both = data["numba"][name + "_ok"] & data["numpy"][name + "_ok"]
            d = np.angle(np.exp(1j * (data["numba"][name][both] - data["numpy"][name][both])))
            dx = float(np.abs(d).max()) if d.size else 0.0
            print(f"{name:<12} {a['project_s']:9.3f} {b['project_s']:9.3f} "
                  f"{b['project_s'] / a['project_s']:8.1f} {dx:10.2e}  {a['components']}/{b['components']}")
        if runs["numba"]["backend"] != "numba":
            print("note: numba unavailable, both columns ran the numpy fallback")
    return 0


if __name__ == "__main__":
    sys.exit(main())
