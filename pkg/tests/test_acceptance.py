"""Acceptance suite: ten end-to-end criteria at their stated tolerances.

Each criterion is a function returning ``(passed, detail, report)`` where
``report`` is a JSON-serialisable record of everything it measured.  The
pytest wrappers print one PASS/FAIL line per criterion (also collected in
the terminal summary); ``python3 tests/test_acceptance.py`` runs them
without pytest.
"""
from __future__ import annotations

import contextlib
import io
import json
import math
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from linkmod.cli import main as cli_main
from linkmod.core import (
    Configuration,
    FreeLinkageSpec,
    MultipolygonSpec,
    length_range,
    project_many,
    residuals_flat,
)
from linkmod.fibers import euler_characteristic, fiber_at_angle, product_structure
from linkmod.multiquad import MultiquadSpec, classify
from linkmod.paths import connected_multipolygon, km_disconnected, slide_path
from linkmod.sampler import component_count, fiber_clusters, graph_chi, sample_fiber, sample_variety
from linkmod.smoothness import (
    block_permutation,
    check_nointsmooth,
    jacobian,
    jacobian_batch,
    numeric_rank,
    numeric_rank_batch,
    straight_line_witness,
)

sys.path.insert(0, str(Path(__file__).parent))
from multiquad_instances import instances  # noqa: E402

SEED = 0
N_ORACLE = 100_000
SUMMARY: dict[int, str] = {}
REPORTS: dict[int, str] = {}


def _line(k: int, passed: bool, detail: str, seconds: float) -> str:
    return f"[{'PASS' if passed else 'FAIL'}] criterion {k:>2}: {detail} ({seconds:.2f} s)"


def _count(chains, n=N_ORACLE, seed=SEED) -> int:
    return component_count(sample_variety(MultipolygonSpec(chains), n, seed))


# ---------------------------------------------------------------------------
# 1. worked example
# ---------------------------------------------------------------------------

def criterion_1():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "spec.json"
        path.write_text(json.dumps({"chains": [[1.1, 0.9], [1, 1, 1], [1, 1]]}))
        buf = io.StringIO()
        t0 = time.perf_counter()
        with contextlib.redirect_stdout(buf):
            code = cli_main(["euler", str(path)])
        elapsed = time.perf_counter() - t0
    out = json.loads(buf.getvalue())
    ang = out["degenerate_angles"]
    star = math.acos(51 / 99)
    deg = out["degenerate_fibers"]
    cos_star = next((f["vertex_cos"] for f in deg if abs(f["angle"] - star) < 1e-9), None)
    checks = {
        "exit_code": code == 0,
        "three_angles": len(ang) == 3,
        "angles_pm_star_pi": len(ang) == 3 and all(
            abs(x - y) <= 1e-12 for x, y in zip(ang, [star, math.pi, 2 * math.pi - star])),
        "vertex_cos_51_99": cos_star is not None and abs(cos_star - 51 / 99) <= 1e-12,
        "interval_fibers": sorted(f["fiber"]["description"] for f in out["interval_fibers"])
        == ["four circles", "two circles", "two circles"],
        "degenerate_chi": sorted(f["chi"] for f in deg) == [-6, -6, 0],
        "total_chi": out["total_chi"] == -12,
        "runtime_under_1s": elapsed < 1.0,
    }
    passed = all(checks.values())
    report = {"checks": checks, "euler": out}
    detail = f"worked example total_chi={out['total_chi']}, cli runtime {elapsed:.3f} s"
    return passed, detail, report


# ---------------------------------------------------------------------------
# 2. multiquad classification matrix against formulas and the sampler
# ---------------------------------------------------------------------------

def _formula_counts(v):
    zero_pairs = int(v[0] == v[1] == 0) + int(v[2] == v[3] == 0)
    return 2 ** zero_pairs, 2 ** (2 - v[1] - v[3]), 2 ** (2 - v[0] - v[2])


def criterion_2():
    t0 = time.perf_counter()
    rows, ok = [], True
    for case, v, L in instances():
        spec = MultiquadSpec.from_lengths(*L)
        r = classify(spec)
        comps, ends, at_pi = _formula_counts(v)
        cx = sample_variety(spec.to_multipolygon(), N_ORACLE, SEED)
        n = component_count(cx)
        if case == "A":
            cls_fib = (r.fiber_at_0, r.fiber_at_pi)
            smp_fib = (fiber_clusters(cx, 0.0), fiber_clusters(cx, math.pi))
        else:
            cls_fib = (r.fiber_at_extremes, r.fiber_at_pi)
            smp_fib = (fiber_clusters(cx, r.image.theta_min), fiber_clusters(cx, math.pi))
        good = (r.case_label == "Case" + case and r.v.as_tuple() == v
                and r.components == comps == n and cls_fib == (ends, at_pi) == smp_fib)
        ok &= good
        rows.append({"case": case, "v": list(v), "lengths": list(L), "classifier": [r.components, *cls_fib],
                     "formula": [comps, ends, at_pi], "sampler": [n, *smp_fib], "match": good})
    elapsed = time.perf_counter() - t0
    passed = ok and len(rows) >= 10 and elapsed < 60.0
    good_rows = sum(r["match"] for r in rows)
    detail = f"{good_rows}/{len(rows)} v-vector instances match formulas and sampler, {elapsed:.1f} s total"
    return passed, detail, {"rows": rows, "under_60s": elapsed < 60.0}


# ---------------------------------------------------------------------------
# 3. smoothness certification
# ---------------------------------------------------------------------------

U = lambda n: (1,) * n  # noqa: E731

CERTIFIED = [
    # branch 1: opposite parity
    (0.3, 0.2, U(3), U(2)), (0.7, 0.45, U(3), U(2)), (1.2, 0.5, U(3), U(2)), (0.35, 0.25, U(3), U(4)),
    (1.3, 0.4, U(3), U(4)), (0.6, 0.3, U(2), U(3)), (1.1, 0.6, U(5), U(2)),
    # branch 2: both odd
    (0.4, 0.3, U(3), U(3)), (1.5, 0.2, U(3), U(3)), (1.6, 0.3, U(3), U(5)), (0.45, 0.35, U(5), U(3)),
    (2.4, 0.3, U(3), U(3)), (0.2, 0.15, U(3), U(3)),
    # branch 3: both even
    (0.4, 0.3, U(2), U(2)), (0.8, 0.5, U(2), U(4)), (0.9, 0.7, U(4), U(2)), (1.2, 0.5, U(4), U(4)),
    (0.25, 0.2, U(2), U(2)),
    # general lengths
    (1.5, 0.1, (1, 1.5), (2, 0.7)), (1.4, 0.25, (1, 1.6), (1.1, 1, 1)),
]

VIOLATING = [
    (0.6, 0.4, U(3), U(2)),
    (0.3, 0.3, U(2), U(2)),
    (1.5, 0.7, U(3), U(3)),
    (0.6, 0.5, (1.5, 1), (2, 0.9)),
    (1.3, 0.3, U(3), U(4)),
]


def _on_variety(spec, n, seed):
    rng = np.random.default_rng(seed)
    got = np.zeros((0, spec.n_free))
    for _ in range(20):
        X, ok, _ = project_many(rng.uniform(0, 2 * np.pi, (2 * n, spec.n_free)), spec)
        got = np.concatenate([got, X[ok]])
        if got.shape[0] >= n:
            break
    return got[:n]


def criterion_3():
    t0 = time.perf_counter()
    rows, ok = [], True
    branches = set()
    for a, b, d2, d3 in CERTIFIED:
        rep = check_nointsmooth(a, b, FreeLinkageSpec(d2), FreeLinkageSpec(d3))
        spec = MultipolygonSpec([[a, b], d2, d3])
        X = _on_variety(spec, 1000, SEED)
        ranks = numeric_rank_batch(jacobian_batch(X, spec), 1e-8)
        good = bool(rep.is_smooth_manifold and X.shape[0] == 1000 and (ranks == 4).all())
        ok &= good
        branches.add(rep.corollary_branch)
        rows.append({"spec": [a, b, list(d2), list(d3)], "certified": rep.is_smooth_manifold,
                     "branch": rep.corollary_branch, "samples": int(X.shape[0]),
                     "min_rank": int(ranks.min()) if ranks.size else None, "match": good})
    for a, b, d2, d3 in VIOLATING:
        rep = check_nointsmooth(a, b, FreeLinkageSpec(d2), FreeLinkageSpec(d3))
        w = straight_line_witness(a, b, d2, d3, seed=SEED)
        spec = MultipolygonSpec([[a, b], d2, d3])
        rank = numeric_rank(jacobian(w, spec), 1e-8) if w is not None else None
        good = (not rep.is_smooth_manifold) and rank is not None and rank <= 3
        ok &= good
        rows.append({"spec": [a, b, list(d2), list(d3)], "certified": rep.is_smooth_manifold,
                     "witness": None if w is None else w.to_json(), "rank": rank, "match": good})
    elapsed = time.perf_counter() - t0
    all_branches = {1, 2, 3} <= branches
    passed = ok and all_branches and len(CERTIFIED) == 20 and len(VIOLATING) == 5 and elapsed < 30.0
    detail = (f"{sum(r['match'] for r in rows[:20])}/20 certified at full rank, "
              f"{sum(r['match'] for r in rows[20:])}/5 rank-deficient witnesses, {elapsed:.1f} s")
    return passed, detail, {"rows": rows, "branches": sorted(b for b in branches if b is not None)}


# ---------------------------------------------------------------------------
# 4. Jacobian against finite differences
# ---------------------------------------------------------------------------

def _fd_batch(X, spec, h=1e-6):
    J = np.zeros((X.shape[0], 4, X.shape[1]))
    for j in range(X.shape[1]):
        E = np.zeros_like(X)
        E[:, j] = h
        J[:, :, j] = (residuals_flat(X + E, spec) - residuals_flat(X - E, spec)) / (2 * h)
    return J[:, :, block_permutation(spec)]


def criterion_4():
    worst, rows = 0.0, []
    for a, b, d2, d3 in CERTIFIED + VIOLATING:
        spec = MultipolygonSpec([[a, b], d2, d3])
        X = _on_variety(spec, 100, SEED + 1)
        J = jacobian_batch(X, spec)
        single = np.array([jacobian(Configuration.from_free(spec, x), spec).matrix for x in X])
        fd = _fd_batch(X, spec)
        rel = np.linalg.norm(J - fd, axis=(1, 2)) / np.linalg.norm(fd, axis=(1, 2))
        rel = np.maximum(rel, np.linalg.norm(single - fd, axis=(1, 2)) / np.linalg.norm(fd, axis=(1, 2)))
        worst = max(worst, float(rel.max()))
        rows.append({"spec": [a, b, list(d2), list(d3)], "configs": int(X.shape[0]), "max_rel_err": float(rel.max())})
    passed = worst <= 1e-4 and all(r["configs"] == 100 for r in rows)
    return passed, f"{len(rows)} specs x 100 configs, worst relative error {worst:.2e}", {"rows": rows}


# ---------------------------------------------------------------------------
# 5. fibered product with a single-edge first chain
# ---------------------------------------------------------------------------

FIBERED = [
    ((2,), (1, 1.5), (1.2, 1.3)),
    ((4,), (4, 4, 1, 1), (3, 2)),
    ((3,), (1, 1, 2), (1, 1, 1.5)),
    ((1,), (1, 1), (1, 1, 0.5)),
    ((2.5,), (1, 1, 1), (1.5, 1.5)),
]


def criterion_5():
    rows, ok = [], True
    for f1, f2, f3 in FIBERED:
        full, m12, m13 = _count([f1, f2, f3]), _count([f1, f2]), _count([f1, f3])
        good = full == m12 * m13
        ok &= good
        rows.append({"chains": [list(f1), list(f2), list(f3)], "full": full, "m12": m12, "m13": m13, "match": good})
    detail = ", ".join(f"{r['full']}={r['m12']}x{r['m13']}" for r in rows)
    return ok, f"component counts {detail}", {"rows": rows}


# ---------------------------------------------------------------------------
# 6. disjoint-union law
# ---------------------------------------------------------------------------

DISJOINT = [
    ((11, 11), (6, 2), (7, 9)),  # ranges [0,22], [4,8], third chain (7,9)
    ((2, 1), (1.5, 1), (2, 1.2)),
    ((1, 1, 1), (2, 1.5), (2.5, 2.2)),
]


def _disjoint_hypotheses(f1, f2, f3) -> bool:
    r1, r2 = length_range(FreeLinkageSpec(f1)), length_range(FreeLinkageSpec(f2))
    a, b = f3
    return len(f3) == 2 and abs(a - b) < max(r1.lo, r2.lo) and a + b > min(r1.hi, r2.hi)


def criterion_6():
    rows, ok = [], True
    r1, r2 = length_range(FreeLinkageSpec(DISJOINT[0][0])), length_range(FreeLinkageSpec(DISJOINT[0][1]))
    ranges_ok = (r1.lo, r1.hi, r2.lo, r2.hi) == (0, 22, 4, 8)
    for f1, f2, f3 in DISJOINT:
        full, pair = _count([f1, f2, f3]), _count([f1, f2])
        good = _disjoint_hypotheses(f1, f2, f3) and full == 2 * pair
        ok &= good
        rows.append({"chains": [list(f1), list(f2), list(f3)], "full": full, "pair": pair, "match": good})
    detail = ", ".join(f"{r['full']}=2x{r['pair']}" for r in rows)
    return ok and ranges_ok, f"component counts {detail}", {"rows": rows, "ranges_ok": ranges_ok}


# ---------------------------------------------------------------------------
# 7. path algorithm
# ---------------------------------------------------------------------------

def criterion_7():
    rng = np.random.default_rng(SEED)
    rows, ok = [], True
    for _ in range(50):
        n = int(rng.integers(3, 7))
        L = rng.uniform(0.1, 5.0, n)
        chain = FreeLinkageSpec(L)
        r = length_range(chain)
        target = float(rng.uniform(r.lo, r.hi))
        start = Configuration([rng.uniform(0, 2 * np.pi, n)], pinned=False)
        res = slide_path(chain, start, target)
        A = np.array([w.angles[0] for w in res.waypoints])
        V = np.concatenate([np.zeros((A.shape[0], 1)), np.cumsum(L * np.exp(1j * A), axis=1)], axis=1)
        edge_err = float(np.abs(np.abs(np.diff(V, axis=1)) - L).max())
        good = bool(res.achieved and abs(res.final_distance - target) <= 1e-9 and res.stage_count <= n
                    and chain.lengths == tuple(L) and edge_err <= 1e-12 * L.max())
        ok &= good
        rows.append({"n": n, "target": target, "final": res.final_distance, "stages": res.stage_count,
                     "edge_err": edge_err, "match": good})
    worst = max(abs(r["final"] - r["target"]) for r in rows)
    return ok, f"{sum(r['match'] for r in rows)}/50 chains reach target, worst |d-target| {worst:.1e}", {"rows": rows}


# ---------------------------------------------------------------------------
# 8. connectedness
# ---------------------------------------------------------------------------

CONNECTED = [
    ((1.8, 0.6), (1, 1, 1), (1, 1, 1)),
    ((2, 0.5), (1, 1, 1), (1, 1, 1)),
    ((2, 0.5), (1, 1.2, 0.9), (1, 1, 1)),
    ((1.9, 0.7), (1, 1.1, 1), (0.9, 1, 1.05)),
    ((2.1, 0.8), (1.2, 1, 1), (1, 1, 1.1)),
    ((1.7, 0.4), (1, 0.95, 1), (1, 1, 0.9)),
    ((2.2, 0.6), (1.1, 1.1, 1.1), (1, 1.2, 1)),
    ((1.6, 0.5), (0.9, 0.9, 1), (1, 1, 1)),
    ((2.4, 0.9), (1.3, 1.2, 1.1), (1.2, 1.2, 1.2)),
    ((2.3, 0.7), (1, 1, 1.2), (1.1, 1, 1.1)),
]


def criterion_8():
    rows, ok = [], True
    for chains in CONNECTED:
        rep = connected_multipolygon(MultipolygonSpec(chains))
        n = _count(chains)
        good = rep.certified_connected and n == 1
        ok &= good
        rows.append({"chains": [list(c) for c in chains], "certified": rep.certified_connected,
                     "components": n, "match": good})
    km = km_disconnected([4, 4, 4, 1, 1])
    km_count = _count([[4], [4, 4, 1, 1]])
    ok &= km and km_count >= 2
    detail = (f"{sum(r['match'] for r in rows)}/10 certified specs sample to 1 component; "
              f"(4,4,4,1,1): KM disconnected={km}, sampler {km_count}")
    return ok, detail, {"rows": rows, "km": km, "km_components": km_count}


# ---------------------------------------------------------------------------
# 9. product certificate and fiber constancy
# ---------------------------------------------------------------------------

PRODUCT = [
    ((0.4, 0.3), (1, 1, 1), (1, 1)),
    ((1.4, 0.25), (1, 1.6), (1.1, 1, 1)),
    ((1.5, 0.1), (1, 1.5), (2, 0.7)),
    ((2.2, 0.3), (1, 1, 1), (1.5, 1.2)),
    ((2.0, 0.3), (1, 1.4), (1, 1, 1)),
]
FIBER_ANGLES = [(k + 0.5) * 2 * math.pi / 8 for k in range(8)]


def criterion_9():
    rows, ok = [], True
    for chains in PRODUCT:
        spec = MultipolygonSpec(chains)
        (a, b), d2, d3 = chains
        cert = product_structure(spec)
        total = euler_characteristic(spec, fallback=False).total_chi
        symbolic = [fiber_at_angle(a, b, d2, d3, t, fallback=False) for t in FIBER_ANGLES]
        fibs = [sample_fiber(spec, t, 20000, SEED) for t in FIBER_ANGLES]
        counts = [component_count(f) for f in fibs]
        dim = spec.n_free - 5
        chis = [graph_chi(f, dim) for f in fibs] if dim <= 1 else None
        constant = (len({(f.kind, f.chi, f.components) for f in symbolic}) == 1 and len(set(counts)) == 1
                    and (chis is None or len(set(chis)) == 1))
        agrees = counts[0] == symbolic[0].components and (chis is None or chis[0] == symbolic[0].chi)
        good = cert is not None and cert.chi == 0 and total == 0 and constant and agrees
        ok &= good
        rows.append({"chains": [list(c) for c in chains], "certificate": cert is not None, "total_chi": total,
                     "fiber": symbolic[0].description, "sampled_counts": counts, "sampled_chi": chis,
                     "match": good})
    detail = f"{sum(r['match'] for r in rows)}/5 specs with chi=0 and constant fibers over 8 angles"
    return ok, detail, {"rows": rows}


CRITERIA = {1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
            6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9}


def _dump(report) -> str:
    return json.dumps(report, sort_keys=True)


def run(k: int):
    t0 = time.perf_counter()
    passed, detail, report = CRITERIA[k]()
    REPORTS[k] = _dump(report)
    SUMMARY[k] = _line(k, passed, detail, time.perf_counter() - t0)
    print(SUMMARY[k])
    return passed


# ---------------------------------------------------------------------------
# 10. determinism
# ---------------------------------------------------------------------------

def criterion_10():
    diffs = []
    for k, fn in CRITERIA.items():
        if k not in REPORTS:
            _, _, first = fn()
            REPORTS[k] = _dump(first)
        _, _, again = fn()
        if _dump(again) != REPORTS[k]:
            diffs.append(k)
    # the CLI sample report for a fixed seed must also be byte-identical
    with tempfile.TemporaryDirectory() as tmp:
        spec = Path(tmp) / "spec.json"
        spec.write_text(json.dumps({"chains": [[2, 1], [3, 2.5], [1.8, 1.2]]}))
        outs = []
        for i in range(2):
            dest = Path(tmp) / f"c{i}.json"
            with contextlib.redirect_stdout(io.StringIO()):
                cli_main(["sample", str(spec), "--n", "20000", "--seed", "7", "--out", str(dest)])
            outs.append(dest.read_bytes())
    cli_same = outs[0] == outs[1]
    passed = not diffs and cli_same
    detail = (f"re-ran criteria 1-9 with the same seeds: {9 - len(diffs)}/9 bit-identical JSON; "
              f"CLI sample output identical={cli_same}")
    return passed, detail, {"mismatched": diffs, "cli_sample_identical": cli_same}


CRITERIA_ALL = dict(CRITERIA)
CRITERIA_ALL[10] = criterion_10


@pytest.mark.parametrize("k", list(range(1, 10)))
def test_criterion(k):
    assert run(k), SUMMARY[k]


def test_criterion_10_determinism():
    t0 = time.perf_counter()
    passed, detail, _ = criterion_10()
    SUMMARY[10] = _line(10, passed, detail, time.perf_counter() - t0)
    print(SUMMARY[10])
    assert passed, SUMMARY[10]


if __name__ == "__main__":
    results = [run(k) for k in CRITERIA]
    test_passed = True
    try:
        test_criterion_10_determinism()
    except AssertionError:
        test_passed = False
    sys.exit(0 if all(results) and test_passed else 1)
