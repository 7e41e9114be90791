"""Numerical oracle: sample the configuration variety and read off its topology.

Seeds are drawn uniformly on the torus of free angles and pushed onto the
variety by damped Newton.  Samples are linked when their flat-torus distance
is below an adaptive radius; sparse stretches that the radius misses are
repaired by *bridging*: the straight segment between two nearby samples is
projected point by point and accepted only if the projected path moves in
small steps.  Component labels come from union-find.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import _accel
from .core import MultipolygonSpec, project_many

TWO_PI = 2.0 * math.pi
VOXEL = TWO_PI / 4096
FEW_CELLS = 64
# double roots at folded configurations converge only to ~1e-8, far
# above the closure tolerance, so clustering never goes below this
RHO_FLOOR = 1e-5
RHO_FACTOR = 3.0
BRIDGE_K = 24
BRIDGE_REACH = 10.0
BRIDGE_TRIES = 2
MAX_PAIRWISE_COMPONENTS = 40
REFINE_ROUNDS = 2
SMALL_COMPONENT = 50
SMALL_FRACTION = 0.01
MAX_REFINE_CENTERS = 2000
REFINE_PER_POINT = 64
REFINE_SPREAD = 3.0
NEAR_WALL = 1e-6
ON_WALL = 1e-12


class NearWallError(ValueError):
    """Lengths sit within 1e-6 of a wall without lying on it."""


class OracleError(RuntimeError):
    """The oracle cannot adjudicate the question it was asked."""


@dataclass
class SampledComplex:
    spec: MultipolygonSpec
    points: np.ndarray
    edges: np.ndarray
    component_labels: np.ndarray
    seed: int
    n_samples: int
    rho: float
    fixed: dict = field(default_factory=dict)
    status: str = "ok"

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0

    def to_json(self) -> dict:
        return {
            "spec": self.spec.to_json(),
            "status": self.status,
            "seed": int(self.seed),
            "n_samples": int(self.n_samples),
            "rho": float(self.rho),
            "fixed": {str(k): float(v) for k, v in sorted(self.fixed.items())},
            "points": self.points.tolist(),
            "edges": self.edges.tolist(),
            "labels": self.component_labels.tolist(),
            "components": component_count(self),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def _signed_sums(lengths) -> np.ndarray:
    sums = np.zeros(1)
    for d in lengths:
        sums = np.concatenate([sums + d, sums - d])
    return np.unique(sums)


def wall_gap(spec: MultipolygonSpec) -> float:
    """Smallest nonzero gap between signed sums of two different chains."""
    sets = [_signed_sums(c.lengths) for c in spec.chains]
    scale = max(max(c.lengths) for c in spec.chains)
    best = math.inf
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            a, b = sets[i], sets[j]
            pos = np.clip(np.searchsorted(b, a), 1, len(b) - 1)
            gaps = np.minimum(np.abs(a - b[pos - 1]), np.abs(a - b[pos])) / scale
            gaps = gaps[gaps > ON_WALL]
            if gaps.size:
                best = min(best, float(gaps.min()))
    return best


def check_wall(spec: MultipolygonSpec) -> None:
    gap = wall_gap(spec)
    if gap < NEAR_WALL:
        raise NearWallError(f"near-wall: signed sums differ by {gap:.3g} (relative)")


def torus_delta(a, b):
    """Shortest signed angular difference b - a, componentwise."""
    d = np.mod(np.asarray(b) - np.asarray(a) + math.pi, TWO_PI) - math.pi
    return d


def torus_dist(a, b):
    return np.sqrt(np.sum(torus_delta(a, b) ** 2, axis=-1))


def _tree(points):
    return cKDTree(np.mod(points, TWO_PI), boxsize=TWO_PI)


def _voxel_reps(points, h):
    """Keep one sample per cell of a grid with spacing about ``h`` on the torus."""
    m = max(1, int(TWO_PI // h))
    q = np.minimum((np.mod(points, TWO_PI) * (m / TWO_PI)).astype(np.int64), m - 1)
    if q.shape[1] * math.log2(m) < 62:
        key = np.zeros(q.shape[0], dtype=np.int64)
        for col in q.T:
            key = key * m + col
        _, first, inverse = np.unique(key, return_index=True, return_inverse=True)
    else:
        _, first, inverse = np.unique(q, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return first[order], rank[inverse.ravel()]


def _bridge(spec, free, p, q, rho) -> bool:
    delta = torus_delta(p, q)
    steps = max(2, int(math.ceil(np.linalg.norm(delta) / (0.5 * rho))))
    t = np.linspace(0.0, 1.0, steps + 1)[:, None]
    X, ok, _ = project_many(np.mod(p + t * delta, TWO_PI), spec, free=free)
    if not ok.all():
        return False
    return bool(np.all(torus_dist(X[:-1], X[1:]) <= rho))


def _candidate_pairs(points, labels, reach):
    """Closest sample pairs between different components, nearest first."""
    n_comp = int(labels.max()) + 1
    members = [np.flatnonzero(labels == c) for c in range(n_comp)]
    out = []
    if n_comp <= MAX_PAIRWISE_COMPONENTS:
        trees = [_tree(points[m]) for m in members]
        for c in range(n_comp):
            for c2 in range(c + 1, n_comp):
                src, dst = (c, c2) if members[c].size <= members[c2].size else (c2, c)
                d, j = trees[dst].query(np.mod(points[members[src]], TWO_PI), k=1,
                                        distance_upper_bound=reach)
                hit = np.flatnonzero(np.isfinite(d))
                hit = hit[np.argsort(d[hit], kind="stable")][:BRIDGE_TRIES]
                out.extend((d[h], members[src][h], members[dst][j[h]]) for h in hit)
    else:
        tree = _tree(points)
        k = min(BRIDGE_K + 1, points.shape[0])
        d, j = tree.query(np.mod(points, TWO_PI), k=k, distance_upper_bound=reach)
        rows = np.repeat(np.arange(points.shape[0]), k)
        d, j = d.ravel(), j.ravel()
        keep = np.isfinite(d)
        rows, d, j = rows[keep], d[keep], j[keep]
        keep = labels[rows] != labels[j]
        out = list(zip(d[keep], rows[keep], j[keep]))
    out.sort(key=lambda t: (t[0], min(t[1], t[2]), max(t[1], t[2])))
    return out


def _bridges(spec, free, points, labels, rho):
    dsu = _DSU(int(labels.max()) + 1)
    tries: dict = {}
    extra = []
    for _, i, j in _candidate_pairs(points, labels, BRIDGE_REACH * rho):
        ci, cj = dsu.find(labels[i]), dsu.find(labels[j])
        if ci == cj:
            continue
        key = (min(ci, cj), max(ci, cj))
        if tries.get(key, 0) >= BRIDGE_TRIES:
            continue
        tries[key] = tries.get(key, 0) + 1
        if _bridge(spec, free, points[i], points[j], rho):
            dsu.union(ci, cj)
            extra.append((int(min(i, j)), int(max(i, j))))
    return extra


class _DSU:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a != b:
            self.parent[max(a, b)] = min(a, b)


def build_complex(spec: MultipolygonSpec, points: np.ndarray, *, seed: int = 0,
                  n_samples: int | None = None, fixed: dict | None = None,
                  rho: float | None = None, bridge: bool = True) -> SampledComplex:
    """Link on-variety samples into a neighbour graph and label its components.

    Samples are first thinned to one representative per grid cell, which
    evens out the very uneven density that Newton projection produces.  The
    link radius is a multiple of the median distance from a representative
    to its third neighbour.  Graph vertices are representatives; every
    sample inherits the label of its cell.
    """
    fixed = dict(fixed or {})
    free = np.ones(spec.n_free, dtype=bool)
    free[list(fixed)] = False
    n_samples = points.shape[0] if n_samples is None else n_samples
    if points.shape[0] == 0:
        return SampledComplex(spec, points.reshape(0, spec.n_free), np.zeros((0, 2), np.int64),
                              np.zeros(0, np.int64), seed, n_samples, 0.0, fixed, "EmptyVariety")
    reps, _ = _voxel_reps(points, VOXEL)
    if rho is None:
        if reps.size <= FEW_CELLS:
            # finitely many points: adjacent cells only
            rho = max(4 * VOXEL, RHO_FLOOR)
        elif reps.size >= 4:
            d3 = _tree(points[reps]).query(points[reps], k=4)[0][:, 3]
            rho = max(RHO_FACTOR * float(np.median(d3)), RHO_FLOOR)
        else:
            rho = RHO_FLOOR
    if rho > 4 * VOXEL:
        reps, _ = _voxel_reps(points, rho / 4)
    rp = points[reps]
    n = rp.shape[0]
    tree = _tree(rp)
    edges = tree.query_pairs(rho, output_type="ndarray")
    edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))] if edges.size else edges.reshape(0, 2)
    labels = _accel.union_find(n, edges)

    if bridge and labels.max() > 0:
        extra = _bridges(spec, free, rp, labels, rho)
        if extra:
            edges = np.concatenate([edges, np.array(extra, dtype=np.int64)])
            labels = _accel.union_find(n, edges)
    return SampledComplex(spec, rp, edges, labels, seed, n_samples, float(rho), fixed)


def sample_variety(spec: MultipolygonSpec, n_samples: int, seed: int, *,
                   fixed: dict | None = None, rho: float | None = None,
                   bridge: bool = True, check_walls: bool = True) -> SampledComplex:
    """Sample the moduli space of ``spec`` (optionally a slice with fixed angles)."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if check_walls:
        check_wall(spec)
    fixed = dict(fixed or {})
    rng = np.random.default_rng(seed)
    X0 = rng.uniform(0.0, TWO_PI, size=(n_samples, spec.n_free))
    free = np.ones(spec.n_free, dtype=bool)
    for idx, val in fixed.items():
        X0[:, idx] = val
        free[idx] = False
    X, ok, _ = project_many(X0, spec, free=free)
    pts = X[ok]
    cx = build_complex(spec, pts, seed=seed, n_samples=n_samples, fixed=fixed,
                       rho=rho, bridge=bridge)
    for _ in range(REFINE_ROUNDS):
        extra = _refine_seeds(cx, rng, free)
        if extra is None:
            break
        X, ok, _ = project_many(extra, spec, free=free)
        pts = np.concatenate([pts, X[ok]])
        cx = build_complex(spec, pts, seed=seed, n_samples=n_samples, fixed=fixed,
                           rho=rho, bridge=bridge)
    return cx


def _refine_seeds(cx: SampledComplex, rng, free):
    """Extra seeds scattered around the samples of suspiciously small components.

    Sampling thins out next to singular points, which can strand a few
    samples of a strand away from the rest.  Reseeding locally fills the gap.
    """
    if cx.empty or component_count(cx) < 2:
        return None
    sizes = np.bincount(cx.component_labels)
    small = np.flatnonzero(sizes < max(SMALL_COMPONENT, SMALL_FRACTION * cx.points.shape[0]))
    if small.size == 0 or small.size == sizes.size and sizes.size <= FEW_CELLS:
        return None
    centers = cx.points[np.isin(cx.component_labels, small)][:MAX_REFINE_CENTERS]
    seeds = np.repeat(centers, REFINE_PER_POINT, axis=0)
    noise = rng.normal(0.0, REFINE_SPREAD * cx.rho, size=seeds.shape)
    noise[:, ~free] = 0.0
    return np.mod(seeds + noise, TWO_PI)


def component_count(complex_: SampledComplex) -> int:
    if complex_.empty:
        return 0
    return int(complex_.component_labels.max()) + 1


# ---------------------------------------------------------------------------
# Euler characteristic of a sampled graph-like space
# ---------------------------------------------------------------------------

LINK_FACTOR = 3.0
CORE_FACTOR = 10.0
SHELL_FACTOR = 16.0


def _branch_count(points, link) -> int:
    """Connected pieces (of at least two samples) in a point set."""
    if points.shape[0] < 2:
        return 0
    pairs = _tree(points).query_pairs(link, output_type="ndarray")
    labels = _accel.union_find(points.shape[0], pairs)
    sizes = np.bincount(labels)
    return int(np.sum(sizes >= 2))


def graph_chi(complex_: SampledComplex, dimension: int | None = None) -> int:
    """Euler characteristic of a sampled space of dimension <= 1.

    The caller must state the dimension; the estimate is meaningless on
    surfaces.  Regular curve points have two branches and contribute nothing;
    every cluster of junction samples with ``k`` outgoing branches contributes
    ``1 - k/2`` (so an isolated point gives 1 and a figure-8 crossing -1).
    """
    if dimension is None:
        raise OracleError("graph_chi needs the caller to assert the dimension (0 or 1)")
    if dimension not in (0, 1):
        raise OracleError("graph_chi only applies to spaces of dimension <= 1")
    if complex_.empty:
        return 0
    if dimension == 0:
        return component_count(complex_)
    pts = complex_.points
    rho = complex_.rho
    link = LINK_FACTOR * rho
    r_in, r_out = CORE_FACTOR * rho, SHELL_FACTOR * rho
    tree = _tree(pts)

    # greedy landmark net
    covered = np.zeros(pts.shape[0], dtype=bool)
    landmarks = []
    for i in range(pts.shape[0]):
        if covered[i]:
            continue
        landmarks.append(i)
        covered[tree.query_ball_point(np.mod(pts[i], TWO_PI), 0.5 * r_in)] = True

    special = []
    for i in landmarks:
        idx = np.array(tree.query_ball_point(np.mod(pts[i], TWO_PI), r_out), dtype=np.int64)
        ring = idx[torus_dist(pts[idx], pts[i]) > r_in]
        if _branch_count(pts[ring], link) != 2:
            special.append(i)
    if not special:
        return 0

    special = np.array(special)
    sp_pairs = _tree(pts[special]).query_pairs(2.0 * r_out, output_type="ndarray")
    groups = _accel.union_find(special.size, sp_pairs)
    chi2 = 0  # twice the Euler characteristic
    for g in range(int(groups.max()) + 1):
        members = special[groups == g]
        core = set()
        shell = set()
        for i in members:
            q = np.mod(pts[i], TWO_PI)
            core.update(tree.query_ball_point(q, r_in))
            shell.update(tree.query_ball_point(q, r_in + (r_out - r_in)))
        ring = np.array(sorted(shell - core), dtype=np.int64)
        degree = _branch_count(pts[ring], link) if ring.size else 0
        chi2 += 2 - degree
    if chi2 % 2:
        raise OracleError("odd total branch degree: sampled skeleton is inconsistent")
    return chi2 // 2


# ---------------------------------------------------------------------------
# fibers of the inter-edge angle of a two-edge first chain
# ---------------------------------------------------------------------------

def slice_value(theta1: float) -> float:
    """Direction of the second edge of chain 0 for inter-edge angle ``theta1``."""
    return float(np.mod(math.pi - theta1, TWO_PI))


def sample_fiber(spec: MultipolygonSpec, theta1: float, n_samples: int, seed: int,
                 seeds: np.ndarray | None = None) -> SampledComplex:
    """Sample the fiber over ``theta1`` (first chain must have two edges)."""
    if len(spec.chains[0]) != 2:
        raise OracleError("fibers of the inter-edge angle need a two-edge first chain")
    target = slice_value(theta1)
    rng = np.random.default_rng(seed)
    X0 = rng.uniform(0.0, TWO_PI, size=(n_samples, spec.n_free))
    if seeds is not None and len(seeds):
        X0 = np.concatenate([np.asarray(seeds, dtype=np.float64), X0])
    X0[:, 0] = target
    free = np.ones(spec.n_free, dtype=bool)
    free[0] = False
    X, ok, _ = project_many(X0, spec, free=free)
    return build_complex(spec, X[ok], seed=seed, n_samples=n_samples, fixed={0: target})


def fiber_clusters(complex_: SampledComplex, theta1: float, width: float = 0.05,
                   n_local: int = 2000) -> int:
    """Number of points (or components) of the fiber over ``theta1``.

    Samples of ``complex_`` within ``width`` of the slice seed a constrained
    projection onto the exact slice, topped up with ``n_local`` fresh seeds.
    """
    spec = complex_.spec
    target = slice_value(theta1)
    seeds = None
    if not complex_.empty:
        near = np.abs(torus_delta(complex_.points[:, 0], target)) <= width
        seeds = complex_.points[near]
    fib = sample_fiber(spec, theta1, n_local, complex_.seed + 1, seeds=seeds)
    return component_count(fib)


# ---------------------------------------------------------------------------
# component summaries over the base moduli space of chain 0
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComponentSummary:
    """Per component: the set of base cells (chain-0 free angles) it covers."""

    cells: tuple[frozenset, ...]
    resolution: int
    base_dim: int

    @property
    def count(self) -> int:
        return len(self.cells)


def component_summary(complex_: SampledComplex, resolution: int = 180) -> ComponentSummary:
    spec = complex_.spec
    base_dim = len(spec.chains[0]) - 1
    if complex_.empty:
        return ComponentSummary((), resolution, base_dim)
    base = complex_.points[:, :base_dim]
    idx = np.floor(np.mod(base, TWO_PI) / (TWO_PI / resolution)).astype(np.int64) % resolution
    cells = []
    for lab in range(component_count(complex_)):
        rows = idx[complex_.component_labels == lab]
        cells.append(frozenset(map(tuple, rows.tolist())))
    return ComponentSummary(tuple(cells), resolution, base_dim)
