"""Connectedness certificates and explicit paths for open chains.

``slide_path`` moves an open chain to a prescribed end-to-end distance.  After
a rigid rotation that puts the end on the positive x-axis, it walks the
joints in order: edge ``i`` is laid flat on the axis while the rest of the
chain slides along rigidly, until flattening would overshoot; then edge ``i``
is tilted so that edge ``i``, the rigid remainder and the axis form a
triangle that lands the end exactly on the target.  If that triangle does
not exist, the remainder is first slid (recursively) to the nearest span for
which it does.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .core import (
    EPS_CLOSURE,
    Configuration,
    FreeLinkageSpec,
    LinkageError,
    MultipolygonSpec,
    ProjectionError,
    length_range,
    project_to_variety,
    residuals,
)

DELTA_STEP = math.pi / 180
TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# connectedness
# ---------------------------------------------------------------------------

def long_edge_triple(lengths) -> tuple[int, int, int] | None:
    """Three edges whose pairwise sums all exceed half the perimeter."""
    lengths = list(lengths)
    if len(lengths) < 3:
        raise LinkageError("the long-edge criterion needs at least three edges")
    half = 0.5 * sum(lengths)
    for i, j, k in combinations(range(len(lengths)), 3):
        if lengths[i] + lengths[j] > half and lengths[j] + lengths[k] > half and lengths[i] + lengths[k] > half:
            return (i, j, k)
    return None


def km_disconnected(polygon) -> bool:
    """Polygon space is disconnected iff three long edges exist."""
    lengths = polygon.lengths if isinstance(polygon, FreeLinkageSpec) else polygon
    return long_edge_triple(lengths) is not None


@dataclass
class ConnectednessReport:
    certified_connected: bool
    reason: str
    long_edge_triple: tuple[int, int, int] | None = None
    applicable: bool = True
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "certified_connected": self.certified_connected,
            "reason": self.reason,
            "long_edge_triple": None if self.long_edge_triple is None else list(self.long_edge_triple),
            "applicable": self.applicable,
            "details": self.details,
        }


def connected_multipolygon(spec: MultipolygonSpec) -> ConnectednessReport:
    """Connectedness from the two longest edges of each attached chain.

    Needs a two-edge first chain ``(a, b)`` and attached chains whose length
    ranges contain ``[|a-b|, a+b]``.  Every fiber of the inter-edge angle is
    then a product of polygon spaces that cannot have three long edges.
    """
    if spec.r != 3 or len(spec.chains[0]) != 2:
        return ConnectednessReport(False, "not applicable: needs three chains with a two-edge first chain",
                                   applicable=False)
    a, b = spec.chains[0].lengths
    lo, hi = abs(a - b), a + b
    for k in (1, 2):
        rng = length_range(spec.chains[k])
        if not rng.contains_interval(lo, hi):
            return ConnectednessReport(
                False, f"not applicable: length range of chain {k} misses part of [{lo}, {hi}]",
                applicable=False)
    details = {}
    ok = True
    for k in (1, 2):
        L = sorted(spec.chains[k].lengths, reverse=True)
        if len(L) < 2:
            ok = False
            continue
        perimeter = lo + sum(L)
        details[f"chain{k}"] = {"two_longest": L[0] + L[1], "half_perimeter": perimeter / 2}
        ok &= L[0] + L[1] <= perimeter / 2
    if ok:
        return ConnectednessReport(True, "two longest edges of each chain fit in half the perimeter "
                                   "at d = |a-b|; every fiber is connected", details=details)
    triple = None
    for k in (1, 2):
        triple = long_edge_triple([lo, *spec.chains[k].lengths]) if lo > 0 else None
        if triple is not None:
            details["triple_chain"] = k
            break
    return ConnectednessReport(False, "criterion not met; not certified", triple, details=details)


# ---------------------------------------------------------------------------
# slide_path
# ---------------------------------------------------------------------------

@dataclass
class Stage:
    joint: int
    kind: str  # straighten | triangle | slide+triangle
    waypoints: int


@dataclass
class PathResult:
    waypoints: list[Configuration]
    target_distance: float
    achieved: bool
    stages: list[Stage] = field(default_factory=list)
    final_distance: float = float("nan")
    diagnostic: str = ""

    @property
    def stage_count(self) -> int:
        return len(self.stages)

    def to_json(self) -> dict:
        return {
            "target_distance": self.target_distance,
            "achieved": self.achieved,
            "final_distance": self.final_distance,
            "stages": [{"joint": s.joint, "kind": s.kind, "waypoints": s.waypoints} for s in self.stages],
            "waypoints": [list(w.angles[0]) for w in self.waypoints],
            "diagnostic": self.diagnostic,
        }


def _vertices(lengths: np.ndarray, phi: np.ndarray) -> np.ndarray:
    steps = lengths * np.exp(1j * phi)
    return np.concatenate([[0.0 + 0.0j], np.cumsum(steps)])


def _wrap_pi(x):
    return (np.asarray(x) + math.pi) % TWO_PI - math.pi


def _interp(phi0: np.ndarray, phi1: np.ndarray, delta: float) -> list[np.ndarray]:
    """Linear angle moves from phi0 to phi1 (shortest way round), excluding phi0."""
    diff = _wrap_pi(phi1 - phi0)
    steps = max(1, int(math.ceil(float(np.max(np.abs(diff), initial=0.0)) / delta - 1e-12)))
    return [phi0 + diff * (k / steps) for k in range(1, steps + 1)]


def _span(lengths, phi) -> float:
    return float(abs(np.sum(lengths * np.exp(1j * phi))))


def _range(lengths) -> tuple[float, float]:
    total = float(np.sum(lengths))
    return max(0.0, 2.0 * float(np.max(lengths)) - total), total


def _slide(lengths: np.ndarray, phi: np.ndarray, target: float, delta: float,
           stages: list | None) -> list[np.ndarray]:
    """Frames moving ``phi`` to a configuration with end at ``(target, 0)``."""
    n = lengths.size
    frames = []
    tol = 1e-12 * float(np.sum(lengths))
    end = np.sum(lengths * np.exp(1j * phi))
    if abs(end) > tol:
        frames += _interp(phi, phi - np.angle(end), delta)
        phi = frames[-1].copy() if frames else phi
    P = 0.0
    for i in range(n):
        before = len(frames)
        rest = lengths[i + 1:]
        chord = np.sum(rest * np.exp(1j * phi[i + 1:])) if rest.size else 0j
        l_rest = abs(chord)
        R = target - P
        d = lengths[i]
        if P + d + l_rest <= target + tol:
            # lay edge i flat; the remainder keeps its shape, chord on the axis
            new = phi.copy()
            new[i] = 0.0
            if rest.size and l_rest > tol:
                new[i + 1:] = phi[i + 1:] - np.angle(chord)
            frames += _interp(phi, new, delta)
            phi = new
            P += d
            if stages is not None:
                stages.append(Stage(i + 1, "straighten", len(frames) - before))
            if P + l_rest >= target - tol:
                break
            continue
        kind = "triangle"
        lo_r, hi_r = _range(rest) if rest.size else (0.0, 0.0)
        lo_t, hi_t = abs(R - d), R + d
        if not (lo_t - tol <= l_rest <= hi_t + tol):
            # remainder span must change first; move it inside its own frame
            want = min(max(l_rest, max(lo_r, lo_t)), min(hi_r, hi_t))
            psi = np.angle(chord) if l_rest > tol else 0.0
            local = phi[i + 1:] - psi
            for f in _slide(rest, local, want, delta, None):
                new = phi.copy()
                new[i + 1:] = f + psi
                frames.append(new)
            phi = frames[-1].copy()
            chord = np.sum(rest * np.exp(1j * phi[i + 1:]))
            l_rest = abs(chord)
            kind = "slide+triangle"
        # triangle with sides d (edge i), l_rest (remainder) and R (to the target)
        if R <= tol:
            alpha = math.pi if l_rest > tol else 0.0
            cos_a = None
        else:
            cos_a = (d * d + R * R - l_rest * l_rest) / (2.0 * d * R)
            alpha = math.acos(max(-1.0, min(1.0, cos_a)))
        side = 1.0 if math.sin(phi[i]) >= 0 else -1.0
        new = phi.copy()
        new[i] = side * alpha
        joint = complex(P, 0.0) + d * complex(math.cos(new[i]), math.sin(new[i]))
        if rest.size:
            to_target = complex(target, 0.0) - joint
            if l_rest > tol:
                new[i + 1:] = phi[i + 1:] - np.angle(chord) + np.angle(to_target)
        frames += _interp(phi, new, delta)
        phi = new
        if stages is not None:
            stages.append(Stage(i + 1, kind, len(frames) - before))
        break
    return frames


def slide_path(chain: FreeLinkageSpec, start: Configuration, target_distance: float, *,
               delta: float = DELTA_STEP) -> PathResult:
    """Path of open-chain configurations ending at end-to-end distance ``target_distance``."""
    chain = chain if isinstance(chain, FreeLinkageSpec) else FreeLinkageSpec(chain)
    rng = length_range(chain)
    scale = chain.total
    if not (rng.lo - 1e-12 * scale <= target_distance <= rng.hi + 1e-12 * scale):
        raise LinkageError(f"target {target_distance} outside length range [{rng.lo}, {rng.hi}]")
    if len(start.angles) != 1 or len(start.angles[0]) != len(chain):
        raise LinkageError("start must be a single-chain configuration matching the chain")
    lengths = np.array(chain.lengths)
    phi0 = np.array(start.angles[0], dtype=np.float64)
    stages: list[Stage] = []
    frames = _slide(lengths, phi0, float(target_distance), delta, stages)
    frames = [phi0] + frames
    waypoints = [Configuration([np.mod(f, TWO_PI)], pinned=False) for f in frames]
    final = _span(lengths, frames[-1])
    err = abs(final - target_distance)
    achieved = err <= EPS_CLOSURE
    diag = "" if achieved else f"final distance off by {err:.3g}"
    return PathResult(waypoints, float(target_distance), achieved, stages, final, diag)


# ---------------------------------------------------------------------------
# keychain loop
# ---------------------------------------------------------------------------

def _chain_shapes(chain: FreeLinkageSpec, spans: np.ndarray) -> list[np.ndarray]:
    """Chain shapes with chord on the +x axis, one per span, varying continuously."""
    lengths = np.array(chain.lengths)
    straight = np.zeros(lengths.size)
    first = slide_path(chain, Configuration([straight], pinned=False), float(spans[0]))
    phi = np.array(first.waypoints[-1].angles[0])
    shapes = []
    for s in spans:
        spec = MultipolygonSpec([[float(s)], list(chain.lengths)]) if s > 0 else None
        moved = None
        if spec is not None:
            try:
                cfg = project_to_variety(Configuration([[0.0], phi.tolist()]), spec)
                moved = np.array(cfg.angles[1])
            except ProjectionError:
                moved = None
        if moved is None or np.max(np.abs(_wrap_pi(moved - phi))) > 10 * DELTA_STEP:
            res = slide_path(chain, Configuration([phi], pinned=False), float(s))
            moved = np.array(res.waypoints[-1].angles[0])
        phi = moved
        shapes.append(phi.copy())
    return shapes


def keychain_loop(spec: MultipolygonSpec, *, delta: float = DELTA_STEP) -> list[Configuration]:
    """Closed loop of configurations meeting every fiber of the inter-edge angle.

    Chain shapes depend on the end-to-end distance only; that distance runs
    up from ``|a-b|`` to ``a+b`` and back as the angle goes round, so the
    loop closes on itself.
    """
    if spec.r != 3 or len(spec.chains[0]) != 2:
        raise LinkageError("needs three chains with a two-edge first chain")
    a, b = spec.chains[0].lengths
    for k in (1, 2):
        if not length_range(spec.chains[k]).contains_interval(abs(a - b), a + b):
            raise LinkageError(f"length range of chain {k} must contain [|a-b|, a+b]")
    m = int(math.ceil(math.pi / delta))
    up = np.linspace(0.0, math.pi, m + 1)
    spans = np.sqrt((a - b) ** 2 + 4.0 * a * b * np.sin(0.5 * up) ** 2)
    shapes2 = _chain_shapes(spec.chains[1], spans)
    shapes3 = _chain_shapes(spec.chains[2], spans)
    thetas = np.concatenate([up, TWO_PI - up[-2:0:-1]])
    idx = list(range(m + 1)) + list(range(m - 1, 0, -1))
    loop = []
    for t, j in zip(thetas, idx):
        t21 = math.pi - t
        end = complex(a + b * math.cos(t21), b * math.sin(t21))
        psi = math.atan2(end.imag, end.real)
        loop.append(Configuration([[0.0, t21], (shapes2[j] + psi).tolist(), (shapes3[j] + psi).tolist()]))
    return loop


def loop_residual(loop: list[Configuration], spec: MultipolygonSpec) -> float:
    return max(float(np.linalg.norm(residuals(c, spec))) for c in loop)
