"""Fibers of the inter-edge angle and the Euler characteristic they add up to.

For a two-edge first chain ``(a, b)`` the inter-edge angle ``theta1`` maps the
moduli space onto (part of) the circle.  With the end point fixed at
distance ``d(theta1)``, the fiber is ``P(d, F2) x P(d, F3)``, where ``P(d, F)``
is the space of polygons with sides ``d`` followed by the chain ``F``.  The
fiber type only changes at angles where ``d`` becomes a signed edge sum of
``F2`` or ``F3`` (a wall), so

    chi(M) = sum chi(degenerate fibers) - sum chi(interval fibers)

with the sign coming from compactly supported chi of an open interval.

Angle convention: ``theta1`` is the vertex angle between the two edges, so
``theta1 = pi - theta_21`` where ``theta_21`` is the direction of edge ``b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

from .core import FreeLinkageSpec, LinkageError, MultipolygonSpec, length_range
from .smoothness import _fraction, _scale_for, _signed_sums

TWO_PI = 2.0 * math.pi
EPS_LEN = 1e-9
SAMPLER_N = 40000

_WORDS = {1: "one", 2: "two", 3: "three", 4: "four", 5: "five", 6: "six", 8: "eight"}


def _word(k: int) -> str:
    return _WORDS.get(k, str(k))


class FiberScopeError(LinkageError):
    """Fiber type outside the symbolic table with sampler fallback disabled."""


@dataclass(frozen=True)
class FiberDescriptor:
    kind: str
    chi: int
    components: int
    k: int | None = None
    factors: tuple["FiberDescriptor", ...] = ()
    betti: tuple[int, ...] | None = None

    @property
    def description(self) -> str:
        kind, k = self.kind, self.k
        if kind == "Empty":
            return "empty"
        if kind == "Point":
            return "one point"
        if kind == "TwoPoints":
            return "two points"
        if kind == "Points":
            return f"{_word(k)} points"
        if kind == "Circle":
            return "one circle"
        if kind == "kCircles":
            return f"{_word(k)} circles"
        if kind == "Figure8":
            return "figure-8"
        if kind == "CirclesGluedPairwise":
            return f"{_word(k)} circles, any two of which meet in one point"
        if kind == "Sphere":
            return "sphere"
        if kind == "Surface":
            return f"closed surface of genus {k}"
        if kind == "Copies":
            return f"{_word(k)} copies of {self.factors[0].description}"
        if kind == "Product":
            return " x ".join(f"({f.description})" for f in self.factors)
        if kind == "SingularSurface":
            return "singular surface"
        if kind == "Sampled":
            return f"sampled space, {self.components} component(s), chi {self.chi}"
        if kind == "PolygonSpace":
            return f"polygon space with Betti numbers {list(self.betti)}"
        return kind

    def to_json(self) -> dict:
        out = {"kind": self.kind, "chi": self.chi, "components": self.components,
               "description": self.description}
        if self.k is not None:
            out["k"] = self.k
        if self.betti is not None:
            out["betti"] = list(self.betti)
        if self.factors:
            out["factors"] = [f.to_json() for f in self.factors]
        return out


EMPTY = FiberDescriptor("Empty", 0, 0)
POINT = FiberDescriptor("Point", 1, 1)
TWO_POINTS = FiberDescriptor("TwoPoints", 2, 2)
CIRCLE = FiberDescriptor("Circle", 0, 1)


def points(k: int) -> FiberDescriptor:
    if k == 0:
        return EMPTY
    if k == 1:
        return POINT
    if k == 2:
        return TWO_POINTS
    return FiberDescriptor("Points", k, k, k=k)


def circles(k: int) -> FiberDescriptor:
    if k == 0:
        return EMPTY
    return CIRCLE if k == 1 else FiberDescriptor("kCircles", 0, k, k=k)


def glued_circles(k: int) -> FiberDescriptor:
    # k circles, one gluing point per pair: chi = -(k choose 2)
    return FiberDescriptor("CirclesGluedPairwise", -(k * (k - 1) // 2), 1, k=k)


def surface(chi: int) -> FiberDescriptor:
    if chi == 2:
        return FiberDescriptor("Sphere", 2, 1)
    return FiberDescriptor("Surface", chi, 1, k=(2 - chi) // 2)


def product(*factors: FiberDescriptor) -> FiberDescriptor:
    """Product fiber; chi and component counts multiply."""
    chi, comps = 1, 1
    for f in factors:
        chi *= f.chi
        comps *= f.components
    if any(f.kind == "Empty" for f in factors):
        return EMPTY
    rest = [f for f in factors if f.kind != "Point"]
    if not rest:
        return POINT
    if len(rest) == 1:
        return rest[0]
    finite = [f for f in rest if f.kind in ("TwoPoints", "Points")]
    other = [f for f in rest if f.kind not in ("TwoPoints", "Points")]
    n = 1
    for f in finite:
        n *= f.components
    if not other:
        return points(n)
    if len(other) == 1:
        base = other[0]
        if base.kind == "Circle":
            return circles(n)
        if base.kind == "kCircles":
            return circles(n * base.k)
        return FiberDescriptor("Copies", chi, comps, k=n, factors=(base,))
    return FiberDescriptor("Product", chi, comps, factors=tuple(rest))


# ---------------------------------------------------------------------------
# polygon spaces P(d, F)
# ---------------------------------------------------------------------------

def _close(x, y, scale) -> bool:
    return abs(x - y) <= EPS_LEN * max(1.0, scale)


def polygon_betti(lengths) -> tuple[int, ...] | None:
    """Betti numbers of a planar polygon space off the walls, or None if empty.

    ``b_i = a_i + a_{n-3-i}``, where ``a_i`` counts short subsets of size
    ``i + 1`` that contain a fixed longest side.
    """
    ell = [_fraction(x) for x in lengths]
    n = len(ell)
    half = sum(ell) / 2
    top = max(range(n), key=lambda i: (ell[i], -i))
    if ell[top] >= half:
        return None
    others = [ell[i] for i in range(n) if i != top]
    a = [0] * (n - 2)
    for size in range(n - 2):
        for sub in combinations(others, size):
            if ell[top] + sum(sub, Fraction(0)) < half:
                a[size] += 1
    return tuple(a[i] + a[n - 3 - i] for i in range(n - 2))


def polygon_components(lengths) -> int:
    """Components of a generic planar polygon space: 2 with three long sides, else 1 (0 if empty)."""
    ell = [_fraction(x) for x in lengths]
    half = sum(ell) / 2
    if max(ell) > half:
        return 0
    if max(ell) == half:
        return 1
    for i, j, k in combinations(range(len(ell)), 3):
        if ell[i] + ell[j] > half and ell[i] + ell[k] > half and ell[j] + ell[k] > half:
            return 2
    return 1


def _from_betti(betti: tuple[int, ...]) -> FiberDescriptor:
    chi = sum((-1) ** i * b for i, b in enumerate(betti))
    if len(betti) == 1:
        return points(betti[0])
    if len(betti) == 2:
        return circles(betti[0])
    if len(betti) == 3 and betti[0] == 1:
        return surface(chi)
    return FiberDescriptor("PolygonSpace", chi, betti[0], betti=betti)


def _equilateral_table(x: float, n: int) -> FiberDescriptor | None:
    """Polygons (x, 1, ..., 1) with n unit edges, including the wall values."""
    if n == 3:
        if _close(x, 1.0, 3):
            return glued_circles(3)
        if _close(x, 3.0, 3):
            return POINT
        if 0 < x < 1:
            return circles(2)
        if 1 < x < 3:
            return CIRCLE
    if n == 4:
        if _close(x, 2.0, 4):
            # four collinear cone points between the genus-4 and sphere sides
            return FiberDescriptor("SingularSurface", -2, 1)
        if _close(x, 4.0, 4):
            return POINT
        if 0 < x < 2:
            return surface(-6)
        if 2 < x < 4:
            return surface(2)
    return None


def fiber_descriptor(d: float, chain, *, fallback: bool = True, n_samples: int = SAMPLER_N,
                     seed: int = 0) -> FiberDescriptor:
    """Type of the polygon space with sides ``d`` and the edges of ``chain``."""
    chain = chain if isinstance(chain, FreeLinkageSpec) else FreeLinkageSpec(chain)
    L = chain.lengths
    scale = max(max(L), d)
    if d < 0:
        raise LinkageError("d must be >= 0")
    rng = length_range(chain)
    if d > rng.hi + EPS_LEN * scale or d < rng.lo - EPS_LEN * scale:
        return EMPTY
    if d <= EPS_LEN * scale:
        # closed polygons of the chain, free to rotate about the fixed point
        if len(L) == 1:
            return EMPTY
        closed = fiber_descriptor(L[0], L[1:], fallback=fallback, n_samples=n_samples, seed=seed)
        return product(closed, CIRCLE) if closed.kind != "Empty" else EMPTY
    if len(L) == 1:
        return POINT if _close(d, L[0], scale) else EMPTY
    if len(L) == 2:
        c, e = L
        if _close(d, c + e, scale) or _close(d, abs(c - e), scale):
            return POINT
        return TWO_POINTS
    if len(set(L)) == 1 and len(L) in (3, 4):
        hit = _equilateral_table(d / L[0], len(L))
        if hit is not None:
            return hit
    den = _scale_for([d, *L])
    if not _on_wall(d, L, den):
        betti = polygon_betti([d, *L])
        return EMPTY if betti is None else _from_betti(betti)
    if len(L) > 3 or not fallback:
        raise FiberScopeError(f"no symbolic fiber type for d={d} with chain {L}")
    return _sampled_polygon(d, chain, n_samples, seed)


def _on_wall(d, L, den) -> bool:
    S = _signed_sums(L, den)
    return d in S


def _sampled_polygon(d: float, chain: FreeLinkageSpec, n_samples: int, seed: int) -> FiberDescriptor:
    from .sampler import component_count, graph_chi, sample_variety

    spec = MultipolygonSpec([[d], chain])
    cx = sample_variety(spec, n_samples, seed, check_walls=False)
    dim = len(chain) - 2
    return FiberDescriptor("Sampled", graph_chi(cx, dim), component_count(cx))


# ---------------------------------------------------------------------------
# decomposition over the circle of inter-edge angles
# ---------------------------------------------------------------------------

def distance_of_angle(a: float, b: float, theta1: float) -> float:
    """Distance between the free ends of edges ``a`` and ``b`` meeting at angle ``theta1``."""
    if a <= 0 or b <= 0:
        raise LinkageError("edge lengths must be positive")
    # (a-b)^2 + 4ab sin^2(t/2) avoids cancellation near theta1 = 0
    return math.sqrt((a - b) ** 2 + 4.0 * a * b * math.sin(0.5 * theta1) ** 2)


def angle_of_distance(a: float, b: float, d: float) -> float:
    """Vertex angle in [0, pi] at which the ends are ``d`` apart."""
    cos_t = (a * a + b * b - d * d) / (2.0 * a * b)
    return math.acos(max(-1.0, min(1.0, cos_t)))


def _as_chain(x) -> FreeLinkageSpec:
    return x if isinstance(x, FreeLinkageSpec) else FreeLinkageSpec(x)


def wall_distances(a: float, b: float, d2, d3) -> list[Fraction]:
    """Signed sums of either chain inside ``[|a-b|, a+b]``, exactly."""
    d2, d3 = _as_chain(d2), _as_chain(d3)
    fa, fb = _fraction(a), _fraction(b)
    l2, l3 = d2.exact_lengths(), d3.exact_lengths()
    den = _scale_for([fa, fb, *l2, *l3])
    if den is None:
        raise LinkageError("lengths too fine for exact wall detection")
    lo, hi = abs(fa - fb), fa + fb
    # same margin as fiber_descriptor; near-hits snap onto the interval ends
    tol = Fraction(EPS_LEN) * max(1, hi, *l2, *l3)
    out = set()
    for S in (_signed_sums(l2, den), _signed_sums(l3, den)):
        for v in S.values:
            if abs(v - lo) <= tol:
                out.add(lo)
            elif abs(v - hi) <= tol:
                out.add(hi)
            elif lo < v < hi:
                out.add(v)
    return sorted(out)


def degenerate_angles(a: float, b: float, d2, d3) -> list[float]:
    """Inter-edge angles in [0, 2pi) whose fiber sits on a wall; symmetric under theta -> 2pi - theta."""
    angles = set()
    for s in wall_distances(a, b, d2, d3):
        t = angle_of_distance(a, b, float(s))
        if s == abs(_fraction(a) - _fraction(b)):
            angles.add(0.0)
        elif s == _fraction(a) + _fraction(b):
            angles.add(math.pi)
        else:
            angles.update((t, TWO_PI - t))
    return sorted(angles)


def fiber_at_angle(a: float, b: float, d2, d3, theta1: float, **kw) -> FiberDescriptor:
    d = distance_of_angle(a, b, theta1)
    return product(fiber_descriptor(d, d2, **kw), fiber_descriptor(d, d3, **kw))


@dataclass
class IntervalFiber:
    lo: float
    hi: float
    descriptor: FiberDescriptor
    chi: int


@dataclass
class DegenerateFiber:
    angle: float
    distance: float
    vertex_cos: float
    descriptor: FiberDescriptor
    chi: int


@dataclass
class FiberDecomposition:
    degenerate_angles: list[float]
    interval_fibers: list[IntervalFiber]
    degenerate_fibers: list[DegenerateFiber]
    total_chi: int
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "degenerate_angles": list(self.degenerate_angles),
            "interval_fibers": [
                {"interval": [f.lo, f.hi], "fiber": f.descriptor.to_json(), "chi": f.chi}
                for f in self.interval_fibers
            ],
            "degenerate_fibers": [
                {"angle": f.angle, "distance": f.distance, "vertex_cos": f.vertex_cos,
                 "fiber": f.descriptor.to_json(), "chi": f.chi}
                for f in self.degenerate_fibers
            ],
            "total_chi": self.total_chi,
            "notes": list(self.notes),
        }


def _two_edge_first(spec: MultipolygonSpec):
    if spec.r != 3 or len(spec.chains[0]) != 2:
        raise LinkageError("needs three chains with a two-edge first chain")
    a, b = spec.chains[0].lengths
    return a, b, spec.chains[1], spec.chains[2]


def euler_characteristic(spec: MultipolygonSpec, *, fallback: bool = True,
                         seed: int = 0) -> FiberDecomposition:
    """Fiber decomposition over the inter-edge angle and the resulting chi."""
    a, b, d2, d3 = _two_edge_first(spec)
    kw = {"fallback": fallback, "seed": seed}
    angles = degenerate_angles(a, b, d2, d3)
    cuts = angles if angles else [0.0]
    intervals = []
    for i, lo in enumerate(cuts):
        hi = cuts[i + 1] if i + 1 < len(cuts) else cuts[0] + TWO_PI
        probes = [lo + frac * (hi - lo) for frac in (0.25, 0.5, 0.75)]
        found = [fiber_at_angle(a, b, d2, d3, t % TWO_PI, **kw) for t in probes]
        if len({(f.kind, f.chi, f.components, f.k) for f in found}) != 1:
            raise RuntimeError(f"fiber type changes inside ({lo}, {hi})")
        intervals.append(IntervalFiber(lo, hi, found[1], found[1].chi))
    degenerate = []
    for t in angles:
        d = distance_of_angle(a, b, t)
        f = fiber_at_angle(a, b, d2, d3, t, **kw)
        degenerate.append(DegenerateFiber(t, d, (a * a + b * b - d * d) / (2 * a * b), f, f.chi))
    if angles:
        total = sum(f.chi for f in degenerate) - sum(f.chi for f in intervals)
    else:
        # one fiber times a circle
        total = 0
    return FiberDecomposition(angles, intervals, degenerate, total)


@dataclass(frozen=True)
class ProductCertificate:
    decomposition: str
    chi: int
    components: int
    fiber: FiberDescriptor

    def to_json(self) -> dict:
        return {"decomposition": self.decomposition, "chi": self.chi,
                "components": self.components, "fiber": self.fiber.to_json()}


def product_structure(spec: MultipolygonSpec) -> ProductCertificate | None:
    """Product certificate when no distance in ``[|a-b|, a+b]`` is a wall."""
    a, b, d2, d3 = _two_edge_first(spec)
    if wall_distances(a, b, d2, d3):
        return None
    d = 0.5 * (abs(a - b) + a + b)
    comps = polygon_components([d, *d2.lengths]) * polygon_components([d, *d3.lengths])
    fiber = fiber_at_angle(a, b, d2, d3, angle_of_distance(a, b, d), fallback=False)
    return ProductCertificate("P(d, F2) x P(d, F3) x S^1, any d in [|a-b|, a+b]",
                              0, comps, fiber)


def fibered_product_components(m12, m13, base=None) -> int:
    """Components of ``M12 x_B M13`` from per-component base footprints.

    Each pair of components contributes the number of connected pieces of
    the overlap of their footprints on the base grid.  A zero-dimensional
    base gives the plain product count.
    """
    if m12.count == 0 or m13.count == 0:
        return 0
    if m12.base_dim == 0:
        return m12.count * m13.count
    res = m12.resolution
    total = 0
    for c12 in m12.cells:
        for c13 in m13.cells:
            total += _pieces(c12 & c13, res)
    return total


def _pieces(cells: frozenset, res: int) -> int:
    """Connected pieces of a set of grid cells on the torus (face adjacency)."""
    left = set(cells)
    count = 0
    while left:
        count += 1
        stack = [left.pop()]
        while stack:
            cell = stack.pop()
            for axis in range(len(cell)):
                for step in (-1, 1):
                    nb = list(cell)
                    nb[axis] = (nb[axis] + step) % res
                    nb = tuple(nb)
                    if nb in left:
                        left.remove(nb)
                        stack.append(nb)
    return count


# ---------------------------------------------------------------------------
# schematic
# ---------------------------------------------------------------------------

def svg_schematic(dec: FiberDecomposition, size: int = 360) -> str:
    """Circle of inter-edge angles with degenerate angles marked and fiber labels."""
    c = size / 2
    r = size * 0.32
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}" font-family="sans-serif" font-size="10">',
             f'<circle cx="{c}" cy="{c}" r="{r}" fill="none" stroke="black"/>']
    for f in dec.degenerate_fibers:
        x, y = c + r * math.cos(f.angle), c - r * math.sin(f.angle)
        lx, ly = c + 1.18 * r * math.cos(f.angle), c - 1.18 * r * math.sin(f.angle)
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="4" fill="red"/>')
        parts.append(f'<text x="{lx:.2f}" y="{ly:.2f}" text-anchor="middle">'
                     f'{f.angle:.4f}: chi {f.chi}</text>')
    for f in dec.interval_fibers:
        mid = 0.5 * (f.lo + f.hi)
        lx, ly = c + 0.6 * r * math.cos(mid), c - 0.6 * r * math.sin(mid)
        parts.append(f'<text x="{lx:.2f}" y="{ly:.2f}" text-anchor="middle" fill="blue">'
                     f'{f.descriptor.description}</text>')
    parts.append(f'<text x="{c}" y="{size - 8}" text-anchor="middle">total chi = {dec.total_chi}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
