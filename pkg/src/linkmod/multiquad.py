"""Symbolic classification of multiquadrilateral moduli spaces.

All three chains have two edges: ``(a, b)``, ``(c, d)`` and ``(e, f)``.  The
chains are reordered so that ``a + b`` is the smallest pair sum; after that
the image of the inter-edge angle of the first chain is empty, a single
point, the whole circle (case A) or an interval around pi (case B), and the
topology is read off a four-bit vector of collapsible/foldable flags.

Equalities are decided exactly when the lengths are :class:`fractions.Fraction`
and with a relative tolerance ``EPS_LEN`` otherwise.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

from .core import LinkageError, MultipolygonSpec

EPS_LEN = 1e-9
TWO_PI = 2.0 * math.pi


class NonGenericError(LinkageError):
    """a = b, c = d and e = f hold simultaneously."""


@dataclass(frozen=True)
class MultiquadSpec:
    a: float
    b: float
    c: float
    d: float
    e: float
    f: float
    permutation: tuple[int, int, int] = (0, 1, 2)
    exact: bool = False

    @classmethod
    def from_lengths(cls, a, b, c, d, e, f) -> "MultiquadSpec":
        return cls.from_pairs([(a, b), (c, d), (e, f)])

    @classmethod
    def from_pairs(cls, pairs: Sequence[Sequence]) -> "MultiquadSpec":
        pairs = [tuple(p) for p in pairs]
        if len(pairs) != 3 or any(len(p) != 2 for p in pairs):
            raise LinkageError("a multiquadrilateral needs three two-edge chains")
        values = [v for p in pairs for v in p]
        exact = all(isinstance(v, (Fraction, int)) for v in values)
        if any(v <= 0 for v in values):
            raise LinkageError("edge lengths must be positive")
        if not exact:
            pairs = [tuple(float(v) for v in p) for p in pairs]
        else:
            pairs = [tuple(Fraction(v) for v in p) for p in pairs]
        sums = [p[0] + p[1] for p in pairs]
        first = min(range(3), key=lambda k: (sums[k], k))
        perm = (first,) + tuple(k for k in range(3) if k != first)
        (a, b), (c, d), (e, f) = (pairs[k] for k in perm)
        return cls(a, b, c, d, e, f, perm, exact)

    @classmethod
    def from_multipolygon(cls, spec: MultipolygonSpec) -> "MultiquadSpec":
        if spec.r != 3 or any(len(ch) != 2 for ch in spec.chains):
            raise LinkageError("multiquad classification needs three two-edge chains")
        return cls.from_pairs([ch.lengths for ch in spec.chains])

    def pair(self, chain: int):
        return {1: (self.a, self.b), 2: (self.c, self.d), 3: (self.e, self.f)}[chain]

    def to_multipolygon(self) -> MultipolygonSpec:
        return MultipolygonSpec([[float(v) for v in self.pair(k)] for k in (1, 2, 3)])

    def scaled(self, factor) -> "MultiquadSpec":
        vals = [factor * v for v in (self.a, self.b, self.c, self.d, self.e, self.f)]
        return MultiquadSpec(*vals, permutation=self.permutation, exact=self.exact)

    def _tol(self):
        if self.exact:
            return 0
        return EPS_LEN * max(self.a, self.b, self.c, self.d, self.e, self.f)

    def eq(self, x, y) -> bool:
        return abs(x - y) <= self._tol()

    def ge(self, x, y) -> bool:
        return x >= y - self._tol()

    def is_generic(self) -> bool:
        return not (self.eq(self.a, self.b) and self.eq(self.c, self.d) and self.eq(self.e, self.f))


@dataclass(frozen=True)
class VVector:
    v1: bool
    v2: bool
    v3: bool
    v4: bool

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (int(self.v1), int(self.v2), int(self.v3), int(self.v4))

    @property
    def pairs(self):
        t = self.as_tuple()
        return (t[0], t[1]), (t[2], t[3])

    def zero_pairs(self) -> int:
        return sum(p == (0, 0) for p in self.pairs)

    def one_pairs(self) -> int:
        return sum(p == (1, 1) for p in self.pairs)

    def ones_even(self) -> int:
        # 1-based even positions: v2 and v4
        return int(self.v2) + int(self.v4)

    def ones_odd(self) -> int:
        return int(self.v1) + int(self.v3)


@dataclass(frozen=True)
class AngleImage:
    kind: str  # Empty | SinglePoint | FullCircle | ClosedInterval
    theta_min: float | None = None
    theta_max: float | None = None
    restricting: tuple[int, ...] = ()


@dataclass(frozen=True)
class ClassificationResult:
    case_label: str  # Empty | OnePoint | TwoPoints | CaseA | CaseB
    components: int
    fiber_at_0: int | None
    fiber_at_pi: int | None
    fiber_at_extremes: int | None
    homeo_description: str
    v: VVector | None
    euler_characteristic: int
    image: AngleImage
    permutation: tuple[int, int, int] = (0, 1, 2)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = asdict(self)
        out["v"] = list(self.v.as_tuple()) if self.v is not None else None
        out["permutation"] = list(self.permutation)
        out["image"]["restricting"] = list(self.image.restricting)
        return out

    def summary(self) -> str:
        v = "" if self.v is None else f" v={self.v.as_tuple()}"
        return (f"{self.case_label}{v}: {self.homeo_description}; "
                f"{self.components} component(s), chi={self.euler_characteristic}")


def _check_chain(chain: int) -> None:
    if chain not in (2, 3):
        raise LinkageError("chain must be 2 or 3")


def collapsible(spec: MultiquadSpec, chain: int) -> bool:
    """The chain can lie straight with inter-edge angle pi."""
    _check_chain(chain)
    x, y = spec.pair(chain)
    return spec.eq(spec.a + spec.b, x + y)


def foldable(spec: MultiquadSpec, chain: int) -> bool:
    """The chain can lie straight folded back on itself."""
    _check_chain(chain)
    own = abs(spec.c - spec.d) if chain == 2 else abs(spec.e - spec.f)
    other = abs(spec.e - spec.f) if chain == 2 else abs(spec.c - spec.d)
    return spec.ge(own, abs(spec.a - spec.b)) and spec.ge(own, other)


def _min_angle(a, b, diff) -> float:
    """Smallest inter-edge angle of (a, b) whose diagonal reaches ``diff``."""
    a, b, diff = float(a), float(b), float(diff)
    cos_t = (a * a + b * b - diff * diff) / (2.0 * a * b)
    return math.acos(max(-1.0, min(1.0, cos_t)))


def angle_image(spec: MultiquadSpec) -> AngleImage:
    """Image of the first chain's inter-edge angle over the moduli space."""
    s = spec.a + spec.b
    if not (spec.ge(spec.c + spec.d, s) and spec.ge(spec.e + spec.f, s)):
        raise LinkageError("spec is not normalized: a + b must be the minimal pair sum")
    diffs = {2: abs(spec.c - spec.d), 3: abs(spec.e - spec.f)}
    if any(not spec.ge(s, dv) for dv in diffs.values()):
        return AngleImage("Empty")
    hit = tuple(k for k, dv in diffs.items() if spec.eq(s, dv))
    if hit:
        return AngleImage("SinglePoint", math.pi, math.pi, hit)
    ab = abs(spec.a - spec.b)
    if all(spec.ge(ab, dv) for dv in diffs.values()):
        return AngleImage("FullCircle", 0.0, TWO_PI)
    widest = max(diffs.values())
    restricting = tuple(k for k, dv in diffs.items() if spec.eq(dv, widest))
    theta_min = _min_angle(spec.a, spec.b, widest)
    return AngleImage("ClosedInterval", theta_min, TWO_PI - theta_min, restricting)


def _points_at(spec: MultiquadSpec, diag, chain: int) -> int:
    """Configurations of a two-edge chain spanning the diagonal ``diag``."""
    x, y = spec.pair(chain)
    if spec.eq(diag, abs(x - y)) or spec.eq(diag, x + y):
        return 1
    if spec.ge(diag, abs(x - y)) and spec.ge(x + y, diag):
        return 2
    return 0


def v_vector(spec: MultiquadSpec, image: AngleImage | None = None) -> VVector:
    image = image or angle_image(spec)
    if image.kind == "ClosedInterval":
        return VVector(collapsible(spec, 2), 2 in image.restricting,
                       collapsible(spec, 3), 3 in image.restricting)
    return VVector(collapsible(spec, 2), foldable(spec, 2), collapsible(spec, 3), foldable(spec, 3))


def classify(spec: MultiquadSpec) -> ClassificationResult:
    if not spec.is_generic():
        raise NonGenericError("non-generic multiquadrilateral (a=b, c=d and e=f)")
    image = angle_image(spec)
    perm = spec.permutation
    if image.kind == "Empty":
        return ClassificationResult("Empty", 0, 0, 0, None, "empty", None, 0, image, perm)
    if image.kind == "SinglePoint":
        s = spec.a + spec.b
        n = _points_at(spec, s, 2) * _points_at(spec, s, 3)
        label = "OnePoint" if n == 1 else "TwoPoints"
        desc = "one point" if n == 1 else "two points"
        return ClassificationResult(label, n, None, n, None, desc, None, n, image, perm)

    v = v_vector(spec, image)
    comps = 2 ** v.zero_pairs()
    at_pi = 2 ** (2 - v.ones_odd())
    at_ends = 2 ** (2 - v.ones_even())
    if image.kind == "FullCircle":
        # four theta-circles; every point where m strands meet lowers chi by m - 1
        chi = (at_ends - 4) + (at_pi - 4)
        desc = "four circles" if comps == 4 else f"four circles glued into {comps} component(s)"
        return ClassificationResult("CaseA", comps, at_ends, at_pi, None, desc, v, chi, image, perm)

    notes = []
    if not image.theta_min > 0.0:
        raise LinkageError("case B needs theta_min > 0")
    # strands end at theta_min/theta_max, so each extreme point of degree m adds 1 - m/2
    chi = 2 * (at_ends - 2) + (at_pi - 4)
    desc = "two figure-8s" if v.one_pairs() else "two circles"
    if comps == 1 and not v.one_pairs():
        notes.append("the two circles meet, giving one component")
    return ClassificationResult("CaseB", comps, None, at_pi, at_ends, desc, v, chi, image, perm, notes)
