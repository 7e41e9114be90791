"""Smoothness certificates and the block Jacobian of a three-chain linkage.

The closure map of ``(F1, F2, F3)`` has Jacobian

    [[A  B1  0 ]
     [0  B2  C ]]

with columns ordered chain 2, chain 1 (free angles), chain 3.  Rank 4
everywhere on the variety means the moduli space is a smooth manifold.
Rank can only drop when a whole chain lies on a line, so the symbolic checks
reduce to membership questions about the sets of signed edge sums, which are
decided exactly on a common integer scale.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from .core import (
    EPS_CLOSURE,
    Configuration,
    FreeLinkageSpec,
    LinkageError,
    MultipolygonSpec,
    ProjectionError,
    project_to_variety,
    residuals,
)

MAX_SIGNED_EDGES = 24
RANK_TOL = 1e-8
OFF_VARIETY_FACTOR = 1e3
EPS_LEN = 1e-9
_INT_LIMIT = 2**62


class SignedSumSizeError(LinkageError):
    """Chain too long to enumerate its 2^n signed sums."""


class OffVarietyError(LinkageError):
    """Configuration is too far from the closure variety."""


def _fraction(x) -> Fraction:
    """Exact value; floats are read by their shortest decimal repr."""
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class SignedSumSet:
    """All values ``±d1 ± ... ± dn``, stored as sorted integers over ``denominator``.

    With ``exact=False`` the integers are replaced by floats and comparisons
    use a relative margin.
    """

    scaled: np.ndarray
    denominator: int
    exact: bool = True

    def __len__(self) -> int:
        return int(self.scaled.size)

    @property
    def values(self) -> tuple:
        if self.exact:
            return tuple(Fraction(int(v), self.denominator) for v in self.scaled)
        return tuple(float(v) for v in self.scaled)

    def as_floats(self) -> np.ndarray:
        return self.scaled.astype(np.float64) / self.denominator

    def __contains__(self, x) -> bool:
        if self.exact:
            q = _fraction(x) * self.denominator
            if q.denominator != 1:
                return False
            i = np.searchsorted(self.scaled, q.numerator)
            return bool(i < self.scaled.size and self.scaled[i] == q.numerator)
        tol = EPS_LEN * max(1.0, float(np.max(np.abs(self.scaled))))
        return bool(np.any(np.abs(self.scaled - float(x)) <= tol))


def _scale_for(values) -> int | None:
    """Least common denominator of ``values`` if the scaled sums fit in int64."""
    fr = [_fraction(v) for v in values]
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    if sum(abs(f) for f in fr) * den >= _INT_LIMIT:
        return None
    return den


def _sums(lengths: np.ndarray) -> np.ndarray:
    out = np.zeros(1, dtype=lengths.dtype)
    for d in lengths:
        out = np.unique(np.concatenate([out - d, out + d]))
    return out


def _signed_sums(lengths, den: int | None) -> SignedSumSet:
    if len(lengths) > MAX_SIGNED_EDGES:
        raise SignedSumSizeError(f"signed sums need n <= {MAX_SIGNED_EDGES}, got {len(lengths)}")
    if den is None:
        return SignedSumSet(_sums(np.array([float(d) for d in lengths])), 1, exact=False)
    ints = np.array([int(_fraction(d) * den) for d in lengths], dtype=np.int64)
    return SignedSumSet(_sums(ints), den, exact=True)


def signed_sum_set(spec: FreeLinkageSpec) -> SignedSumSet:
    """Exact set of all signed edge sums of a chain (n <= 24)."""
    if len(spec) > MAX_SIGNED_EDGES:
        raise SignedSumSizeError(f"signed sums need n <= {MAX_SIGNED_EDGES}, got {len(spec)}")
    lengths = spec.exact_lengths()
    return _signed_sums(lengths, _scale_for(lengths))


@dataclass
class SmoothnessReport:
    is_smooth_manifold: bool
    dimension: int
    witnessed_condition: str
    counterexample_config: Configuration | None = None
    applicable: bool = True
    corollary_branch: int | None = None
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = asdict(self)
        out["counterexample_config"] = (
            None if self.counterexample_config is None else self.counterexample_config.to_json()
        )
        return out


def check_gensmooth(a: float, n1: int, n2: int, n3: int) -> SmoothnessReport:
    """Unit chains with one special first edge ``a``: parity and range test."""
    dim = n1 + n2 + n3 - 5
    opposite = (n2 % 2) != (n3 % 2)
    b = min(n2, n3)
    fa = _fraction(a)
    in_range = 0 < fa < b and fa.denominator != 1
    if opposite and in_range:
        return SmoothnessReport(True, dim, "opposite parity of n2, n3 and a in (0, min(n2, n3)) minus integers")
    reasons = []
    if not opposite:
        reasons.append("n2 and n3 have the same parity")
    if not 0 < fa < b:
        reasons.append(f"a outside (0, {b})")
    elif fa.denominator == 1:
        reasons.append("a is an integer")
    return SmoothnessReport(False, dim, "not certified: " + "; ".join(reasons))


def _corollary_branch(fa, fb, d2: FreeLinkageSpec, d3: FreeLinkageSpec) -> int | None:
    """Branch of the unit-chain specialization that holds, if any."""
    if set(d2.lengths) != {1.0} or set(d3.lengths) != {1.0}:
        return None
    n2, n3 = len(d2), len(d3)
    lo, hi = abs(fa - fb), fa + fb
    if n2 % 2 != n3 % 2:
        return 1 if lo.denominator != 1 and hi.denominator != 1 else None
    first = math.ceil(lo)
    parity = n2 % 2  # 1: odd integers, 0: even integers
    k = first if first % 2 == parity else first + 1
    if k > hi:
        return 2 if parity == 1 else 3
    return None


def check_nointsmooth(a: float, b: float, d2: FreeLinkageSpec, d3: FreeLinkageSpec) -> SmoothnessReport:
    """Decide the disjointness conditions on ``D = {|a-b|, a+b}``, ``D2`` and ``D3``."""
    d2 = d2 if isinstance(d2, FreeLinkageSpec) else FreeLinkageSpec(d2)
    d3 = d3 if isinstance(d3, FreeLinkageSpec) else FreeLinkageSpec(d3)
    dim = len(d2) + len(d3) - 3
    fa, fb = _fraction(a), _fraction(b)
    l2, l3 = d2.exact_lengths(), d3.exact_lengths()
    if not fa + fb < min(sum(l2), sum(l3)):
        return SmoothnessReport(False, dim, "not applicable: a + b >= min(sum d2, sum d3)", applicable=False)
    den = _scale_for([fa, fb, *l2, *l3])
    S2, S3 = _signed_sums(l2, den), _signed_sums(l3, den)
    D = sorted({abs(fa - fb), fa + fb})
    branch = _corollary_branch(fa, fb, d2, d3)

    meet = _intersection(S2, S3)
    D_hits = [s for s in D if s in S2 or s in S3]
    lo, hi = D[0], D[-1]
    window = [s for s in meet if lo <= s <= hi]
    details = {
        "D": [str(s) for s in D],
        "D_meets_D2_or_D3": [str(s) for s in D_hits],
        "D2_meets_D3": bool(len(meet)),
        "interval_meets_D2_and_D3": [str(s) for s in window],
    }
    if not D_hits and not len(meet):
        return SmoothnessReport(True, dim, "D, D2, D3 pairwise disjoint", corollary_branch=branch,
                                details=details)
    if not D_hits and not window:
        return SmoothnessReport(True, dim,
                                "D2 meets D3 but not inside [|a-b|, a+b], and D misses D2 and D3",
                                corollary_branch=branch, details=details)
    return SmoothnessReport(False, dim, "not certified", corollary_branch=branch, details=details)


def _intersection(S2: SignedSumSet, S3: SignedSumSet) -> list:
    if S2.exact and S3.exact and S2.denominator == S3.denominator:
        common = np.intersect1d(S2.scaled, S3.scaled)
        return [Fraction(int(v), S2.denominator) for v in common]
    x2, x3 = S2.as_floats(), S3.as_floats()
    tol = EPS_LEN * max(1.0, float(np.abs(x2).max()), float(np.abs(x3).max()))
    idx = np.clip(np.searchsorted(x3, x2), 1, max(1, x3.size - 1))
    near = np.minimum(np.abs(x2 - x3[idx - 1]), np.abs(x2 - x3[np.minimum(idx, x3.size - 1)]))
    return [float(v) for v in x2[near <= tol]]


# ---------------------------------------------------------------------------
# Jacobian
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class JacobianMatrix:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        n2, n1, n3 = self.A.shape[1], self.B1.shape[1], self.C.shape[1]
        top = np.hstack([self.A, self.B1, np.zeros((2, n3))])
        bottom = np.hstack([np.zeros((2, n2)), self.B2, self.C])
        return np.vstack([top, bottom])


def _require_three(spec: MultipolygonSpec) -> None:
    if spec.r != 3:
        raise LinkageError("the block Jacobian needs three chains")


def jacobian(config: Configuration, spec: MultipolygonSpec, *, check: bool = True) -> JacobianMatrix:
    _require_three(spec)
    if check:
        res = float(np.linalg.norm(residuals(config, spec)))
        if res > OFF_VARIETY_FACTOR * EPS_CLOSURE:
            raise OffVarietyError(f"configuration is off the variety (residual {res:.3g})")
    l1, l2, l3 = (np.array(c.lengths) for c in spec.chains)
    t1, t2, t3 = (np.array(t) for t in config.angles)
    A = np.vstack([l2 * np.sin(t2), -l2 * np.cos(t2)])
    C = np.vstack([l3 * np.sin(t3), -l3 * np.cos(t3)])
    B = np.vstack([-l1[1:] * np.sin(t1[1:]), l1[1:] * np.cos(t1[1:])])
    return JacobianMatrix(A, B, B.copy(), C)


def block_permutation(spec: MultipolygonSpec) -> np.ndarray:
    """Column order of the block layout in terms of flat free-vector indices."""
    n1 = len(spec.chains[0]) - 1
    n2, n3 = len(spec.chains[1]), len(spec.chains[2])
    return np.concatenate([np.arange(n1, n1 + n2), np.arange(n1), np.arange(n1 + n2, n1 + n2 + n3)])


def jacobian_batch(X: np.ndarray, spec: MultipolygonSpec) -> np.ndarray:
    """Assembled block Jacobians for a batch of flat free vectors, shape (N, 4, n)."""
    _require_three(spec)
    X = np.atleast_2d(X)
    w, cid, _ = spec.layout()
    s, c = w * np.sin(X), w * np.cos(X)
    J = np.zeros((X.shape[0], 4, X.shape[1]))
    own = cid == 0
    J[:, 0, own], J[:, 1, own] = -s[:, own], c[:, own]
    J[:, 2, own], J[:, 3, own] = -s[:, own], c[:, own]
    for k, row in ((1, 0), (2, 2)):
        m = cid == k
        J[:, row, m], J[:, row + 1, m] = s[:, m], -c[:, m]
    return J[:, :, block_permutation(spec)]


def numeric_rank(J, tol: float = RANK_TOL) -> int:
    """Singular values above ``tol * sigma_max``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    M = J.matrix if isinstance(J, JacobianMatrix) else np.asarray(J, dtype=np.float64)
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def numeric_rank_batch(J: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    sv = np.linalg.svd(J, compute_uv=False)
    top = sv[:, :1]
    return np.where(top[:, 0] > 0, np.sum(sv > tol * top, axis=1), 0)


# ---------------------------------------------------------------------------
# straight-line witnesses
# ---------------------------------------------------------------------------

def _signs_for(lengths, target, tol) -> tuple[int, ...] | None:
    """Sign vector with ``sum(sign * length) == target``, if one exists."""
    best = None
    for signs in product((1, -1), repeat=len(lengths)):
        if abs(sum(s * d for s, d in zip(signs, lengths)) - target) <= tol:
            best = signs
            break
    return best


def straight_line_witness(a: float, b: float, d2, d3, *, seed: int = 0,
                          attempts: int = 64, max_edges: int = 16) -> Configuration | None:
    """A configuration with a whole chain on a line that gives rank <= 3.

    Two constructions: the first chain straight on the x-axis with one other
    chain folded onto the axis (needs ``D`` to meet ``D2`` or ``D3``), or both
    other chains folded onto the line through the common endpoint (needs
    ``[|a-b|, a+b]`` to meet ``D2`` and ``D3``).  The remaining chain is
    closed up by projection.
    """
    d2 = d2 if isinstance(d2, FreeLinkageSpec) else FreeLinkageSpec(d2)
    d3 = d3 if isinstance(d3, FreeLinkageSpec) else FreeLinkageSpec(d3)
    if max(len(d2), len(d3)) > max_edges:
        return None
    spec = MultipolygonSpec([[a, b], d2, d3])
    tol = 1e-9 * max(a, b, max(d2.lengths), max(d3.lengths))
    S2, S3 = signed_sum_set(d2).as_floats(), signed_sum_set(d3).as_floats()
    rng = np.random.default_rng(seed)

    def hit(S, s):
        return bool(np.any(np.abs(S - s) <= tol))

    # both chains on the line through the end point
    lo, hi = abs(a - b), a + b
    for s in sorted(set(S2[(S2 >= lo - tol) & (S2 <= hi + tol)].tolist())):
        if not hit(S3, s):
            continue
        cos_t = (s * s - a * a - b * b) / (2 * a * b)
        t21 = math.acos(max(-1.0, min(1.0, cos_t)))
        end = complex(a + b * math.cos(t21), b * math.sin(t21))
        phi = math.atan2(end.imag, end.real) if abs(end) > tol else 0.0
        sig2, sig3 = _signs_for(d2.lengths, abs(end), tol), _signs_for(d3.lengths, abs(end), tol)
        if sig2 is None or sig3 is None:
            continue
        ang2 = [phi if g > 0 else phi + math.pi for g in sig2]
        ang3 = [phi if g > 0 else phi + math.pi for g in sig3]
        cfg = Configuration([[0.0, t21], ang2, ang3])
        if np.linalg.norm(residuals(cfg, spec)) <= OFF_VARIETY_FACTOR * EPS_CLOSURE:
            return cfg

    # first chain straight on the axis, one other chain folded onto it
    for t21, x in ((0.0, a + b), (math.pi, a - b)):
        for k, (chain, S) in enumerate(((d2, S2), (d3, S3)), start=1):
            if not hit(S, x):
                continue
            signs = _signs_for(chain.lengths, x, tol)
            if signs is None:
                continue
            line = [0.0 if g > 0 else math.pi for g in signs]
            other = d3 if k == 1 else d2
            n1 = 1
            fixed = [0] + list(range(n1 + (0 if k == 1 else len(d2)),
                                     n1 + (len(d2) if k == 1 else len(d2) + len(d3))))
            for _ in range(attempts):
                guess = rng.uniform(0.0, 2 * math.pi, len(other)).tolist()
                angles = [[0.0, t21], line, guess] if k == 1 else [[0.0, t21], guess, line]
                try:
                    return project_to_variety(Configuration(angles), spec, fixed=fixed)
                except ProjectionError:
                    continue
    return None
