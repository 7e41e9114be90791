"""Linkage data model, closure equations and length ranges.

A multipolygon is ``r`` open chains sharing their initial vertex (the origin)
and their terminal vertex.  Configurations are stored as edge directions
measured from the positive x-axis, with the first edge of chain 0 pinned to
angle 0 to quotient out rotations.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _accel

TWO_PI = 2.0 * math.pi
EPS_CLOSURE = 1e-9
ANGLE_TOL = 1e-12
MAX_ITER = 50


class LinkageError(ValueError):
    """Invalid linkage data or arity mismatch."""


class ProjectionError(RuntimeError):
    """Newton projection did not reach the closure variety."""


def _as_lengths(values) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if not out:
        raise LinkageError("a chain needs at least one edge")
    if any(not math.isfinite(v) or v <= 0.0 for v in out):
        raise LinkageError(f"edge lengths must be finite and > 0, got {out}")
    return out


@dataclass(frozen=True)
class FreeLinkageSpec:
    """One open chain, given by its ordered edge lengths."""

    lengths: tuple[float, ...]

    def __init__(self, lengths: Sequence[float]):
        object.__setattr__(self, "lengths", _as_lengths(lengths))

    def __len__(self) -> int:
        return len(self.lengths)

    @property
    def total(self) -> float:
        return float(sum(self.lengths))

    def scaled(self, factor: float) -> "FreeLinkageSpec":
        return FreeLinkageSpec([factor * d for d in self.lengths])

    def reversed(self) -> "FreeLinkageSpec":
        return FreeLinkageSpec(self.lengths[::-1])

    def exact_lengths(self) -> tuple[Fraction, ...]:
        """Lengths as fractions, reading floats by their shortest decimal repr."""
        return tuple(Fraction(repr(d)) for d in self.lengths)


@dataclass(frozen=True)
class MultipolygonSpec:
    """Chains with identified initial and terminal vertices (r = 2 or 3)."""

    chains: tuple[FreeLinkageSpec, ...]

    def __init__(self, chains):
        chains = tuple(c if isinstance(c, FreeLinkageSpec) else FreeLinkageSpec(c) for c in chains)
        if len(chains) not in (2, 3):
            raise LinkageError(f"need 2 or 3 chains, got {len(chains)}")
        object.__setattr__(self, "chains", chains)

    @property
    def r(self) -> int:
        return len(self.chains)

    @property
    def n_free(self) -> int:
        return sum(len(c) for c in self.chains) - 1

    def scaled(self, factor: float) -> "MultipolygonSpec":
        return MultipolygonSpec([c.scaled(factor) for c in self.chains])

    def to_json(self) -> dict:
        return {"chains": [list(c.lengths) for c in self.chains]}

    @classmethod
    def from_json(cls, data: dict) -> "MultipolygonSpec":
        if not isinstance(data, dict) or "chains" not in data:
            raise LinkageError('spec JSON must be an object with a "chains" key')
        return cls(data["chains"])

    @classmethod
    def load(cls, path) -> "MultipolygonSpec":
        return cls.from_json(json.loads(Path(path).read_text()))

    # flat layout shared with the kernels
    def layout(self):
        """``(w, cid, a0)``: per-variable length, chain index, pinned edge length."""
        w, cid = [], []
        for k, chain in enumerate(self.chains):
            lengths = chain.lengths[1:] if k == 0 else chain.lengths
            w.extend(lengths)
            cid.extend([k] * len(lengths))
        return np.array(w, dtype=np.float64), np.array(cid, dtype=np.int64), self.chains[0].lengths[0]


def wrap_angle(theta: float) -> float:
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI - ANGLE_TOL:
        t = 0.0
    return t


def angle_distance(a: float, b: float) -> float:
    """Distance between two angles on the circle."""
    d = abs(wrap_angle(a) - wrap_angle(b))
    return min(d, TWO_PI - d)


@dataclass(frozen=True)
class Configuration:
    """Edge directions, one tuple per chain; ``angles[0][0]`` is pinned to 0."""

    angles: tuple[tuple[float, ...], ...]
    pinned: bool = True

    def __init__(self, angles, pinned: bool = True):
        ang = tuple(tuple(wrap_angle(float(t)) for t in chain) for chain in angles)
        if pinned and ang and ang[0] and ang[0][0] != 0.0:
            raise LinkageError("pinned configuration needs theta_{1,1} = 0")
        object.__setattr__(self, "angles", ang)
        object.__setattr__(self, "pinned", pinned)

    def free_vector(self) -> np.ndarray:
        flat = list(self.angles[0][1:])
        for chain in self.angles[1:]:
            flat.extend(chain)
        return np.array(flat, dtype=np.float64)

    @classmethod
    def from_free(cls, spec: MultipolygonSpec, x) -> "Configuration":
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (spec.n_free,):
            raise LinkageError(f"expected {spec.n_free} free angles, got shape {x.shape}")
        out, pos = [], 0
        for k, chain in enumerate(spec.chains):
            n = len(chain) - 1 if k == 0 else len(chain)
            vals = [float(v) for v in x[pos:pos + n]]
            pos += n
            out.append(([0.0] + vals) if k == 0 else vals)
        return cls(out)

    def to_json(self) -> dict:
        return {"angles": [list(c) for c in self.angles]}

    @classmethod
    def from_json(cls, data: dict) -> "Configuration":
        return cls(data["angles"], pinned=data.get("pinned", True))


@dataclass(frozen=True)
class LengthRange:
    lo: float
    hi: float

    def __contains__(self, d: float) -> bool:
        return self.lo <= d <= self.hi

    def contains_interval(self, lo: float, hi: float) -> bool:
        return self.lo <= lo and hi <= self.hi


def chain_end(lengths: Sequence[float], angles: Sequence[float]) -> complex:
    """Terminal vertex of a chain starting at the origin."""
    return complex(sum(d * math.cos(t) for d, t in zip(lengths, angles)),
                   sum(d * math.sin(t) for d, t in zip(lengths, angles)))


def _check_arity(config: Configuration, spec: MultipolygonSpec) -> None:
    if len(config.angles) != spec.r or any(
        len(a) != len(c) for a, c in zip(config.angles, spec.chains)
    ):
        raise LinkageError("configuration arity does not match the spec")


def end_to_end_distance(config: Configuration, spec: MultipolygonSpec | FreeLinkageSpec,
                        chain_index: int = 0) -> float:
    if isinstance(spec, FreeLinkageSpec):
        chains, angles = (spec,), config.angles
    else:
        chains, angles = spec.chains, config.angles
    if not 0 <= chain_index < len(chains) or chain_index >= len(angles):
        raise LinkageError(f"chain index {chain_index} out of range")
    if len(angles[chain_index]) != len(chains[chain_index]):
        raise LinkageError("configuration arity does not match the chain")
    return abs(chain_end(chains[chain_index].lengths, angles[chain_index]))


def length_range(spec: FreeLinkageSpec) -> LengthRange:
    total = spec.total
    lo = max(0.0, 2.0 * max(spec.lengths) - total)
    return LengthRange(lo, total)


def residuals(config: Configuration, spec: MultipolygonSpec) -> np.ndarray:
    """x/y gaps between chain 0's end and every other chain's end."""
    _check_arity(config, spec)
    e0 = chain_end(spec.chains[0].lengths, config.angles[0])
    out = []
    for chain, ang in zip(spec.chains[1:], config.angles[1:]):
        ek = chain_end(chain.lengths, ang)
        out.extend([e0.real - ek.real, e0.imag - ek.imag])
    return np.array(out)


def project_to_variety(config: Configuration, spec: MultipolygonSpec, *,
                       fixed: Sequence[int] = (), tol: float = EPS_CLOSURE,
                       max_iter: int = MAX_ITER) -> Configuration:
    """Damped Newton projection onto the closure variety.

    ``fixed`` lists flat free-variable indices that must not move.  Raises
    :class:`ProjectionError` when the iteration stalls or runs out of steps.
    """
    _check_arity(config, spec)
    w, cid, a0 = spec.layout()
    free = np.ones(spec.n_free, dtype=bool)
    free[list(fixed)] = False
    x0 = config.free_vector()[None, :]
    X, ok, _ = _accel.project_batch(x0, w, cid, a0, free, spec.r, tol, max_iter)
    if not ok[0]:
        raise ProjectionError("Newton projection did not converge")
    return Configuration.from_free(spec, X[0])


def project_many(X0, spec: MultipolygonSpec, *, free=None, tol: float = EPS_CLOSURE,
                 max_iter: int = MAX_ITER):
    """Batch projection on flat free vectors; returns ``(X, converged, iterations)``."""
    w, cid, a0 = spec.layout()
    if free is None:
        free = np.ones(spec.n_free, dtype=bool)
    return _accel.project_batch(np.atleast_2d(X0), w, cid, a0, free, spec.r, tol, max_iter)


def residuals_flat(X, spec: MultipolygonSpec) -> np.ndarray:
    w, cid, a0 = spec.layout()
    return _accel.residuals_numpy(np.atleast_2d(X), w, cid, a0, spec.r)
