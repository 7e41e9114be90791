"""``linkmod`` command line: every subcommand prints one JSON document."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import Configuration, LinkageError, MultipolygonSpec, project_many
from .fibers import euler_characteristic, fiber_at_angle, product_structure, svg_schematic
from .multiquad import MultiquadSpec, classify
from .paths import connected_multipolygon, slide_path
from .sampler import NearWallError, component_count, sample_variety
from .smoothness import (
    RANK_TOL,
    check_gensmooth,
    check_nointsmooth,
    jacobian_batch,
    numeric_rank_batch,
    straight_line_witness,
)


def _emit(obj, out=None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def cmd_classify(args) -> int:
    spec = MultipolygonSpec.load(args.spec)
    res = classify(MultiquadSpec.from_multipolygon(spec))
    _emit(res.to_json())
    return 0


def _unit_tail(chain) -> bool:
    return all(x == 1.0 for x in chain.lengths[1:])


def cmd_smoothness(args) -> int:
    spec = MultipolygonSpec.load(args.spec)
    if spec.r != 3:
        raise LinkageError("smoothness needs three chains")
    c1, c2, c3 = spec.chains
    if len(c1) == 2:
        report = check_nointsmooth(c1.lengths[0], c1.lengths[1], c2, c3)
    elif _unit_tail(c1) and set(c2.lengths) == {1.0} and set(c3.lengths) == {1.0}:
        report = check_gensmooth(c1.lengths[0], len(c1), len(c2), len(c3))
    else:
        raise LinkageError("no symbolic smoothness test for this spec shape")
    rng = np.random.default_rng(args.seed)
    X0 = rng.uniform(0.0, 2 * np.pi, size=(args.samples, spec.n_free))
    X, ok, _ = project_many(X0, spec)
    ranks = numeric_rank_batch(jacobian_batch(X[ok], spec), args.tol) if ok.any() else np.zeros(0, int)
    out = report.to_json()
    out["samples_on_variety"] = int(ok.sum())
    out["min_observed_rank"] = int(ranks.min()) if ranks.size else None
    if ranks.size and ranks.min() < 4:
        bad = X[ok][int(np.argmin(ranks))]
        out["counterexample_config"] = Configuration.from_free(spec, bad).to_json()
    elif not report.is_smooth_manifold and len(c1) == 2:
        w = straight_line_witness(c1.lengths[0], c1.lengths[1], c2, c3, seed=args.seed)
        if w is not None:
            out["counterexample_config"] = w.to_json()
    _emit(out)
    return 0


def cmd_euler(args) -> int:
    spec = MultipolygonSpec.load(args.spec)
    dec = euler_characteristic(spec)
    out = dec.to_json()
    cert = product_structure(spec)
    out["product_certificate"] = None if cert is None else cert.to_json()
    _emit(out)
    return 0


def cmd_fibers(args) -> int:
    spec = MultipolygonSpec.load(args.spec)
    if spec.r != 3 or len(spec.chains[0]) != 2:
        raise LinkageError("fibers needs three chains with a two-edge first chain")
    a, b = spec.chains[0].lengths
    f = fiber_at_angle(a, b, spec.chains[1], spec.chains[2], args.angle)
    out = {"angle": args.angle, "fiber": f.to_json()}
    if args.svg:
        Path(args.svg).write_text(svg_schematic(euler_characteristic(spec)))
        out["svg"] = args.svg
    _emit(out)
    return 0


def cmd_path(args) -> int:
    spec = MultipolygonSpec.load(args.spec)
    if not 0 <= args.chain < spec.r:
        raise LinkageError(f"chain index {args.chain} out of range")
    data = json.loads(Path(args.from_).read_text())
    angles = data["angles"]
    chain_angles = angles[args.chain] if len(angles) == spec.r else angles[0]
    start = Configuration([chain_angles], pinned=False)
    res = slide_path(spec.chains[args.chain], start, args.target_d)
    _emit(res.to_json(), args.out)
    return 0 if res.achieved else 1


def cmd_connected(args) -> int:
    spec = MultipolygonSpec.load(args.spec)
    out = connected_multipolygon(spec).to_json()
    if args.samples:
        out["sampled_components"] = component_count(sample_variety(spec, args.samples, args.seed))
    _emit(out)
    return 0


def cmd_sample(args) -> int:
    spec = MultipolygonSpec.load(args.spec)
    cx = sample_variety(spec, args.n, args.seed)
    if args.out:
        cx.save(args.out)
    _emit({"status": cx.status, "components": component_count(cx), "points": int(cx.points.shape[0]),
           "edges": int(cx.edges.shape[0]), "rho": cx.rho, "seed": args.seed, "n_samples": args.n,
           "out": args.out})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linkmod", description="Topology of planar multipolygon linkages.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("classify", help="classify a three-chain two-edge linkage")
    s.add_argument("spec")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("smoothness", help="smoothness certificate and sampled Jacobian rank")
    s.add_argument("spec")
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--tol", type=float, default=RANK_TOL)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_smoothness)

    s = sub.add_parser("euler", help="fiber decomposition and Euler characteristic")
    s.add_argument("spec")
    s.set_defaults(func=cmd_euler)

    s = sub.add_parser("fibers", help="fiber type over one inter-edge angle")
    s.add_argument("spec")
    s.add_argument("--angle", type=float, required=True)
    s.add_argument("--svg")
    s.set_defaults(func=cmd_fibers)

    s = sub.add_parser("path", help="slide one chain to a target end-to-end distance")
    s.add_argument("spec")
    s.add_argument("--chain", type=int, required=True)
    s.add_argument("--from", dest="from_", required=True)
    s.add_argument("--target-d", type=float, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_path)

    s = sub.add_parser("connected", help="connectedness certificate")
    s.add_argument("spec")
    s.add_argument("--samples", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_connected)

    s = sub.add_parser("sample", help="sample the moduli space and count components")
    s.add_argument("spec")
    s.add_argument("--n", type=int, default=100000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LinkageError, NearWallError, FileNotFoundError, KeyError, json.JSONDecodeError) as exc:
        print(f"linkmod: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
