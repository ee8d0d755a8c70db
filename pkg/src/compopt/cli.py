"""Command-line front end: ``uwdopt {bench,solve,validate,naturality}``."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bench import BenchConfig, run_benchmark, write_rows
from .finset import FinFunction
from .flownet import dual_ascent, network_from_dict
from .uwd import UWD, normalize_label, validate


def _lint_uwd(data: dict) -> list[str]:
    try:
        boxes = [int(b) for b in data["boxes"]]
        nj = int(data["junctions"])
        inner = [int(v) for v in data["inner_map"]]
        outer = [int(v) for v in data.get("outer_map", [])]
    except (KeyError, TypeError, ValueError) as exc:
        return [f"malformed diagram: {exc}"]
    out = []
    for name, vals in (("inner_map", inner), ("outer_map", outer)):
        bad = [v for v in vals if not 0 <= v < max(nj, 0)]
        if bad:
            out.append(f"{name} entries {bad} are not valid junction indices (junctions={nj})")
    labels = data.get("labels")
    if labels is not None:
        try:
            labels = [normalize_label(s) for s in labels]
        except ValueError as exc:
            out.append(str(exc))
            labels = None
    if out:
        return out
    d = UWD(tuple(boxes), nj, FinFunction(inner, nj), FinFunction(outer, nj),
            None if labels is None else tuple(labels))
    return validate(d)


def _lint_network(data: dict) -> list[str]:
    try:
        network_from_dict(data)
    except (ValueError, TypeError, KeyError) as exc:
        return [str(exc)]
    return []


def cmd_validate(args) -> int:
    with open(args.file) as fh:
        data = json.load(fh)
    if "boxes" in data:
        kind, problems = "diagram", _lint_uwd(data)
    elif "V" in data:
        kind, problems = "network", _lint_network(data)
    else:
        kind, problems = "unknown", ["not a diagram (needs 'boxes') or a network (needs 'V')"]
    if problems:
        for p in problems:
            print(f"{args.file}: {p}")
        return 1
    print(f"{args.file}: valid {kind}")
    return 0


def cmd_solve(args) -> int:
    with open(args.file) as fh:
        net = network_from_dict(json.load(fh)).payload
    lam, x, k = dual_ascent(net, args.gamma, args.tol, args.max_iter)
    residual = float(np.max(np.abs(np.bincount(net.src.map, x, net.V)
                                   - np.bincount(net.tgt.map, x, net.V) - net.balance),
                            initial=0.0))
    out = {
        "flows": x.tolist(),
        "multipliers": lam.tolist(),
        "cost": net.cost(x),
        "residual": residual,
        "iterations": k,
    }
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_bench(args) -> int:
    cfg = BenchConfig(
        seed=args.seed,
        nodes_per_subgraph=tuple(args.nodes),
        edge_prob=tuple(args.p),
        gamma=args.gamma,
        outer_iters=args.iters,
        mode=args.mode,
        output_path=args.out,
        repeats=args.repeats,
        parallel=args.parallel,
    )
    rows = run_benchmark(cfg)
    if not args.out:
        write_rows(rows, sys.stdout)
    return 0


def cmd_naturality(args) -> int:
    from .testing import naturality_suite

    ok = True
    for name, worst, passed in naturality_suite(args.seed, args.instances, tol=args.tol):
        print(f"{'PASS' if passed else 'FAIL'} {name:15s} max discrepancy {worst:.3e}")
        ok &= passed
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uwdopt", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="standard vs hierarchical dual decomposition")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--nodes", type=int, nargs="+", default=[80], help="nodes per subgraph")
    b.add_argument("--p", type=float, nargs="+", default=[0.2], help="edge probability")
    b.add_argument("--gamma", type=float, default=0.01)
    b.add_argument("--iters", type=int, default=10, help="outer iterations")
    b.add_argument("--mode", choices=["standard", "hierarchical", "both"], default="both")
    b.add_argument("--repeats", type=int, default=3, help="timing repeats (best is kept)")
    b.add_argument("--parallel", action="store_true",
                   help="run the hierarchical pipeline with threaded message passing")
    b.add_argument("--out", help="CSV output path (default stdout)")
    b.set_defaults(func=cmd_bench)

    s = sub.add_parser("solve", help="min-cost flow on one network JSON file")
    s.add_argument("file")
    s.add_argument("--gamma", type=float, default=0.01)
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-iter", type=int, default=2_000_000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("validate", help="lint a diagram or network JSON file")
    v.add_argument("file")
    v.set_defaults(func=cmd_validate)

    n = sub.add_parser("naturality", help="randomised naturality checks")
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--instances", type=int, default=50)
    n.add_argument("--tol", type=float, default=1e-9)
    n.set_defaults(func=cmd_naturality)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
