"""Command-line surface: verify, bench, gen, export, oracle.

Exit codes for `verify`: 0 = property holds (UNSAT), 1 = counterexample
found (SAT), 2 = timeout, 3 = usage or input error.  All randomness flows
from --seed, so a fixed seed reproduces a run byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from plnnverify import bounds as bnd
from plnnverify import datagen, formats, mipexport, oracle
from plnnverify.bab import BabConfig, run_bab
from plnnverify.network import (
    CanonicalProblem,
    canonicalize,
    maxpool_to_relu,
)

EXIT_UNSAT = 0
EXIT_SAT = 1
EXIT_TIMEOUT = 2
EXIT_ERROR = 3


def _read(path: str) -> str:
    with open(path) as fh:
        return fh.read()


def load_instance(net_path: str, prop_path: str, box_path: str) -> CanonicalProblem:
    """Read a network (.plnn or .nnet), a property and a box.

    Passing "-" for the box of an .nnet file uses the input ranges stored
    in the file itself.
    """
    if net_path.endswith(".nnet"):
        net, file_box = datagen.parse_nnet(_read(net_path))
        box = file_box if box_path == "-" else formats.read_box(_read(box_path))
    else:
        net = formats.read_plnn(_read(net_path))
        box = formats.read_box(_read(box_path))
    prop = formats.read_prop(_read(prop_path))
    return canonicalize(net, prop, box)


def _bab_config(args, trace_stream=None) -> BabConfig:
    imb = None if args.imb == "auto" else args.imb
    return BabConfig(
        mode=args.mode,
        strategy=args.strategy,
        relaxation=args.relax,
        imb_policy=imb,
        epsilon=args.eps,
        timeout=args.timeout,
        samples=args.samples,
        seed=args.seed,
        trace=trace_stream,
    )


def cmd_verify(args) -> int:
    problem = load_instance(args.net, args.prop, args.box)
    trace_stream = open(args.trace, "w", newline="") if args.trace else None
    try:
        result = run_bab(problem, _bab_config(args, trace_stream))
    finally:
        if trace_stream:
            trace_stream.close()
    print(f"verdict: {result.status}")
    print(f"lower_bound: {result.lower_bound:.9g}")
    print(f"upper_bound: {result.upper_bound:.9g}")
    if result.counterexample is not None:
        print("counterexample: " + " ".join(repr(float(v)) for v in result.counterexample))
    if result.zero_margin:
        print("note: zero-margin decision (minimum within tolerance of zero)")
    s = result.stats
    print(f"nodes: {s.nodes}")
    print(f"lp_calls: {s.lp_calls}")
    print(f"wall_time: {s.wall_time:.6f}")
    return {"UNSAT": EXIT_UNSAT, "SAT": EXIT_SAT, "TIMEOUT": EXIT_TIMEOUT}[result.status]


def _bench_one(entry):
    instance, strategy, args_dict = entry
    try:
        problem = load_instance(instance["net"], instance["prop"], instance["box"])
        config = BabConfig(
            mode=args_dict["mode"],
            strategy=strategy,
            relaxation=args_dict["relax"],
            epsilon=args_dict["eps"],
            timeout=float(instance.get("timeout", args_dict["timeout"])),
            seed=args_dict["seed"],
        )
        result = run_bab(problem, config)
        return {
            "instance": instance.get("name", instance["net"]),
            "strategy": strategy,
            "status": result.status,
            "wall_time": f"{result.stats.wall_time:.6f}",
            "nodes": result.stats.nodes,
            "lp_calls": result.stats.lp_calls,
        }
    except Exception as exc:  # per-instance failures must not abort the batch
        return {
            "instance": instance.get("name", instance.get("net", "?")),
            "strategy": strategy,
            "status": "ERROR",
            "wall_time": "",
            "nodes": "",
            "lp_calls": "",
            "error": str(exc),
        }


def cmd_bench(args) -> int:
    manifest = json.loads(_read(args.manifest))
    instances = manifest["instances"] if isinstance(manifest, dict) else manifest
    args_dict = {
        "mode": args.mode,
        "relax": args.relax,
        "eps": args.eps,
        "timeout": args.timeout,
        "seed": args.seed,
    }
    jobs = []
    for instance in instances:
        for strategy in instance.get("strategies", [args.strategy]):
            jobs.append((instance, strategy, args_dict))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, jobs))
    else:
        rows = [_bench_one(j) for j in jobs]

    fields = ["instance", "strategy", "status", "wall_time", "nodes", "lp_calls"]
    with open(args.out, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)

    solved = sorted(
        float(r["wall_time"])
        for r in rows
        if r["status"] in ("UNSAT", "SAT") and r["wall_time"]
    )
    total = len(jobs)
    with open(args.cactus, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "solved_fraction"])
        for i, t in enumerate(solved, start=1):
            writer.writerow([f"{t:.6f}", f"{i / total:.6f}"])
    for row in rows:
        if row["status"] == "ERROR":
            print(f"error on {row['instance']} ({row['strategy']}): {row.get('error')}", file=sys.stderr)
    print(f"wrote {len(rows)} rows to {args.out}; cactus curve to {args.cactus}")
    return 0


def _write_instance(prefix: str, net, box, prop) -> None:
    with open(prefix + ".plnn", "w") as fh:
        fh.write(formats.write_plnn(net))
    with open(prefix + ".box", "w") as fh:
        fh.write(formats.write_box(box))
    with open(prefix + ".prop", "w") as fh:
        fh.write(formats.write_prop(prop))
    print(f"wrote {prefix}.plnn / .box / .prop")


def cmd_gen(args) -> int:
    if args.kind == "twinstream":
        spec = datagen.TwinStreamSpec(
            input_dim=args.inputs,
            widths=tuple([args.width] * (args.depth - 1)),
            depth=args.depth,
            margin=args.margin,
            seed=args.seed,
        )
        net, box, prop = datagen.gen_twinstream(spec)
    elif args.kind == "toy":
        net, box, prop = datagen.toy_network()
    else:
        widths = tuple(int(w) for w in args.widths.split(","))
        net = datagen.gen_random_net(widths[0], widths, seed=args.seed, bias_scale=args.bias_scale)
        box = formats.read_box(f"lower: {' '.join(['-1'] * widths[0])}\nupper: {' '.join(['1'] * widths[0])}\n")
        prop = formats.read_prop("(atom 1 0)")
    _write_instance(args.out, net, box, prop)
    return 0


def cmd_export(args) -> int:
    problem = load_instance(args.net, args.prop, args.box)
    if args.bounds == "interval":
        bounds = bnd.interval_propagate(problem)
    else:
        start = bnd.interval_propagate(problem)
        bounds = bnd.refine_bounds_lp(problem, start)
    if isinstance(bounds, bnd.Infeasible):
        raise ValueError("bound computation reported an empty problem")
    variant = {"tjeng": mipexport.TJENG, "symm": mipexport.SYMMETRIC}[args.variant]
    mode = {
        "minimize": mipexport.MINIMIZE,
        "feasibility": mipexport.FEASIBILITY,
    }[args.objective]
    model = mipexport.encode_mip(problem, bounds, variant=variant, objective_mode=mode)
    mipexport.write_lp_file(model, args.out)
    print(f"wrote {args.out} ({len(model.binaries)} binaries)")
    return 0


def cmd_oracle(args) -> int:
    problem = load_instance(args.net, args.prop, args.box)
    if problem.net.has_maxpool():
        provider = bnd.interval_bounds_provider(problem.domain)
        problem = CanonicalProblem(
            maxpool_to_relu(problem.net, provider), problem.domain
        )
    bounds = bnd.interval_propagate(problem)
    value, argmin = oracle.enumerate_min(problem, bounds, cap=args.cap)
    print(f"minimum: {value:.9g}")
    print("argmin: " + " ".join(repr(float(v)) for v in argmin))
    if value > 0:
        print("verdict: UNSAT")
    elif abs(value) <= 1e-12:
        print("verdict: UNSAT (zero margin)")
    else:
        print("verdict: SAT")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plnnverify",
        description="Complete verifier for piecewise-linear neural networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--seed", type=int, default=0)

    def add_bab_flags(p):
        p.add_argument("--strategy", choices=("bab", "babsb", "relubab", "babsr", "babsrl"), default="babsr")
        p.add_argument("--relax", choices=("planet", "reluplex"), default="planet")
        p.add_argument("--imb", choices=("auto", "none", "wk", "lp-all", "lp-one"), default="auto")
        p.add_argument("--mode", choices=("decide", "optimize"), default="decide")
        p.add_argument("--eps", type=float, default=1e-4)
        p.add_argument("--timeout", type=float, default=7200.0)
        p.add_argument("--samples", type=int, default=None)

    p = sub.add_parser("verify", help="decide or optimize one instance")
    p.add_argument("net")
    p.add_argument("prop")
    p.add_argument("box")
    add_bab_flags(p)
    add_common(p)
    p.add_argument("--trace", default=None, help="write a per-node CSV trace")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="run a manifest of instances")
    p.add_argument("manifest")
    p.add_argument("--out", default="results.csv")
    p.add_argument("--cactus", default="cactus.csv")
    p.add_argument("--jobs", type=int, default=1)
    add_bab_flags(p)
    add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate instance files")
    p.add_argument("kind", choices=("twinstream", "toy", "random"))
    p.add_argument("-o", "--out", required=True, help="output path prefix")
    p.add_argument("--inputs", type=int, default=5)
    p.add_argument("--width", type=int, default=5)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--margin", type=float, default=10.0)
    p.add_argument("--widths", default="2,3,1", help="random nets: full width chain")
    p.add_argument("--bias-scale", type=float, default=0.0)
    add_common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("export", help="write a big-M model as a CPLEX-LP file")
    p.add_argument("net")
    p.add_argument("prop")
    p.add_argument("box")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--variant", choices=("tjeng", "symm"), default="tjeng")
    p.add_argument("--objective", choices=("minimize", "feasibility"), default="minimize")
    p.add_argument("--bounds", choices=("interval", "planet"), default="interval")
    add_common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("oracle", help="exact minimum by activation-pattern enumeration")
    p.add_argument("net")
    p.add_argument("prop")
    p.add_argument("box")
    p.add_argument("--cap", type=int, default=20)
    add_common(p)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
