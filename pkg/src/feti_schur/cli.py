"""Command-line driver: ``feti-schur {gen,check,sweep,amortize}``.

Defaults reproduce the acceptance runs: the sweep covers the 3D ``n = 2744``
block-size curve, ``amortize`` compares baseline and optimized assembly at
``n = 1331`` and ``check`` runs the correctness suite with seed 42.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import mmio
from .bench import (
    BASELINE_VARIANT,
    DEFAULT_SWEEP_VARIANT,
    BenchIOError,
    SweepSpec,
    run_amortization,
    run_correctness,
    run_sweep,
)
from .ordering import ORDERINGS
from .problem import DecompositionSpec, generate
from .stepped import BlockPolicy

SWEEP_BLOCK_SIZES = (10, 50, 200, 500, 2000, 10000)


def _add_selection(p: argparse.ArgumentParser, sizes, variants, block_sizes) -> None:
    p.add_argument("--dim", type=int, nargs="+", default=[3], choices=(2, 3),
                   help="problem dimensions (default: 3)")
    p.add_argument("--sizes", type=int, nargs="+", default=list(sizes),
                   help="DOFs per subdomain, each (k+1)**dim (default: %(default)s)")
    p.add_argument("--variants", nargs="+", default=list(variants),
                   help="<trsm>[:sparse|dense]+<syrk> (default: %(default)s)")
    p.add_argument("--block-sizes", type=int, nargs="*", default=list(block_sizes),
                   help="fixed block sizes (default: %(default)s)")
    p.add_argument("--block-counts", type=int, nargs="*", default=[],
                   help="fixed block counts")
    p.add_argument("--reps", type=int, default=3, help="timing repetitions, median reported")
    p.add_argument("--ordering", choices=ORDERINGS, default="amd")
    p.add_argument("--no-delay", action="store_true",
                   help="keep the plain fill-reducing order (do not delay glued DOFs)")
    p.add_argument("--subdomains", type=int, default=2, help="subdomains per edge")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-", help="CSV path, '-' for stdout")


def _spec(args, **extra) -> SweepSpec:
    parts = tuple([BlockPolicy.fixed_size(s) for s in args.block_sizes]
                  + [BlockPolicy.fixed_count(c) for c in args.block_counts])
    if not parts:
        raise ValueError("give at least one --block-sizes or --block-counts value")
    return SweepSpec(dims=tuple(args.dim), subdomain_sizes=tuple(args.sizes),
                     variants=tuple(args.variants), partition_values=parts,
                     repetitions=args.reps, ordering=args.ordering,
                     delay_glued=not args.no_delay, subdomains_per_edge=args.subdomains,
                     seed=args.seed, **extra)


def _sink(path: str):
    return sys.stdout if path == "-" else path


def cmd_gen(args) -> int:
    spec = DecompositionSpec(args.dim, args.elements, args.subdomains, args.rho)
    dec = generate(spec)
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise BenchIOError(exc.errno, f"cannot create output directory '{out}': {exc.strerror}")
    # all subdomains share one stiffness matrix
    mmio.write_csr(out / "K_reg.mtx", dec.subdomains[0].k_reg, symmetric=True,
                   comment="regularized subdomain stiffness (shared by all subdomains)")
    mmio.write_csr(out / "B.mtx", dec.global_b(), comment="global gluing matrix")
    subs = []
    for sub in dec.subdomains:
        stem = f"sub{sub.index:03d}"
        mmio.write_csr(out / f"{stem}_Bt.mtx", sub.bt, comment=f"transposed gluing block, subdomain {sub.index}")
        np.savetxt(out / f"{stem}_lambda.txt", sub.lambda_map, fmt="%d")
        subs.append({"index": sub.index, "n": sub.n, "m": sub.m,
                     "bt": f"{stem}_Bt.mtx", "lambda_map": f"{stem}_lambda.txt"})
    meta = {"dim": spec.dim, "elements_per_edge": spec.elements_per_edge,
            "subdomains_per_edge": spec.subdomains_per_edge,
            "regularization_rho": spec.regularization_rho,
            "n_multipliers": dec.n_multipliers, "k_reg": "K_reg.mtx", "b": "B.mtx",
            "subdomains": subs}
    (out / "problem.json").write_text(json.dumps(meta, indent=2) + "\n")
    print(f"wrote {len(subs)} subdomains (n={dec.subdomains[0].n}, "
          f"{dec.n_multipliers} multipliers) to {out}")
    return 0


def cmd_check(args) -> int:
    progress = None if args.quiet else (lambda msg: print(f"... {msg}", file=sys.stderr))
    report = run_correctness(args.seed, corrupt=args.corrupt_factor, progress=progress)
    print(report.format())
    return report.exit_code


def cmd_sweep(args) -> int:
    prunings = {"on": (True,), "off": (False,), "both": (True, False)}[args.pruning]
    spec = _spec(args, check=args.check, prunings=prunings)
    summary = run_sweep(spec, _sink(args.out), parallel=args.parallel)
    if args.out != "-":
        print(f"wrote {summary.n_rows} rows to {args.out}")
    if args.check:
        worst = summary.max_oracle_rel_err
        print(f"max oracle relative error: {worst:.3e}", file=sys.stderr)
        if worst is None or not worst < 1e-10:
            return 1
    return 0


def cmd_amortize(args) -> int:
    spec = _spec(args)
    table = run_amortization(spec, None if args.out == "-" else args.out,
                             applies=args.applies, partition=spec.partition_values[0])
    print(table.format())
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="feti-schur",
                                 description="Explicit FETI dual operator assembly benchmarks")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a decomposed problem as Matrix Market files")
    g.add_argument("--dim", type=int, choices=(2, 3), default=3)
    g.add_argument("--elements", type=int, default=13, help="elements per subdomain edge")
    g.add_argument("--subdomains", type=int, default=2, help="subdomains per edge")
    g.add_argument("--rho", type=float, default=1.0, help="regularization scale")
    g.add_argument("--out-dir", default="problem")
    g.set_defaults(func=cmd_gen)

    c = sub.add_parser("check", help="run the correctness suite")
    c.add_argument("--seed", type=int, default=42)
    c.add_argument("--quiet", action="store_true")
    c.add_argument("--corrupt-factor", action="store_true",
                   help="zero a diagonal entry of every factor (the suite must fail)")
    c.set_defaults(func=cmd_check)

    s = sub.add_parser("sweep", help="FLOPs and wall time over variants and partitions")
    _add_selection(s, (2744,), (DEFAULT_SWEEP_VARIANT,), SWEEP_BLOCK_SIZES)
    s.add_argument("--check", action="store_true", help="compare every cell against the oracle")
    s.add_argument("--pruning", choices=("on", "off", "both"), default="on")
    s.add_argument("--parallel", action="store_true",
                   help="run cells concurrently; wall-time columns are left empty")
    s.set_defaults(func=cmd_sweep)

    a = sub.add_parser("amortize", help="amortization points, baseline vs optimized")
    _add_selection(a, (1331,), (BASELINE_VARIANT, DEFAULT_SWEEP_VARIANT), (500,))
    a.add_argument("--applies", type=int, default=100, help="applies timed per operator")
    a.set_defaults(func=cmd_amortize)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (BenchIOError, ValueError) as exc:
        print(f"feti-schur {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
