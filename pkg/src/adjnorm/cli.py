"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys


def _cap_threads() -> None:
    threads = os.environ.get("ADJNORM_THREADS")
    if threads:
        for var in (
            "OMP_NUM_THREADS",
            "OPENBLAS_NUM_THREADS",
            "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS",
        ):
            os.environ.setdefault(var, threads)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adjnorm",
        description="Graph collaborative-filtering lab: degree-normalized propagation, "
        "BPR training and accuracy/novelty evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", help="filter, split and materialize a dataset")
    p.add_argument("--config", required=True)

    p = sub.add_parser("train", help="train per seed and evaluate on the test split")
    p.add_argument("--config", required=True)

    p = sub.add_parser("eval", help="evaluate an existing checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("sweep", help="sweep r or depth, emitting CSV + SVG")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", choices=["r", "depth"], required=True)
    p.add_argument("--values", required=True, help="comma-separated sweep values")

    p = sub.add_parser("verify-theory", help="propagation-limit verification")
    p.add_argument("--sizes", default="8,16,30")
    p.add_argument("--rs", default="0,0.5,1,1.25")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--l-max", type=int, default=10_000)
    p.add_argument("--graphs", type=int, default=5)

    p = sub.add_parser("report", help="regenerate plots from sweep CSVs")
    p.add_argument("--dir", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    _cap_threads()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0

    from . import experiments
    from .config import load_config

    try:
        if args.command == "prepare":
            experiments.run_prepare(load_config(args.config))
        elif args.command == "train":
            experiments.run_train_eval(load_config(args.config))
        elif args.command == "eval":
            _eval_checkpoint(load_config(args.config), args.checkpoint)
        elif args.command == "sweep":
            values = [float(v) for v in args.values.replace(",", " ").split()]
            experiments.run_sweep(load_config(args.config), args.axis, values)
        elif args.command == "verify-theory":
            report, ok = experiments.run_verify_theory(
                sizes=[int(x) for x in args.sizes.replace(",", " ").split()],
                rs=[float(x) for x in args.rs.replace(",", " ").split()],
                tol=args.tol,
                l_max=args.l_max,
                graphs_per_cell=args.graphs,
            )
            print(report)
            return 0 if ok else 3
        elif args.command == "report":
            from pathlib import Path

            written = experiments.regenerate_plots(Path(args.dir))
            for path in written:
                print(path)
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


def _eval_checkpoint(cfg, ckpt_path: str) -> None:
    from . import experiments
    from .metrics import evaluate
    from .models import forward, load_checkpoint
    from .sparsegraph import build_adjacency, normalize_r

    ds = experiments._load_prepared(cfg)
    spec, table, seed = load_checkpoint(ckpt_path)
    P = None
    if spec.backbone.value != "mf":
        P = normalize_r(build_adjacency(ds, spec.self_loops), spec.r)
    combined = forward(spec, P, table).combined
    adjust = experiments._score_adjust_for(cfg, ds)
    print(experiments.METRICS_HEADER)
    for k in cfg.ks:
        rep = evaluate(combined, ds, k, score_adjust=adjust)
        rep.backbone, rep.r, rep.layers, rep.seed = (
            spec.backbone.value,
            spec.r,
            spec.layers,
            seed,
        )
        print(experiments._row(cfg, rep))


if __name__ == "__main__":
    sys.exit(main())
