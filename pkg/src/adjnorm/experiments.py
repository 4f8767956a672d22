"""Experiment orchestration: prepare, train/eval, sweeps, theory verification, plots."""
from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataset as ds_mod
from . import metrics as metrics_mod
from . import theory
from .baselines import BaselineKind, pc_adjust
from .config import ExperimentConfig
from .models import ModelSpec, forward, save_checkpoint
from .sparsegraph import build_adjacency, normalize_r
from .training import train, write_training_log

log = logging.getLogger(__name__)

METRICS_HEADER = (
    "dataset,backbone,r,L,l2_lambda,baseline,alpha,seed,K,"
    "recall,ndcg,nov,pru,num_users_evaluated"
)


def run_prepare(cfg: ExperimentConfig) -> ds_mod.InteractionDataset:
    """Materialize splits and stats under the output directory."""
    cfg.validate()
    if cfg.synth is not None:
        raw = ds_mod.synth_powerlaw(
            cfg.synth.num_users,
            cfg.synth.num_items,
            cfg.synth.interactions_per_user,
            cfg.synth.zipf_exponent,
            cfg.synth.seed,
        )
    else:
        raw = ds_mod.ingest(cfg.dataset_path)
    raw = ds_mod.kcore_filter(raw, cfg.split.kcore_min)
    if not raw.records:
        raise ValueError("no interactions survive k-core filtering")
    ds = ds_mod.split(raw, cfg.split)
    ds_mod.write_splits(ds, cfg.split_dir)
    print(f"{'dataset':<12}{'#users':>10}{'#items':>10}{'#inter':>12}{'sparsity':>12}")
    total = len(ds.train) + len(ds.val) + len(ds.test)
    print(
        f"{cfg.dataset_name:<12}{ds.num_users:>10}{ds.num_items:>10}"
        f"{total:>12}{ds.sparsity():>12.4%}"
    )
    return ds


def _load_prepared(cfg: ExperimentConfig) -> ds_mod.InteractionDataset:
    if not cfg.split_dir.exists():
        raise FileNotFoundError(
            f"prepared splits not found at {cfg.split_dir}; run `prepare` first"
        )
    return ds_mod.read_splits(cfg.split_dir)


def _score_adjust_for(cfg: ExperimentConfig, ds: ds_mod.InteractionDataset):
    if cfg.baseline.kind is BaselineKind.PC and cfg.baseline.alpha > 0:
        return lambda block, cand: pc_adjust(
            block, ds.item_degree[cand], cfg.baseline.alpha
        )
    return None


def run_train_eval(
    cfg: ExperimentConfig,
    ds: ds_mod.InteractionDataset | None = None,
    write_outputs: bool = True,
) -> list[metrics_mod.MetricsReport]:
    """Train one model per seed, evaluate the best checkpoint on the test split."""
    cfg.validate()
    if ds is None:
        ds = _load_prepared(cfg)
    reports: list[metrics_mod.MetricsReport] = []
    adjust = _score_adjust_for(cfg, ds)
    for seed in cfg.seeds:
        run_cfg = replace(cfg.train, seed=seed)
        try:
            table, entries = train(ds, cfg.model, run_cfg, cfg.baseline)
        except FloatingPointError as exc:
            log.error("seed %d failed: %s", seed, exc)
            continue
        if write_outputs:
            run_dir = cfg.output_dir / f"seed{seed}"
            run_dir.mkdir(parents=True, exist_ok=True)
            save_checkpoint(run_dir / "best.ckpt", cfg.model, table, seed)
            write_training_log(entries, run_dir / "training_log.csv")
        P = None
        if cfg.model.backbone.value != "mf":
            P = normalize_r(build_adjacency(ds, cfg.model.self_loops), cfg.model.r)
        combined = forward(cfg.model, P, table).combined
        for k in cfg.ks:
            report = metrics_mod.evaluate(combined, ds, k, score_adjust=adjust)
            report.backbone = cfg.model.backbone.value
            report.r = cfg.model.r
            report.layers = cfg.model.layers
            report.seed = seed
            reports.append(report)
    if write_outputs:
        write_metrics_csv(cfg, reports, cfg.output_dir / "metrics.csv")
    return reports


def _row(cfg: ExperimentConfig, rep: metrics_mod.MetricsReport, seed_label: str | None = None) -> str:
    seed = seed_label if seed_label is not None else str(rep.seed)
    return (
        f"{cfg.dataset_name},{rep.backbone},{rep.r:.12g},{rep.layers},"
        f"{cfg.train.l2_lambda:.12g},{cfg.baseline.kind.value},{cfg.baseline.alpha:.12g},"
        f"{seed},{rep.k},{rep.recall:.12g},{rep.ndcg:.12g},{rep.nov:.12g},"
        f"{rep.pru:.12g},{rep.num_evaluated_users}"
    )


def write_metrics_csv(
    cfg: ExperimentConfig, reports: list[metrics_mod.MetricsReport], path: Path
) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [METRICS_HEADER]
    for rep in reports:
        lines.append(_row(cfg, rep))
    # mean/std summary rows per K over seeds
    for k in sorted({r.k for r in reports}):
        group = [r for r in reports if r.k == k]
        if not group:
            continue
        for label, fn in (("mean", np.mean), ("std", np.std)):
            agg = metrics_mod.MetricsReport(
                recall=float(fn([r.recall for r in group])),
                ndcg=float(fn([r.ndcg for r in group])),
                nov=float(fn([r.nov for r in group])),
                pru=float(fn([r.pru for r in group])),
                k=k,
                num_evaluated_users=group[0].num_evaluated_users,
                backbone=group[0].backbone,
                r=group[0].r,
                layers=group[0].layers,
            )
            lines.append(_row(cfg, agg, seed_label=label))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_sweep(
    cfg: ExperimentConfig,
    axis: str,
    values: list[float],
    ds: ds_mod.InteractionDataset | None = None,
) -> Path:
    """Train/eval per sweep value; emit sweep.csv and the two-panel SVG plot."""
    if axis not in ("r", "depth"):
        raise ValueError("axis must be 'r' or 'depth'")
    if not values or list(values) != sorted(values):
        raise ValueError("sweep values must be nonempty and strictly increasing")
    cfg.validate()
    if ds is None:
        ds = _load_prepared(cfg)
    rows = [f"axis_value,{METRICS_HEADER}"]
    means: dict[float, metrics_mod.MetricsReport] = {}
    for value in values:
        if axis == "r":
            model = replace(cfg.model, r=float(value))
        else:
            model = replace(cfg.model, layers=int(value))
        cell_cfg = replace(cfg, model=model, output_dir=cfg.output_dir / f"{axis}_{value:g}")
        try:
            reports = run_train_eval(cell_cfg, ds=ds, write_outputs=False)
        except Exception as exc:  # partial failures leave flagged gaps
            log.error("sweep cell %s=%s failed: %s", axis, value, exc)
            rows.append(f"{value:g},failed")
            continue
        for rep in reports:
            rows.append(f"{value:g},{_row(cell_cfg, rep)}")
        k0 = cfg.ks[0]
        group = [r for r in reports if r.k == k0]
        means[value] = metrics_mod.MetricsReport(
            recall=float(np.mean([r.recall for r in group])),
            ndcg=float(np.mean([r.ndcg for r in group])),
            nov=float(np.mean([r.nov for r in group])),
            pru=float(np.mean([r.pru for r in group])),
            k=k0,
            num_evaluated_users=group[0].num_evaluated_users,
        )
        rows.append(f"{value:g},{_row(cell_cfg, means[value], seed_label='mean')}")
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    csv_path = cfg.output_dir / "sweep.csv"
    csv_path.write_text("\n".join(rows) + "\n", encoding="utf-8")
    if means:
        plot_sweep(means, axis, cfg.output_dir / "sweep.svg")
    return csv_path


def plot_sweep(
    means: dict[float, metrics_mod.MetricsReport], axis: str, path: Path
) -> None:
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    xs = sorted(means)
    fig, (ax_acc, ax_nov) = plt.subplots(1, 2, figsize=(10, 4))
    ax_acc.plot(xs, [means[x].recall for x in xs], marker="o", label="Recall")
    ax_acc.plot(xs, [means[x].ndcg for x in xs], marker="s", label="NDCG")
    ax_acc.set_xlabel(axis)
    ax_acc.set_ylabel("accuracy")
    ax_acc.legend()
    ax_nov.plot(xs, [means[x].nov for x in xs], marker="o", label="Nov")
    ax_nov.plot(xs, [means[x].pru for x in xs], marker="s", label="PRU")
    ax_nov.set_xlabel(axis)
    ax_nov.set_ylabel("novelty")
    ax_nov.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def regenerate_plots(run_dir: Path) -> list[Path]:
    """Rebuild sweep plots from sweep.csv files under a run directory."""
    written = []
    for csv_path in sorted(Path(run_dir).rglob("sweep.csv")):
        means: dict[float, metrics_mod.MetricsReport] = {}
        lines = csv_path.read_text(encoding="utf-8").splitlines()
        for line in lines[1:]:
            parts = line.split(",")
            if len(parts) < 15 or parts[8] != "mean":
                continue
            means[float(parts[0])] = metrics_mod.MetricsReport(
                recall=float(parts[10]),
                ndcg=float(parts[11]),
                nov=float(parts[12]),
                pru=float(parts[13]),
                k=int(parts[9]),
                num_evaluated_users=int(parts[14]),
            )
        if means:
            out = csv_path.with_suffix(".svg")
            plot_sweep(means, "value", out)
            written.append(out)
    return written


def run_verify_theory(
    sizes: list[int] | None = None,
    rs: list[float] | None = None,
    tol: float = 1e-8,
    l_max: int = 10_000,
    graphs_per_cell: int = 5,
    seed: int = 0,
) -> tuple[str, bool]:
    """Random-graph convergence and ordering checks; returns (report, all_passed)."""
    sizes = sizes or [8, 16, 30]
    rs = rs if rs is not None else [0.0, 0.5, 1.0, 1.25]
    rng = np.random.default_rng(seed)
    lines = [f"{'size':>6}{'r':>8}{'graph':>7}{'l_star':>8}{'error':>12}{'ordering':>10}"]
    all_ok = True
    for size in sizes:
        num_users = max(1, size // 2)
        num_items = max(1, size - num_users)
        for r in rs:
            for g in range(graphs_per_cell):
                adj = theory.random_connected_bipartite(
                    num_users, num_items, extra_edges=size, rng=rng
                )
                l_star, err = theory.convergence_check(adj, r, tol, l_max)
                order = theory.ordering_check(adj, r, seed=int(rng.integers(2**31)))
                ok = l_star != theory.NOT_CONVERGED and order.violations == 0
                all_ok &= ok
                lines.append(
                    f"{size:>6}{r:>8.2f}{g:>7}{l_star:>8}{err:>12.2e}"
                    f"{order.violations:>6}/{order.triples_checked}"
                )
    lines.append("RESULT: " + ("PASS" if all_ok else "FAIL"))
    return "\n".join(lines), all_ok
