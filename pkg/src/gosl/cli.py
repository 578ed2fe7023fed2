"""Command-line entry point: run experiments, ablations, annotation sessions."""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, known_datasets
from .errors import ConfigError, GoslError
from .loop import mix_seed, run_experiment, simulated_oracle

# Built-in config presets. Defaults follow the experimental protocol:
# hidden=32, lr=0.01, dropout=0.5, m=48 clusters, w_unknown from
# {0.001, 0.1, 0.2} (default 0.1), budgets 5C/2C/15C, 10 seeds.
PRESETS = {
    "reproduce-cora": {
        "dataset": "cora",
        "seeds": list(range(10)),
        "strategies": ["lego", "random"],
        "w_unknown": 0.1,
    },
    "sbm-smoke": {
        "sbm": {"classes": 10, "nodes_per_class": 40, "p_intra": 0.08,
                "p_inter": 0.004, "feature_dim": 16, "class_mean_separation": 2.5,
                "feature_noise_std": 1.0, "seed": 1},
        "id_classes": [0, 1, 2, 3, 4],
        "seeds": [0],
    },
}


def _run_one(cfg_dict: dict, strategy: str, ablation: str, seed: int) -> dict:
    """Worker: one (strategy, ablation, seed) cell, returns plain dicts."""
    cfg = ExperimentConfig.from_dict(cfg_dict)
    graph, id_classes = cfg.load_graph()
    split = cfg.build_split(graph, id_classes)
    settings = cfg.run_settings(strategy, ablation)
    result = run_experiment(graph, split, settings, simulated_oracle(graph, split), seed)
    out = {
        "strategy": strategy,
        "ablation": ablation,
        "seed": seed,
        "final_precision": result.final_precision,
        "truncated": result.truncated,
        "total_annotated": result.total_annotated,
        "metrics": result.final_metrics.as_dict() if result.final_metrics else None,
        "rounds": [r.as_dict() for r in result.reports],
    }
    if result.classifier is not None:
        out["scores"] = _score_dump(result.classifier, graph, split)
    return out


def _score_dump(classifier, graph, split) -> list[dict]:
    from .graph import normalize_adjacency
    from .models import ood_scores
    scores = ood_scores(classifier, graph, normalize_adjacency(graph))
    return [
        {"node": int(n), "score": float(scores[n]),
         "is_ood": bool(split.remap_label(int(graph.labels[n])) < 0)}
        for n in split.test_nodes
    ]


def _cell_tag(strategy: str, ablation: str) -> str:
    return strategy if ablation == "none" else f"{strategy}+{ablation}"


def _execute_matrix(cfg: ExperimentConfig, cells, out_dir: Path, jobs: int,
                    seed_offset: int) -> list[dict]:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "effective_config.json").write_text(json.dumps(cfg.to_dict(), indent=2))
    tasks = [(strategy, ablation, seed + seed_offset)
             for strategy, ablation in cells for seed in cfg.seeds]
    cfg_dict = cfg.to_dict()
    results = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, cfg_dict, s, a, sd) for s, a, sd in tasks]
            results = [f.result() for f in futures]
    else:
        results = [_run_one(cfg_dict, s, a, sd) for s, a, sd in tasks]

    for res in results:
        tag = _cell_tag(res["strategy"], res["ablation"])
        log_path = out_dir / f"rounds_{tag}_seed{res['seed']}.jsonl"
        with open(log_path, "w") as f:
            for r in res["rounds"]:
                f.write(json.dumps(r) + "\n")
        scores = res.pop("scores", None)
        if scores is not None:
            with open(out_dir / f"scores_{tag}_seed{res['seed']}.tsv", "w") as f:
                f.write("node\tscore\tis_ood\n")
                for s in scores:
                    f.write(f"{s['node']}\t{s['score']:.6f}\t{int(s['is_ood'])}\n")
        with open(out_dir / "runs.jsonl", "a") as f:
            f.write(json.dumps(res) + "\n")
    return results


def _summary_table(results: list[dict]) -> str:
    """Aggregate table: mean over seeds per (strategy, ablation) cell."""
    cells: dict[str, list[dict]] = {}
    for res in results:
        cells.setdefault(_cell_tag(res["strategy"], res["ablation"]), []).append(res)
    lines = ["variant\tn_seeds\tid_acc\tauroc\taupr\tfpr_at_80\tprecision"]
    for tag in sorted(cells):
        runs = cells[tag]
        prec = float(np.mean([r["final_precision"] for r in runs]))
        metric_runs = [r["metrics"] for r in runs if r["metrics"]]
        if metric_runs:
            cols = [float(np.mean([m[k] for m in metric_runs]))
                    for k in ("id_acc", "auroc", "aupr", "fpr_at_80")]
            metric_txt = "\t".join(f"{v:.4f}" for v in cols)
        else:
            metric_txt = "\t".join(["nan"] * 4)
        lines.append(f"{tag}\t{len(runs)}\t{metric_txt}\t{prec:.4f}")
    return "\n".join(lines) + "\n"


def _load_config(args) -> ExperimentConfig:
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; known: {sorted(PRESETS)}")
        raw = dict(PRESETS[args.preset])
        if args.config:
            raw.update(json.loads(Path(args.config).read_text()))
        return ExperimentConfig.from_dict(raw)
    if not args.config:
        raise ConfigError("either --config or --preset is required")
    return ExperimentConfig.from_file(args.config)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    cells = [(s, a) for s in cfg.strategies for a in cfg.ablations]
    out_dir = Path(args.out_dir)
    results = _execute_matrix(cfg, cells, out_dir, args.jobs or cfg.jobs, args.seed_offset)
    table = _summary_table(results)
    (out_dir / "summary.tsv").write_text(table)
    print(table, end="")
    return 0


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    # Variant names are fixed: the full pipeline and the two module removals.
    cells = [("lego", "none"), ("lego", "no_filter"), ("lego", "no_cluster")]
    out_dir = Path(args.out_dir)
    results = _execute_matrix(cfg, cells, out_dir, args.jobs or cfg.jobs, args.seed_offset)
    rename = {"lego": "full", "lego+no_filter": "no_filter", "lego+no_cluster": "no_cluster"}
    table = _summary_table(results)
    for old, new in rename.items():
        table = table.replace(f"{old}\t", f"{new}\t")
    (out_dir / "ablation.tsv").write_text(table)
    print(table, end="")
    return 0


def cmd_annotate(args) -> int:
    from .service import create_app
    from .session import HumanSession

    state = Path(args.state)
    if (state / "state.json").exists():
        session = HumanSession.open(state)
    else:
        if not args.config and not args.preset:
            raise ConfigError(f"no session at {state}; pass --config to start one")
        cfg = _load_config(args)
        session = HumanSession.create(state, cfg, seed=args.seed_offset,
                                      strategy=cfg.strategies[0], ablation=cfg.ablations[0])
    import uvicorn
    app = create_app(session, args.session_token)
    host, _, port = args.bind.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8000))
    return 0


def cmd_convert(args) -> int:
    """Convert an .npz bundle (x, y, edge_index) to the content/cites format."""
    data = np.load(args.npz)
    x, y, edges = data["x"], data["y"], data["edge_index"]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    name = args.name
    with open(out / f"{name}.content", "w") as f:
        for i in range(x.shape[0]):
            feats = "\t".join(str(v) for v in x[i])
            f.write(f"n{i}\t{feats}\tc{int(y[i])}\n")
    with open(out / f"{name}.cites", "w") as f:
        for a, b in edges.T:
            f.write(f"n{int(a)}\tn{int(b)}\n")
    print(f"wrote {out / (name + '.content')} and {out / (name + '.cites')}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gosl",
        description="Label-efficient open-set node classification experiments. "
                    f"Known datasets: {', '.join(known_datasets())}.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--preset", help=f"built-in preset: {sorted(PRESETS)}")
        p.add_argument("--out-dir", default="runs", help="output directory")
        p.add_argument("--jobs", type=int, default=0, help="parallel runs (0 = config value)")
        p.add_argument("--seed-offset", type=int, default=0,
                       help="added to every configured seed")

    p_run = sub.add_parser("run", help="run the experiment matrix and aggregate a summary")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_abl = sub.add_parser("ablate", help="run full / no_filter / no_cluster variants")
    common(p_abl)
    p_abl.set_defaults(func=cmd_ablate)

    p_ann = sub.add_parser("annotate", help="serve a human-annotation session")
    common(p_ann)
    p_ann.add_argument("--state", required=True, help="session state directory")
    p_ann.add_argument("--bind", default="127.0.0.1:8000")
    p_ann.add_argument("--session-token", default=None)
    p_ann.set_defaults(func=cmd_annotate)

    p_conv = sub.add_parser("convert", help="convert an .npz graph to content/cites text")
    p_conv.add_argument("--npz", required=True)
    p_conv.add_argument("--name", required=True)
    p_conv.add_argument("--out-dir", default="data")
    p_conv.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GoslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
