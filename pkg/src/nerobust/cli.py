"""Command-line entry point: ``nerobust run|stats|attack|embed|fetch``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

EXIT_OK, EXIT_FAILED_CELL, EXIT_CONFIG = 0, 1, 2


def _load(token: str, seed: int = 0):
    from .harness import ExperimentConfig, load_config_dataset

    if token.startswith("sbm:"):
        raise SystemExit("sbm datasets are only available inside run configs")
    cfg = ExperimentConfig(datasets=[token], methods=[], attacks=[], seed=seed)
    return load_config_dataset(token, cfg)


def cmd_run(args) -> int:
    from .harness import ConfigError, emit_report, parse_config, run_experiment

    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out
        if args.jobs is not None:
            cfg.jobs = args.jobs
        table = run_experiment(cfg)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    paths = emit_report(table, cfg.out_dir, cfg.formats)
    for kind, p in sorted(paths.items()):
        print(f"{kind}: {p}")
    n_failed = len(table.failed)
    print(f"{len(table.raw)} raw rows, {len(table.aggregates)} aggregate rows, {n_failed} failed, "
          f"{len(table.skipped)} skipped cells")
    return EXIT_FAILED_CELL if n_failed else EXIT_OK


def cmd_stats(args) -> int:
    from .graph import graph_stats

    g, labels, prov = _load(args.dataset)
    st = graph_stats(g, labels)
    out = {
        "nodes": st.num_nodes,
        "edges": st.num_edges,
        "labels": st.num_labels,
        "avg_degree": round(st.avg_degree, 6),
        "assortativity": None if st.assortativity is None else round(st.assortativity, 6),
        "homophily": None if st.homophily_ratio is None else round(st.homophily_ratio, 6),
        "sha256": prov["sha256"],
    }
    print(json.dumps(out, indent=1))
    return EXIT_OK


def cmd_attack(args) -> int:
    from .attacks import AttackError, AttackSpec, apply_attack
    from .graph import write_edgelist

    g, labels, _ = _load(args.dataset)
    try:
        spec = AttackSpec(args.strategy, args.budget, args.allow_disconnect, args.seed)
        g_att, log = apply_attack(g, labels, spec)
    except (AttackError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{Path(args.dataset).stem}_{args.strategy}_{args.budget:g}_s{args.seed}"
    write_edgelist(g_att, out / f"{stem}.edgelist")
    (out / f"{stem}.log.json").write_text(log.to_json(indent=1), encoding="utf-8")
    print(f"{log.achieved}/{log.requested} changes; wrote {out / stem}.edgelist and .log.json")
    if log.shortfall_reason:
        print(f"shortfall: {log.shortfall_reason}")
    return EXIT_OK


def cmd_embed(args) -> int:
    from .embed import MethodConfig, embed, write_embedding

    g, _, _ = _load(args.dataset)
    try:
        cfg = MethodConfig(method=args.method, d=args.dim, seed=args.seed)
        emb = embed(g, cfg)
    except (KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    path = args.out or f"{Path(args.dataset).stem}_{args.method}_{args.dim}.emb"
    write_embedding(emb, path)
    print(f"wrote {emb.num_nodes} x {emb.d} embedding to {path}")
    return EXIT_OK


def cmd_fetch(args) -> int:
    from .data import fetch_dataset

    for name, digest in fetch_dataset(args.dataset).items():
        print(f"{name}  sha256={digest}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nerobust", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment config")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("stats", help="print dataset statistics")
    p.add_argument("dataset", help="manifest name or file:<edge list>")
    p.set_defaults(fn=cmd_stats)

    p = sub.add_parser("attack", help="attack a dataset, write edge list and log")
    p.add_argument("dataset")
    p.add_argument("strategy")
    p.add_argument("budget", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--allow-disconnect", action="store_true")
    p.add_argument("--out", default=".")
    p.set_defaults(fn=cmd_attack)

    p = sub.add_parser("embed", help="embed a dataset")
    p.add_argument("dataset")
    p.add_argument("method")
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("fetch", help="download and verify a dataset")
    p.add_argument("dataset")
    p.set_defaults(fn=cmd_fetch)
    return ap


def main(argv=None) -> int:
    from .data import DatasetError

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED_CELL


if __name__ == "__main__":
    sys.exit(main())
