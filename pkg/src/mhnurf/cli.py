"""Command-line entry point: ``mhnurf <command> [flags]``.

Data goes to files (and stdout where noted); logs go to stderr. Every
output file is written to a temporary name and renamed on success.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from contextlib import nullcontext
from dataclasses import replace
from pathlib import Path

from . import layers
from .checkpoint import CheckpointError, atomic_write, load_checkpoint, save_checkpoint
from .embeddings import load_embeddings
from .experiment import (auc_by_treatment, ranking_to_csv, ranking_to_text, read_results,
                         results_to_csv, run_experiment)
from .gradcheck import check_instance, standard_cases
from .ingest import SCHEMES, extract_facets, read_reports
from .stats import scott_knott_rank
from .training import load_config, predict_many, train_reports

log = logging.getLogger("mhnurf")


class CliError(Exception):
    pass


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} not found: {path}")
    return p


def cmd_extract(args):
    reports = read_reports(_require_file(args.reports, "reports file"))
    lines = []
    for r in reports:
        row = {"id": r.id}
        if r.target is not None:
            row["target"] = r.target
        row["facets"] = extract_facets(r, args.scheme).to_dict()
        lines.append(json.dumps(row, ensure_ascii=False) + "\n")
    atomic_write(args.out, "".join(lines))
    log.info("extracted %d reports -> %s", len(reports), args.out)


def cmd_train(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    emb_path = _require_file(args.embeddings, "embeddings file")
    table = load_embeddings(emb_path, cfg.embedding_dim)
    reports = read_reports(_require_file(args.reports, "reports file"))
    log.info("training %s on %d reports (facets %s)", cfg.name, len(reports), ",".join(cfg.facets))
    model, history = train_reports(reports, table, cfg)
    save_checkpoint(args.out, model, cfg, str(emb_path.resolve()))
    sys.stdout.write("epoch,loss\n")
    for i, loss in enumerate(history, 1):
        sys.stdout.write(f"{i},{loss!r}\n")
    if args.loss_figure:
        from .plotting import plot_loss_history
        plot_loss_history(history, args.loss_figure, cfg.name)


def cmd_predict(args):
    model, cfg, emb_path = load_checkpoint(_require_file(args.checkpoint, "checkpoint"))
    emb_path = args.embeddings or emb_path
    if not emb_path:
        raise CliError("checkpoint records no embeddings file; pass --embeddings")
    table = load_embeddings(_require_file(emb_path, "embeddings file"), cfg.embedding_dim)
    reports = read_reports(_require_file(args.reports, "reports file"))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "prob", "label"])
    for report, (label, prob) in zip(reports, predict_many(model, table, reports, cfg)):
        writer.writerow([report.id, repr(prob), label])
    atomic_write(args.out, buf.getvalue())
    log.info("predicted %d reports -> %s", len(reports), args.out)


def cmd_evaluate(args):
    variants = [load_config(p) for p in args.variants]
    dims = {v.embedding_dim for v in variants}
    if len(dims) != 1:
        raise CliError(f"variants disagree on embedding_dim: {sorted(dims)}")
    table = load_embeddings(_require_file(args.embeddings, "embeddings file"), dims.pop())
    reports = read_reports(_require_file(args.reports, "reports file"))
    results = run_experiment(reports, variants, table, runs=args.runs, seed=args.seed)
    atomic_write(args.out, results_to_csv(results))
    log.info("wrote %d run results -> %s", len(results), args.out)


def cmd_rank(args):
    results = read_results(_require_file(args.results, "results file"))
    if not results:
        raise CliError("results file holds no rows")
    treatments = auc_by_treatment(results)
    ranking = scott_knott_rank(treatments, confidence=args.confidence, effect=args.effect,
                               iterations=args.iterations, seed=args.seed)
    text = ranking_to_text(ranking, treatments)
    out = Path(args.out)
    atomic_write(out, ranking_to_csv(ranking, treatments))
    atomic_write(out.with_suffix(".txt"), text)
    if not args.no_figure:
        from .plotting import plot_ranking
        plot_ranking(treatments, ranking, out.with_suffix(".png"))
    sys.stdout.write(text)


def cmd_gradcheck(args):
    cfg = load_config(args.config)
    failed = False
    with layers.corrupted_backward() if args.corrupt_backward else nullcontext():
        for case, inst in standard_cases(cfg.facets, args.seed).items():
            report = check_instance(inst, tolerance=args.tolerance)
            for block, err in report.errors.items():
                ok = err < args.tolerance
                failed |= not ok
                sys.stdout.write(f"{'PASS' if ok else 'FAIL'}  {case:<20}  {block:<34}  {err:.3e}\n")
    sys.stdout.write(f"gradient check {'FAILED' if failed else 'passed'} at tolerance {args.tolerance:g}\n")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mhnurf", description="Find non-functional bug reports with a per-facet hierarchical attention network.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="dump the five tokenized facets of each report")
    p.add_argument("--reports", required=True)
    p.add_argument("--scheme", choices=SCHEMES, default="title+desc")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--reports", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--config", help="key = value config file (defaults: content+comment+code)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--loss-figure", help="optional PNG of the loss history")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score reports with a trained checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--reports", required=True)
    p.add_argument("--embeddings", help="override the embeddings path stored in the checkpoint")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="repeated 80/20 holdout runs for one or more variants")
    p.add_argument("--reports", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--variants", nargs="+", required=True, help="config files, one per variant")
    p.add_argument("--runs", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("rank", help="Scott-Knott ranking of an evaluation results CSV")
    p.add_argument("--results", required=True)
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--effect", type=float, default=0.6)
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="ranking CSV; .txt table and .png figure go alongside")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("gradcheck", help="compare analytic gradients to finite differences")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--corrupt-backward", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args) or 0
    except (CliError, CheckpointError, OSError, ValueError) as exc:
        print(f"mhnurf {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
