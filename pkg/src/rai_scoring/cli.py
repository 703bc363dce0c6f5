"""Command-line entry point: run, score, report, fairness-audit."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, InputError, RaiError
from .fairness import fairness_report, read_predictions_csv
from .pipeline import RunConfig, run
from .replay import load_replay, score_replay
from .reports import emit_reports
from .scoring import DIMENSIONS, check_weights

EXIT_OK, EXIT_CELL_FAILURE, EXIT_CONFIG = 0, 1, 2
FORMATS = ("json", "markdown", "radar_svg", "attribution_csv")

log = logging.getLogger("rai_scoring")


def _formats(text: str) -> tuple[str, ...]:
    out = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = [f for f in out if f not in FORMATS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {bad}; choose from {', '.join(FORMATS)}")
    return out


def _weights(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"weights must be 4 comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rai-score", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train reference models and score them")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--seed-offset", type=int, default=0, help="added to every configured seed")
    r.add_argument("--output-dir", type=Path, help="overrides the configured output directory")
    r.add_argument("--workers", type=int, help="overrides the configured worker count")

    s = sub.add_parser("score", help="aggregate pre-normalized metrics (replay)")
    s.add_argument("--input", required=True, type=Path)
    s.add_argument("--weights", type=_weights, help="four comma-separated dimension weights")
    s.add_argument("--include-supplements", action="store_true",
                   help="count DemP/EOd in the fairness mean")
    s.add_argument("--markdown", type=Path, help="also write a markdown table here")

    e = sub.add_parser("report", help="re-emit artifacts from a report.json")
    e.add_argument("--input", required=True, type=Path)
    e.add_argument("--format", type=_formats, default=("markdown", "radar_svg"))
    e.add_argument("--output-dir", type=Path, help="defaults to the input file's directory")

    a = sub.add_parser("fairness-audit", help="fairness metrics for an external predictions CSV")
    a.add_argument("--predictions", required=True, type=Path)
    return p


def _cmd_run(args) -> int:
    cfg = RunConfig.from_json(args.config)
    if args.seed_offset:
        cfg = cfg.with_seed_offset(args.seed_offset)
    from dataclasses import replace
    if args.output_dir is not None:
        cfg = replace(cfg, output_dir=str(args.output_dir))
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    report = run(cfg)
    written = emit_reports(report, cfg.output_dir, cfg.formats)
    for p in written:
        log.info("wrote %s", p)
    for cell in report["cells"]:
        if cell["status"] != "ok":
            print(f"FAILED {cell['dataset']}/{cell['model']}: {cell['error']}", file=sys.stderr)
        else:
            print(f"{cell['dataset']}\t{cell['model']}\tRS={cell['profile']['responsibility_score']:.4f}")
    return EXIT_CELL_FAILURE if report["failed_cells"] else EXIT_OK


def format_score_table(rows) -> str:
    head = ["dataset", "model", "f1", *DIMENSIONS, "RS"]
    lines = ["\t".join(head)]
    for row in rows:
        ds = row.dimension_scores
        vals = [row.dataset, row.model, "-" if row.f1 is None else f"{row.f1:.4f}",
                *("-" if d not in ds else f"{ds[d]:.4f}" for d in DIMENSIONS),
                f"{row.responsibility_score:.4f}"]
        lines.append("\t".join(vals))
    return "\n".join(lines) + "\n"


def _cmd_score(args) -> int:
    if args.weights is not None:
        check_weights(args.weights)
    doc = load_replay(args.input)
    rows = score_replay(doc, weights=args.weights,
                        include_supplements=True if args.include_supplements else None)
    sys.stdout.write(format_score_table(rows))
    if args.markdown:
        from .reports import CellView, markdown_table
        cells = [CellView.from_profile(r.dataset, r.model, r.profile) for r in rows]
        args.markdown.write_text(markdown_table(cells))
    return EXIT_OK


def _cmd_report(args) -> int:
    try:
        report = json.loads(args.input.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read report {args.input}: {exc}") from None
    if not isinstance(report, dict) or "cells" not in report:
        raise InputError(f"{args.input} is not a run report (no 'cells')")
    out = args.output_dir or args.input.parent
    for p in emit_reports(report, out, args.format):
        print(p)
    return EXIT_OK


def _cmd_audit(args) -> int:
    rep = fairness_report(read_predictions_csv(args.predictions))
    sys.stdout.write(json.dumps(rep.to_dict(), indent=1) + "\n")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "score": _cmd_score, "report": _cmd_report, "fairness-audit": _cmd_audit}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RaiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CELL_FAILURE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CELL_FAILURE


if __name__ == "__main__":
    sys.exit(main())
