"""Command-line pipeline: validate, rank, thc, report, synth.

Exit codes: 0 success, 1 dataset validation failure, 2 usage error (bad
flags, unreadable files, selectors matching nothing), 3 degenerate
computation (a setup with nothing comparable, or an undefined Kendall
statistic under --strict).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .consistency import (
    AssemblyOptions,
    IntervalSource,
    PtpNormalization,
    TransferSetup,
    build_consistency_report,
    rank_context,
)
from .dataset import (
    DatasetError,
    EmptySliceError,
    bundled_schema_bytes,
    dump_schema,
    load_dataset,
    write_baselines,
    write_run_log,
)
from .ranking import RankingMode
from .report import (
    build_report_bundle,
    consistency_rows,
    entry_to_dict,
    file_digest,
    write_report_bundle,
)
from .stats import DEFAULT_CONFIDENCE, DEFAULT_RESAMPLES
from .synth import generate, load_design

__all__ = ["main"]

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_USAGE = 2
EXIT_DEGENERATE = 3

_SETUPS = {"agents": TransferSetup.ACROSS_AGENTS,
           "environments": TransferSetup.ACROSS_ENVIRONMENTS,
           "data-regimes": TransferSetup.ACROSS_DATA_REGIMES}


class DegenerateError(RuntimeError):
    """A requested statistic is undefined or has nothing to compare."""


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--runs", required=True, help="run log CSV")
    parser.add_argument("--baselines", required=True, help="per-environment baseline CSV")
    parser.add_argument("--schema", default=None,
                        help="schema YAML (default: bundled Atari DER/DrQ(eps) schema)")


def _add_aggregation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--interval-source", choices=[s.value for s in IntervalSource],
                        default=IntervalSource.IQM_CI.value,
                        help="interval per value: bootstrap CI of the IQM, or mean +/- sd")
    parser.add_argument("--resamples", type=int, default=DEFAULT_RESAMPLES,
                        help="bootstrap resamples (default %(default)s)")
    parser.add_argument("--confidence", type=float, default=DEFAULT_CONFIDENCE,
                        help="bootstrap confidence level (default %(default)s)")
    parser.add_argument("--seed", type=int, default=0, help="master seed for resampling")
    parser.add_argument("--workers", type=int, default=1,
                        help="threads for bootstrap resampling; never affects results")
    parser.add_argument("--ranking-mode", choices=[m.value for m in RankingMode],
                        default=RankingMode.SPAN.value,
                        help="fractional ranking rule (default %(default)s)")


def _add_selector_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--agent", default=None, help="pin the agent coordinate")
    parser.add_argument("--environment", default=None,
                        help="pin one environment instead of pooling all of them")
    parser.add_argument("--data-regime", dest="data_regime", default=None,
                        help="pin the data regime coordinate")


def _add_scoring_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ptp-normalization", choices=[n.value for n in PtpNormalization],
                        default=PtpNormalization.MAX.value,
                        help="per-value spread normalization: by max attainable spread "
                             "(default) or by the spread total (degenerate, for audit)")
    parser.add_argument("--kendall", action="store_true",
                        help="also report Kendall's W and mean pairwise tau-b")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thckit",
        description="Quantify how consistently hyper-parameter choices transfer "
                    "across agents, environments, and data regimes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--verbose", action="store_true", help="log INFO-level detail")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a run log and baselines against a schema")
    _add_dataset_flags(p)

    p = sub.add_parser("rank", help="rank one hyper-parameter's values in one context")
    _add_dataset_flags(p)
    _add_aggregation_flags(p)
    p.add_argument("--hyperparameter", required=True)
    p.add_argument("--agent", required=True)
    p.add_argument("--data-regime", dest="data_regime", required=True)
    p.add_argument("--environment", default=None,
                   help="pin one environment instead of pooling all of them")
    p.add_argument("--json", default=None, help="also write the table as JSON to this path")

    p = sub.add_parser("thc", help="score rank consistency across a transfer setup")
    _add_dataset_flags(p)
    _add_aggregation_flags(p)
    _add_selector_flags(p)
    _add_scoring_flags(p)
    p.add_argument("--setup", required=True, choices=sorted(_SETUPS),
                   help="which coordinate varies across contexts")
    p.add_argument("--strict", action="store_true",
                   help="fail (exit 3) when a requested Kendall statistic is undefined")
    p.add_argument("--json", default=None, help="also write the report as JSON to this path")

    p = sub.add_parser("report", help="write the full static report bundle")
    _add_dataset_flags(p)
    _add_aggregation_flags(p)
    _add_selector_flags(p)
    _add_scoring_flags(p)
    p.add_argument("--setup", choices=sorted(_SETUPS) + ["all"], default="all")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("synth", help="generate a synthetic sweep from a design file")
    p.add_argument("--design", required=True, help="planted design YAML")
    p.add_argument("--out", required=True, help="output directory for runs/baselines/schema")
    p.add_argument("--seed", type=int, default=None, help="override the design's seed")
    p.add_argument("--noise-scale", type=float, default=None,
                   help="override the design's noise scale")
    p.add_argument("--seeds-per-cell", type=int, default=None,
                   help="override the design's seeds per cell")
    return parser


def _options(args: argparse.Namespace) -> AssemblyOptions:
    return AssemblyOptions(
        interval_source=IntervalSource(args.interval_source),
        ranking_mode=RankingMode(args.ranking_mode),
        resamples=args.resamples,
        confidence=args.confidence,
        seed=args.seed,
        workers=args.workers,
        agent=getattr(args, "agent", None) if args.command != "rank" else None,
        environment=getattr(args, "environment", None) if args.command != "rank" else None,
        data_regime=getattr(args, "data_regime", None) if args.command != "rank" else None,
    )


def _print_table(rows: Sequence[Sequence[str]]) -> None:
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    for index, row in enumerate(rows):
        print("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if index == 0:
            print("  ".join("-" * width for width in widths))


def _write_json(path: str, data: Any) -> None:
    text = json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def _cmd_validate(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.runs, args.baselines, args.schema)
    hps = sorted({rec.hyperparameter for rec in dataset.records})
    environments = {rec.environment for rec in dataset.records}
    print(f"OK: {len(dataset)} runs across {len(hps)} hyperparameter(s), "
          f"{len(environments)} environment(s)")
    return EXIT_OK


def _cmd_rank(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.runs, args.baselines, args.schema)
    options = _options(args)
    table, points = rank_context(
        dataset, args.hyperparameter, agent=args.agent,
        data_regime=args.data_regime, environment=args.environment, options=options)

    context = "; ".join(f"{k}={v}" for k, v in sorted(table.context.items()))
    print(f"hyperparameter {args.hyperparameter}; {context}; "
          f"source={options.interval_source.value}; mode={options.ranking_mode.value}")
    rows = [["value", "lower", "upper", "point", "initial_rank", "final_rank"]]
    for entry in table:
        rows.append([entry.label, repr(entry.interval.lower), repr(entry.interval.upper),
                     repr(points[entry.label]), str(entry.initial_rank), repr(entry.final_rank)])
    _print_table(rows)

    if args.json:
        _write_json(args.json, {
            "hyperparameter": args.hyperparameter,
            "context": dict(table.context),
            "interval_source": options.interval_source.value,
            "ranking_mode": options.ranking_mode.value,
            "entries": [{
                "value": entry.label,
                "lower": entry.interval.lower,
                "upper": entry.interval.upper,
                "point": points[entry.label],
                "initial_rank": entry.initial_rank,
                "final_rank": entry.final_rank,
            } for entry in table],
        })
    return EXIT_OK


def _cmd_thc(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.runs, args.baselines, args.schema)
    setup = _SETUPS[args.setup]
    options = _options(args)
    normalization = PtpNormalization(args.ptp_normalization)
    report, _ = build_consistency_report(
        dataset, setup, options, normalization, include_kendall=args.kendall)

    if not report.entries:
        reasons = "; ".join(f"{s.hyperparameter}: {s.reason}" for s in report.skipped)
        raise DegenerateError(
            f"nothing comparable across {args.setup}" + (f" ({reasons})" if reasons else ""))

    _print_table(consistency_rows(report, args.kendall))
    for skip in report.skipped:
        fixed = "; ".join(f"{k}={v}" for k, v in sorted(skip.fixed.items()))
        print(f"skipped {skip.hyperparameter}" + (f" [{fixed}]" if fixed else "") + f": {skip.reason}")

    if args.json:
        _write_json(args.json, {
            "setup": setup.value,
            "ptp_normalization": normalization.value,
            "entries": [entry_to_dict(e, args.kendall) for e in report.entries],
            "skipped": [{"hyperparameter": s.hyperparameter, "fixed": dict(s.fixed),
                         "reason": s.reason} for s in report.skipped],
        })

    if args.strict and args.kendall:
        undefined = []
        for entry in report.entries:
            if entry.kendall is None or entry.kendall.w is None:
                fixed = ";".join(f"{k}={v}" for k, v in sorted(entry.fixed.items()))
                undefined.append(f"{entry.hyperparameter}" + (f" [{fixed}]" if fixed else ""))
        if undefined:
            raise DegenerateError(f"Kendall W undefined for: {', '.join(undefined)}")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.runs, args.baselines, args.schema)
    setups = list(_SETUPS.values()) if args.setup == "all" else [_SETUPS[args.setup]]
    options = _options(args)

    inputs = {"runs": file_digest(args.runs), "baselines": file_digest(args.baselines)}
    if args.schema:
        inputs["schema"] = file_digest(args.schema)
    else:
        inputs["schema"] = hashlib.sha256(bundled_schema_bytes()).hexdigest()

    bundle = build_report_bundle(
        dataset, setups, options, PtpNormalization(args.ptp_normalization),
        include_kendall=args.kendall, inputs=inputs)
    written = write_report_bundle(bundle, args.out)
    print(f"wrote {len(written)} files under {args.out}")
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    design = load_design(args.design)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.noise_scale is not None:
        overrides["noise_scale"] = args.noise_scale
    if args.seeds_per_cell is not None:
        overrides["seeds_per_cell"] = args.seeds_per_cell
    if overrides:
        design = dataclasses.replace(design, **overrides)

    dataset = generate(design)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "runs.csv", "w", encoding="utf-8", newline="") as fh:
        write_run_log(dataset, fh)
    with open(out / "baselines.csv", "w", encoding="utf-8", newline="") as fh:
        write_baselines(dataset, fh)
    with open(out / "schema.yaml", "w", encoding="utf-8") as fh:
        dump_schema(dataset.schema, fh)
    print(f"wrote {len(dataset)} runs to {out}")
    return EXIT_OK


_COMMANDS = {
    "validate": _cmd_validate,
    "rank": _cmd_rank,
    "thc": _cmd_thc,
    "report": _cmd_report,
    "synth": _cmd_synth,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, format="%(levelname)s %(message)s",
                        level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return _COMMANDS[args.command](args)
    except DatasetError as exc:
        for line in exc.diagnostics:
            print(line, file=sys.stderr)
        print(f"validation failed with {len(exc.diagnostics)} problem(s)", file=sys.stderr)
        return EXIT_INVALID
    except DegenerateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except EmptySliceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
