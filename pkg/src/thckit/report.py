"""Static report export.

A report bundle is the precomputed layer a results browser would sit on
top of: consistency tables, per-context rankings, aggregation intervals,
plot-ready series, a small vector bar chart, and a manifest of content
digests. Every byte is determined by the input files, flags, and seed;
nothing here reads clocks, hostnames, or thread counts.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

from . import __version__
from .consistency import (
    AssemblyOptions,
    ConsistencyReport,
    HyperparameterConsistency,
    PtpNormalization,
    RankProfile,
    TransferSetup,
    build_consistency_report,
)
from .dataset import SweepDataset

__all__ = ["ReportBundle", "build_report_bundle", "write_report_bundle",
           "consistency_rows", "entry_to_dict"]


@dataclass(frozen=True)
class ReportBundle:
    """Everything cli_report writes, before serialization."""

    reports: tuple[ConsistencyReport, ...]
    profiles: tuple[tuple[RankProfile, ...], ...]
    provenance: Mapping[str, Any]
    include_kendall: bool


def _digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def file_digest(path: str | Path) -> str:
    return _digest(Path(path).read_bytes())


def build_report_bundle(
    dataset: SweepDataset,
    setups: Sequence[TransferSetup],
    options: AssemblyOptions = AssemblyOptions(),
    normalization: PtpNormalization = PtpNormalization.MAX,
    include_kendall: bool = False,
    inputs: Mapping[str, str] | None = None,
) -> ReportBundle:
    """Score every requested setup and collect provenance.

    ``inputs`` maps input names to content digests; thread count is
    deliberately not recorded because it never affects results.
    """
    setups = [TransferSetup(s) for s in setups]
    if len(set(setups)) != len(setups):
        raise ValueError("duplicate setups requested")
    reports = []
    profiles = []
    for setup in setups:
        report, setup_profiles = build_consistency_report(
            dataset, setup, options, normalization, include_kendall)
        reports.append(report)
        profiles.append(setup_profiles)

    provenance = {
        "tool": "thckit",
        "version": __version__,
        "inputs": dict(inputs or {}),
        "flags": {
            "setups": [s.value for s in setups],
            "interval_source": options.interval_source.value,
            "ranking_mode": options.ranking_mode.value,
            "ptp_normalization": PtpNormalization(normalization).value,
            "resamples": options.resamples,
            "confidence": options.confidence,
            "seed": options.seed,
            "kendall": include_kendall,
            "agent": options.agent,
            "environment": options.environment,
            "data_regime": options.data_regime,
        },
    }
    return ReportBundle(tuple(reports), tuple(profiles), provenance, include_kendall)


def _fixed_label(fixed: Mapping[str, str]) -> str:
    return ";".join(f"{k}={v}" for k, v in sorted(fixed.items()))


def entry_to_dict(entry: HyperparameterConsistency, include_kendall: bool) -> dict[str, Any]:
    data: dict[str, Any] = {
        "hyperparameter": entry.hyperparameter,
        "fixed": dict(entry.fixed),
        "contexts": list(entry.contexts),
        "values": list(entry.values),
        "thc": entry.thc,
        "normalized_ptp": dict(entry.normalized_ptp),
    }
    if include_kendall:
        kendall = entry.kendall
        data["kendall_w"] = None if kendall is None else kendall.w
        data["kendall_mean_tau"] = None if kendall is None else kendall.mean_tau
    return data


def consistency_rows(report: ConsistencyReport, include_kendall: bool) -> list[list[str]]:
    """Rows of the consistency table, shared by the CSV and the printed view."""
    header = ["setup", "hyperparameter", "fixed", "contexts", "values", "thc"]
    if include_kendall:
        header += ["kendall_w", "kendall_mean_tau"]
    rows = [header]
    for entry in report.entries:
        row = [report.setup.value, entry.hyperparameter, _fixed_label(entry.fixed),
               str(len(entry.contexts)), str(len(entry.values)), repr(entry.thc)]
        if include_kendall:
            kendall = entry.kendall
            w = kendall.w if kendall else None
            tau = kendall.mean_tau if kendall else None
            row += ["undefined" if w is None else repr(w),
                    "undefined" if tau is None else repr(tau)]
        rows.append(row)
    return rows


def _csv_bytes(rows: Sequence[Sequence[str]]) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _json_bytes(data: Any) -> bytes:
    return (json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n").encode("utf-8")


def _safe(part: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", part)


def _series_name(setup: TransferSetup, profile: RankProfile) -> str:
    parts = [setup.value, profile.hyperparameter]
    parts += [f"{k}-{v}" for k, v in sorted(profile.fixed.items())]
    return "series/" + _safe("--".join(parts)) + ".csv"


_BAR_COLORS = {
    TransferSetup.ACROSS_AGENTS: "#4c72b0",
    TransferSetup.ACROSS_ENVIRONMENTS: "#dd8452",
    TransferSetup.ACROSS_DATA_REGIMES: "#55a868",
}
_SKIP_COLOR = "#b0b0b0"


def _svg_bytes(bundle: ReportBundle) -> bytes:
    """Bar chart of THC per hyper-parameter, one color per setup; grey
    full-height bars mark hyper-parameters skipped as not comparable."""
    bars: list[tuple[str, float, str, float]] = []  # label, height, color, opacity
    for report in bundle.reports:
        color = _BAR_COLORS[report.setup]
        for entry in report.entries:
            label = entry.hyperparameter
            if entry.fixed:
                label += " [" + _fixed_label(entry.fixed) + "]"
            bars.append((label, entry.thc, color, 1.0))
        for skip in report.skipped:
            label = skip.hyperparameter
            if skip.fixed:
                label += " [" + _fixed_label(skip.fixed) + "]"
            bars.append((label, 1.0, _SKIP_COLOR, 0.45))

    bar_w, gap, left, top, plot_h = 26, 10, 70, 40, 260
    width = left + max(1, len(bars)) * (bar_w + gap) + 40
    height = top + plot_h + 150
    y0 = top + plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="22" font-family="sans-serif" font-size="14">'
        f'THC per hyper-parameter (grey = not comparable)</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y0 - tick * plot_h
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{width - 20}" y2="{y:.1f}" '
                   f'stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" font-family="sans-serif" '
                   f'font-size="11" text-anchor="end">{tick:.2f}</text>')
    for i, (label, value, color, opacity) in enumerate(bars):
        x = left + i * (bar_w + gap)
        h = value * plot_h
        out.append(f'<rect x="{x}" y="{y0 - h:.2f}" width="{bar_w}" height="{h:.2f}" '
                   f'fill="{color}" fill-opacity="{opacity}"/>')
        out.append(f'<text x="{x + bar_w / 2:.1f}" y="{y0 + 12}" font-family="sans-serif" '
                   f'font-size="10" text-anchor="end" '
                   f'transform="rotate(-55 {x + bar_w / 2:.1f} {y0 + 12})">{_escape(label)}</text>')
    legend_x = left
    legend_y = height - 18
    for setup, color in _BAR_COLORS.items():
        if any(r.setup is setup for r in bundle.reports):
            out.append(f'<rect x="{legend_x}" y="{legend_y - 10}" width="12" height="12" fill="{color}"/>')
            out.append(f'<text x="{legend_x + 16}" y="{legend_y}" font-family="sans-serif" '
                       f'font-size="11">across {_escape(setup.value.replace("_", " "))}</text>')
            legend_x += 170
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode("utf-8")


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _bundle_files(bundle: ReportBundle) -> dict[str, bytes]:
    """All report files as path -> bytes (manifest excluded)."""
    include_kendall = bundle.include_kendall

    consistency = []
    skipped = [["setup", "hyperparameter", "fixed", "reason"]]
    rankings = [["setup", "hyperparameter", "fixed", "context", "value",
                 "lower", "upper", "initial_rank", "final_rank"]]
    intervals = [["setup", "hyperparameter", "fixed", "context", "value",
                  "lower", "upper", "point"]]
    series_files: dict[str, bytes] = {}
    setups_json: dict[str, Any] = {}

    for report, profiles in zip(bundle.reports, bundle.profiles):
        rows = consistency_rows(report, include_kendall)
        consistency.extend(rows if not consistency else rows[1:])
        for skip in report.skipped:
            skipped.append([report.setup.value, skip.hyperparameter,
                            _fixed_label(skip.fixed), skip.reason])
        setups_json[report.setup.value] = {
            "entries": [entry_to_dict(e, include_kendall) for e in report.entries],
            "skipped": [{"hyperparameter": s.hyperparameter, "fixed": dict(s.fixed),
                         "reason": s.reason} for s in report.skipped],
        }
        for profile in profiles:
            fixed = _fixed_label(profile.fixed)
            for table in profile.tables:
                context = table.context[report.setup.axis.value]
                for entry in table:
                    rankings.append([
                        report.setup.value, profile.hyperparameter, fixed, context,
                        entry.label, repr(entry.interval.lower), repr(entry.interval.upper),
                        str(entry.initial_rank), repr(entry.final_rank)])
                    intervals.append([
                        report.setup.value, profile.hyperparameter, fixed, context,
                        entry.label, repr(entry.interval.lower), repr(entry.interval.upper),
                        repr(profile.points[(context, entry.label)])])
            series_rows = [["context", "value", "point", "lower", "upper"]]
            for table in profile.tables:
                context = table.context[report.setup.axis.value]
                by_label = {e.label: e for e in table}
                for value in profile.values:
                    entry = by_label[value]
                    series_rows.append([context, value,
                                        repr(profile.points[(context, value)]),
                                        repr(entry.interval.lower),
                                        repr(entry.interval.upper)])
            series_files[_series_name(report.setup, profile)] = _csv_bytes(series_rows)

    report_json = {"provenance": dict(bundle.provenance), "setups": setups_json}

    files = {
        "report.json": _json_bytes(report_json),
        "consistency.csv": _csv_bytes(consistency),
        "skipped.csv": _csv_bytes(skipped),
        "rankings.csv": _csv_bytes(rankings),
        "intervals.csv": _csv_bytes(intervals),
        "thc_scores.svg": _svg_bytes(bundle),
    }
    files.update(series_files)
    return files


def write_report_bundle(bundle: ReportBundle, out_dir: str | Path) -> list[str]:
    """Write all report files plus MANIFEST.sha256; returns written paths.

    The manifest lists the digest of every other file, so two report
    directories are identical exactly when their manifests are.
    """
    root = Path(out_dir)
    files = _bundle_files(bundle)
    manifest_lines = [f"{_digest(data)}  {name}" for name, data in sorted(files.items())]
    files["MANIFEST.sha256"] = ("\n".join(manifest_lines) + "\n").encode("utf-8")

    written = []
    for name in sorted(files):
        path = root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(files[name])
        written.append(str(path))
    return written
