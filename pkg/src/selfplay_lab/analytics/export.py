"""CSV tables, SVG bar charts and the markdown report index."""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Mapping, Optional, Sequence, Union

import matplotlib
from matplotlib.figure import Figure

from selfplay_lab.analytics.metrics import (
    AdherenceRow,
    DistributionTable,
    FrequencyTable,
    TrendStat,
)
from selfplay_lab.errors import AnalyticsError

logger = logging.getLogger(__name__)

DISTRIBUTION_HEADER = ("group", "label", "count", "proportion")
FREQUENCY_HEADER = ("label", "count", "share")
REPORT_INDEX = "report.md"

# Fixed ids and no timestamp so the same table always gives the same bytes.
_SVG_RC = {"svg.hashsalt": "selfplay-lab", "svg.fonttype": "none"}
_SVG_METADATA = {"Date": None}

Table = Union[DistributionTable, FrequencyTable]


def export_tables(tables: Mapping[str, Table], output_dir: Path) -> list[Path]:
    """Write ``<name>.csv`` and ``<name>.svg`` for every table; returns the paths written."""
    output_dir = Path(output_dir)
    written: list[Path] = []
    if not tables:
        return written
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise AnalyticsError("IO_ERROR", f"{output_dir}: {exc}") from exc

    for name in sorted(tables):
        table = tables[name]
        csv_path = output_dir / f"{name}.csv"
        svg_path = output_dir / f"{name}.svg"
        if isinstance(table, DistributionTable):
            _write_csv(csv_path, DISTRIBUTION_HEADER,
                       [(r.group, r.label, r.count, f"{r.proportion:.6f}") for r in table.rows])
            fig = _distribution_chart(table)
        elif isinstance(table, FrequencyTable):
            _write_csv(csv_path, FREQUENCY_HEADER,
                       [(r.label, r.count, f"{r.share:.6f}") for r in table.rows])
            fig = _frequency_chart(table)
        else:
            raise AnalyticsError("INVALID_TABLE", f"{name}: unsupported table type {type(table).__name__}")
        _save_svg(fig, svg_path)
        written.extend([csv_path, svg_path])
        logger.info("Wrote %s and %s", csv_path, svg_path)
    return written


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    try:
        with path.open("w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise AnalyticsError("IO_ERROR", f"{path}: {exc}") from exc


def _save_svg(fig: Figure, path: Path) -> None:
    try:
        with matplotlib.rc_context(_SVG_RC):
            fig.savefig(path, format="svg", metadata=_SVG_METADATA)
    except OSError as exc:
        raise AnalyticsError("IO_ERROR", f"{path}: {exc}") from exc


def _distribution_chart(table: DistributionTable) -> Figure:
    groups = table.groups
    labels = list(table.proportions(groups[0])) if groups else []
    width = 0.8 / max(len(groups), 1)

    fig = Figure(figsize=(13, 6))
    ax = fig.subplots()
    for g, group in enumerate(groups):
        props = table.proportions(group)
        xs = [i + (g - (len(groups) - 1) / 2) * width for i in range(len(labels))]
        ax.bar(xs, [props[label] for label in labels], width=width, label=f"{group} (n={table.group_total(group)})")
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("Share of sessions")
    ax.set_ylim(0.0, 1.0)
    ax.set_title("Therapeutic approaches by severity" if table.grouping == "severity" else "Therapeutic approaches")
    ax.grid(alpha=0.2, axis="y")
    if groups:
        ax.legend()
    fig.tight_layout()
    return fig


def _frequency_chart(table: FrequencyTable) -> Figure:
    labels = [r.label for r in table.rows]
    counts = [r.count for r in table.rows]

    fig = Figure(figsize=(10, 7))
    ax = fig.subplots()
    ax.barh(range(len(labels)), counts, color="tab:blue")
    ax.set_yticks(range(len(labels)))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlabel("Sessions")
    title = "Single technique per session" if table.mode == "single" else "Multiple techniques per session"
    ax.set_title(f"{title} (n={table.n_sessions})")
    ax.grid(alpha=0.2, axis="x")
    fig.tight_layout()
    return fig


def write_report_index(
    output_dir: Path,
    tables: Mapping[str, Table],
    trends: Sequence[TrendStat] = (),
    adherence: Sequence[AdherenceRow] = (),
    files: Sequence[Path] = (),
    word_limit: Optional[int] = None,
) -> Path:
    output_dir = Path(output_dir)
    lines = ["# Self-play annotation report", ""]

    lines += ["## Tables", ""]
    for name in sorted(tables):
        table = tables[name]
        if isinstance(table, DistributionTable):
            sizes = ", ".join(f"{g}={table.group_total(g)}" for g in table.groups)
            lines.append(f"- `{name}`: approach distribution ({table.grouping}); sessions {sizes}")
        else:
            lines.append(f"- `{name}`: technique frequency ({table.mode} mode); sessions {table.n_sessions}")
    lines.append("")

    if trends:
        lines += ["## Severity trends", "", "| approach | rho | direction | groups |", "|---|---|---|---|"]
        lines += [f"| {t.label} | {t.rho:+.3f} | {t.direction} | {t.n_groups} |" for t in trends]
        lines.append("")

    if adherence:
        limit = f" (limit {word_limit} words)" if word_limit else ""
        lines += [f"## Therapist guideline adherence{limit}", "",
                  "| severity | sessions | turns | over limit | mean words | max words | multi-question turns |",
                  "|---|---|---|---|---|---|---|"]
        lines += [
            f"| {r.group} | {r.sessions} | {r.therapist_turns} | {r.over_limit_turns} | "
            f"{r.mean_words:.1f} | {r.max_words} | {r.multi_question_turns} |"
            for r in adherence
        ]
        lines.append("")

    if files:
        lines += ["## Files", ""]
        lines += [f"- {p.relative_to(output_dir) if p.is_relative_to(output_dir) else p}" for p in map(Path, files)]
        lines.append("")

    path = output_dir / REPORT_INDEX
    try:
        output_dir.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines), encoding="utf-8")
    except OSError as exc:
        raise AnalyticsError("IO_ERROR", f"{path}: {exc}") from exc
    return path
