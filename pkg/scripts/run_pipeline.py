#!/usr/bin/env python3
"""simulate -> annotate -> report -> render, one subcommand per stage."""
from __future__ import annotations

import argparse
import logging
import sys
from collections import defaultdict
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from dotenv import load_dotenv

from selfplay_lab.analyst.annotate import annotate_batch
from selfplay_lab.analytics.export import export_tables, write_report_index
from selfplay_lab.analytics.metrics import (
    BY_SEVERITY,
    DEFAULT_DEAD_ZONE,
    GROUPINGS,
    FrequencyTable,
    approach_distribution,
    guideline_adherence,
    technique_frequency,
    trend_report,
)
from selfplay_lab.errors import AnalyticsError, LabError
from selfplay_lab.gateway.base import ChatBackend
from selfplay_lab.gateway.live import LiveBackend, LiveBackendConfig
from selfplay_lab.gateway.scripted import load_script
from selfplay_lab.persona.criteria import SEVERITY_LEVELS
from selfplay_lab.persona.profiles import BUILTIN_PERSONA_IDS, builtin_therapist, persona_summary, resolve_persona
from selfplay_lab.sim.batch import run_batch
from selfplay_lab.sim.engine import epoch_clock, utc_now
from selfplay_lab.types import MODES
from selfplay_lab.workbench.html import write_transcript_html
from selfplay_lab.workbench.manifest import load_manifest
from selfplay_lab.workbench.store import ANNOTATIONS_FILE, AnnotationStore, TranscriptStore

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_FATAL = 3

BATCH_SUMMARY_FILE = "batch_summary.json"


def _live_backend(arg: Optional[str]) -> ChatBackend:
    if arg:
        raise ValueError("the live backend takes no argument")
    try:
        config = LiveBackendConfig.from_env()
    except ValueError as exc:
        raise LabError("INVALID_CONFIG", f"live backend environment: {exc}") from exc
    return LiveBackend(config)


def _scripted_backend(arg: Optional[str]) -> ChatBackend:
    if not arg:
        raise ValueError("usage: scripted:<path to reply script>")
    return load_script(Path(arg))


_BACKEND_REGISTRY = {
    "live": _live_backend,
    "scripted": _scripted_backend,
}


def build_backend(spec: str) -> ChatBackend:
    """``live`` or ``scripted:<path>``."""
    kind, _, arg = spec.partition(":")
    factory = _BACKEND_REGISTRY.get(kind)
    if factory is None:
        known = ", ".join(sorted(_BACKEND_REGISTRY))
        raise ValueError(f"Unknown backend {kind!r}. Known: {known}")
    return factory(arg or None)


def _is_scripted(spec: str) -> bool:
    return spec.partition(":")[0] == "scripted"


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(description="Therapist/client self-play pipeline")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="Run a self-play batch from a manifest")
    p.add_argument("--manifest", required=True, help="Path to a JSON run manifest")
    p.add_argument("--backend", required=True, help="live | scripted:<path>")
    p.add_argument("--out", default=None, help="Output directory (default: manifest output_dir)")
    p.add_argument("--concurrency", type=int, default=None, help="Override concurrency_limit")

    p = sub.add_parser("annotate", help="Label stored transcripts with approach and techniques")
    p.add_argument("--transcripts", required=True, help="Directory holding transcripts.jsonl")
    p.add_argument("--mode", required=True, choices=MODES)
    p.add_argument("--backend", required=True, help="live | scripted:<path>")
    p.add_argument("--out", default=None, help=f"Annotation file (default: <transcripts>/{ANNOTATIONS_FILE})")
    p.add_argument("--concurrency", type=int, default=1)
    p.add_argument("--analyst-prompt", default=None, help="Replacement analyst system-prompt template")

    p = sub.add_parser("report", help="Aggregate annotations into tables, charts and report.md")
    p.add_argument("--annotations", required=True, help="Path to annotations.jsonl")
    p.add_argument("--transcripts", required=True, help="Directory holding transcripts.jsonl")
    p.add_argument("--group-by", default=BY_SEVERITY, choices=GROUPINGS)
    p.add_argument("--out", required=True, help="Report directory")
    p.add_argument("--dead-zone", type=float, default=DEFAULT_DEAD_ZONE, help="|rho| below this is 'flat'")
    p.add_argument("--word-limit", type=int, default=None,
                   help="Therapist word limit for adherence (default: built-in therapist's)")

    p = sub.add_parser("render", help="Write one stored session as a static HTML page")
    p.add_argument("--transcript", required=True, help="session_id to render")
    p.add_argument("--transcripts", default=".", help="Directory holding transcripts.jsonl")
    p.add_argument("--out", required=True, help="Output .html file")
    return parser


# ----------------------------------------------------------------------
# Subcommands
# ----------------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    manifest = load_manifest(Path(args.manifest))
    if args.concurrency is not None:
        if args.concurrency < 1:
            raise ValueError("--concurrency must be >= 1")
        manifest = replace(manifest, concurrency_limit=args.concurrency)
    out = Path(args.out) if args.out else manifest.output_dir
    backend = build_backend(args.backend)
    # Scripted runs pin timestamps so reruns give byte-identical stores.
    clock = epoch_clock if _is_scripted(args.backend) else utc_now

    store = TranscriptStore.in_dir(out)
    summary = run_batch(manifest, backend, store, clock=clock)
    summary_path = summary.write_json(out / BATCH_SUMMARY_FILE)

    print(summary.format_text())
    print(f"{'transcripts':>28s}: {store.path}")
    print(f"{'summary_json':>28s}: {summary_path}")
    return EXIT_PARTIAL if summary.failed else EXIT_OK


def cmd_annotate(args: argparse.Namespace) -> int:
    transcripts = TranscriptStore.in_dir(Path(args.transcripts)).read_all()
    if not transcripts:
        logger.warning("No transcripts found in %s", args.transcripts)
    store = AnnotationStore(Path(args.out)) if args.out else AnnotationStore.in_dir(Path(args.transcripts))
    report = annotate_batch(
        transcripts,
        build_backend(args.backend),
        args.mode,
        store=store,
        concurrency_limit=args.concurrency,
        template_path=Path(args.analyst_prompt) if args.analyst_prompt else None,
    )
    print(report.format_text())
    print(f"{'annotations':>28s}: {store.path}")
    return EXIT_PARTIAL if report.errors else EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    annotations = AnnotationStore(Path(args.annotations)).read_all()
    transcripts = TranscriptStore.in_dir(Path(args.transcripts)).read_all()
    index = {t.session_id: t for t in transcripts}
    out = Path(args.out)

    by_mode = defaultdict(list)
    for a in annotations:
        by_mode[a.mode].append(a)

    tables = {}
    trends = []
    for mode in MODES:
        if not by_mode[mode]:
            continue
        distribution = approach_distribution(by_mode[mode], index, args.group_by)
        tables[f"approach_distribution_{mode}"] = distribution
        tables[f"technique_frequency_{mode}"] = technique_frequency(by_mode[mode], mode)
        if args.group_by == BY_SEVERITY and not trends:
            if set(SEVERITY_LEVELS) <= set(distribution.groups):
                trends = trend_report(distribution, args.dead_zone)
            else:
                logger.warning("Skipping severity trends: %s mode covers groups %s only",
                               mode, distribution.groups)
    if not tables:
        raise AnalyticsError("EMPTY_INPUT", f"no annotations in {args.annotations}")

    word_limit = args.word_limit or builtin_therapist().max_words_guideline
    adherence = guideline_adherence(transcripts, word_limit)
    files = export_tables(tables, out)
    report_path = write_report_index(out, tables, trends, adherence, files, word_limit=word_limit)

    print("=== Report Summary ===")
    for name in sorted(tables):
        table = tables[name]
        total = table.n_sessions if isinstance(table, FrequencyTable) else sum(r.count for r in table.rows)
        print(f"{name:>28s}: {total} session(s)")
    for t in trends[:2]:
        print(f"{'trend ' + t.label:>28s}: rho={t.rho:+.3f} ({t.direction})")
    print(f"{'report':>28s}: {report_path}")
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    store = TranscriptStore.in_dir(Path(args.transcripts))
    transcript = store.get(args.transcript)
    if transcript is None:
        logger.error("Session %s not found in %s", args.transcript, store.path)
        return EXIT_FATAL
    summary = None
    if transcript.persona_id in BUILTIN_PERSONA_IDS:
        summary = persona_summary(resolve_persona(transcript.persona_id))
    path = write_transcript_html(Path(args.out), transcript, summary)
    print(f"{'html':>28s}: {path}")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "annotate": cmd_annotate,
    "report": cmd_report,
    "render": cmd_render,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(level=args.log_level, format="%(asctime)s - %(levelname)s - %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except (LabError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
