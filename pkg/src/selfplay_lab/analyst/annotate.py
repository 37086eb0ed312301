"""Research-analyst requests, strict reply parsing and batch annotation."""
from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Optional, Tuple

import jinja2

from selfplay_lab.analyst.taxonomy import (
    approach_taxonomy,
    resolve_approach,
    resolve_technique,
    technique_taxonomy,
)
from selfplay_lab.errors import AnnotationError, GatewayError
from selfplay_lab.gateway.base import ChatBackend, complete
from selfplay_lab.types import (
    ANALYST,
    ANALYST_PARAMS,
    MODES,
    SINGLE,
    Annotation,
    ChatMessage,
    ChatRequest,
    Transcript,
)

if TYPE_CHECKING:
    from selfplay_lab.workbench.store import AnnotationStore

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent / "templates"
ANALYST_TEMPLATE = "analyst_system.txt.j2"

MULTIPLE_GIVEN_IN_SINGLE_MODE = "MULTIPLE_GIVEN_IN_SINGLE_MODE"
NORMALIZED = "NORMALIZED"

_FIELD_RE = {
    name: re.compile(rf"^[\s*_#>\-]*{name}S?[\s*_]*:[\s*_]*(?P<value>.*?)[\s*_]*$", re.IGNORECASE)
    for name in ("APPROACH", "TECHNIQUE")
}


def format_transcript(transcript: Transcript) -> str:
    return "\n\n".join(f"{t.speaker.capitalize()}: {t.content}" for t in transcript.turns)


def build_annotation_request(
    transcript: Transcript,
    mode: str,
    template_path: Optional[Path] = None,
) -> ChatRequest:
    """Analyst request for one transcript. A pure function of its arguments."""
    if mode not in MODES:
        raise AnnotationError("INVALID_MODE", f"mode must be one of {MODES}, got {mode!r}", transcript.session_id)
    if not transcript.complete:
        raise AnnotationError("INCOMPLETE_TRANSCRIPT", "only complete transcripts are annotated",
                              transcript.session_id)
    system = _render_system(template_path or TEMPLATE_DIR / ANALYST_TEMPLATE, mode)
    return ChatRequest(
        messages=(
            ChatMessage(role="system", content=system),
            ChatMessage(role="user", content=format_transcript(transcript)),
        ),
        params=ANALYST_PARAMS,
        metadata={"agent": ANALYST, "session_id": transcript.session_id},
    )


def _render_system(template_path: Path, mode: str) -> str:
    template_path = Path(template_path)
    env = jinja2.Environment(
        loader=jinja2.FileSystemLoader(str(template_path.parent)),
        autoescape=False,
        undefined=jinja2.StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
    )
    try:
        template = env.get_template(template_path.name)
        text = template.render(
            approaches=approach_taxonomy(),
            techniques=technique_taxonomy(),
            mode=mode,
        )
    except jinja2.TemplateNotFound as exc:
        raise AnnotationError("INVALID_TEMPLATE", f"template not found: {template_path}") from exc
    except jinja2.TemplateError as exc:
        raise AnnotationError("INVALID_TEMPLATE", f"{template_path}: {exc}") from exc
    return text.rstrip("\n") + "\n"


# ----------------------------------------------------------------------
# Parsing
# ----------------------------------------------------------------------

def _field_value(lines: list[str], name: str) -> Optional[str]:
    pattern = _FIELD_RE[name]
    for line in lines:
        m = pattern.match(line)
        if m:
            return m.group("value")
    return None


def _split_techniques(value: str) -> Tuple[list[str], bool]:
    """Resolve ``a; b; c``. Falls back to commas only when a piece is unknown as a whole."""
    resolved: list[str] = []
    normalized = False
    for piece in (p for p in value.split(";") if p.strip()):
        name = resolve_technique(piece)
        if name is None and "," in piece:
            parts = [p for p in piece.split(",") if p.strip()]
            names = [resolve_technique(p) for p in parts]
            if all(names):
                resolved.extend(names)
                normalized = True
                continue
        if name is None:
            raise AnnotationError("UNKNOWN_TECHNIQUE", f"not a known technique: {piece.strip()!r}")
        normalized = normalized or name != piece.strip()
        resolved.append(name)
    return resolved, normalized


def parse_annotation(raw: str, mode: str, session_id: str) -> Annotation:
    if mode not in MODES:
        raise AnnotationError("INVALID_MODE", f"mode must be one of {MODES}, got {mode!r}", session_id)
    if not raw or not raw.strip():
        raise AnnotationError("EMPTY_RESPONSE", "analyst reply is empty", session_id)

    lines = raw.splitlines()
    approach_text = _field_value(lines, "APPROACH")
    techniques_text = _field_value(lines, "TECHNIQUE")
    if not approach_text:
        raise AnnotationError("MISSING_FIELD", "no 'APPROACH:' line", session_id)
    if not techniques_text:
        raise AnnotationError("MISSING_FIELD", "no 'TECHNIQUES:' line", session_id)

    flags = set()
    approach = resolve_approach(approach_text)
    if approach is None:
        raise AnnotationError("UNKNOWN_APPROACH", f"not a known approach: {approach_text.strip()!r}", session_id)
    if approach != approach_text.strip():
        flags.add(NORMALIZED)

    try:
        techniques, normalized = _split_techniques(techniques_text)
    except AnnotationError as exc:
        raise AnnotationError(exc.code, exc.message, session_id) from exc
    if normalized:
        flags.add(NORMALIZED)
    techniques = list(dict.fromkeys(techniques))
    if not techniques:
        raise AnnotationError("MISSING_FIELD", "'TECHNIQUES:' line has no labels", session_id)
    if mode == SINGLE and len(techniques) > 1:
        techniques = techniques[:1]
        flags.add(MULTIPLE_GIVEN_IN_SINGLE_MODE)

    return Annotation(
        session_id=session_id,
        mode=mode,
        approach=approach,
        techniques=tuple(techniques),
        raw_response=raw,
        flags=frozenset(flags),
    )


def correction_message(error: AnnotationError, mode: str) -> str:
    techniques = "<technique label>" if mode == SINGLE else "<technique label>[; <technique label>...]"
    return (
        f"Your reply could not be used ({error.code}: {error.message}). "
        "Answer again with exactly these two lines, using labels from the lists only:\n"
        f"APPROACH: <approach label>\nTECHNIQUES: {techniques}"
    )


# ----------------------------------------------------------------------
# Batch annotation
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class AnnotationFailure:
    session_id: str
    code: str
    message: str


@dataclass
class AnnotationReport:
    mode: str
    annotations: list[Annotation] = field(default_factory=list)
    errors: list[AnnotationFailure] = field(default_factory=list)
    retried: list[str] = field(default_factory=list)
    skipped: int = 0

    def format_text(self) -> str:
        lines = [f"=== Annotation Summary ({self.mode}) ==="]
        lines.append(f"{'annotated':>28s}: {len(self.annotations)}")
        lines.append(f"{'errors':>28s}: {len(self.errors)}")
        lines.append(f"{'retried':>28s}: {len(self.retried)}")
        lines.append(f"{'skipped':>28s}: {self.skipped}")
        for e in self.errors:
            lines.append(f"{'failed ' + e.session_id:>28s}: {e.code} {e.message}")
        return "\n".join(lines)


def annotate_transcript(
    transcript: Transcript,
    backend: ChatBackend,
    mode: str,
    template_path: Optional[Path] = None,
) -> Tuple[Annotation, bool]:
    """Annotate one transcript; returns the annotation and whether a correction round was needed."""
    request = build_annotation_request(transcript, mode, template_path)
    backend.begin_session(transcript.session_id)
    reply = complete(backend, request)
    try:
        return parse_annotation(reply.content, mode, transcript.session_id), False
    except AnnotationError as first:
        logger.warning("Analyst reply for %s unusable (%s); asking once more", transcript.session_id, first.code)
        retry = ChatRequest(
            messages=request.messages + (
                ChatMessage(role="assistant", content=reply.content),
                ChatMessage(role="user", content=correction_message(first, mode)),
            ),
            params=request.params,
            metadata=request.metadata,
        )
        second = complete(backend, retry)
        return parse_annotation(second.content, mode, transcript.session_id), True


def annotate_batch(
    transcripts: Iterable[Transcript],
    backend: ChatBackend,
    mode: str,
    store: Optional["AnnotationStore"] = None,
    concurrency_limit: int = 1,
    template_path: Optional[Path] = None,
) -> AnnotationReport:
    """Annotate every transcript not yet stored for ``mode``.

    Failures are collected in the report; nothing raises per item.
    """
    if mode not in MODES:
        raise AnnotationError("INVALID_MODE", f"mode must be one of {MODES}, got {mode!r}")
    if concurrency_limit < 1:
        raise ValueError("concurrency_limit must be >= 1")

    report = AnnotationReport(mode=mode)
    done = store.keys() if store is not None else set()
    pending = []
    for transcript in sorted(transcripts, key=lambda t: t.session_id):
        if (transcript.session_id, mode) in done:
            report.skipped += 1
        elif not transcript.complete:
            report.errors.append(AnnotationFailure(transcript.session_id, "INCOMPLETE_TRANSCRIPT",
                                                   "only complete transcripts are annotated"))
        else:
            pending.append(transcript)

    logger.info("Annotating %d transcript(s) in %s mode, %d already stored", len(pending), mode, report.skipped)

    with ThreadPoolExecutor(max_workers=concurrency_limit) as pool:
        futures = {
            pool.submit(annotate_transcript, t, backend, mode, template_path): t.session_id
            for t in pending
        }
        for future in as_completed(futures):
            session_id = futures[future]
            try:
                annotation, retried = future.result()
            except (AnnotationError, GatewayError) as exc:
                logger.warning("Annotation of %s failed: %s", session_id, exc)
                report.errors.append(AnnotationFailure(session_id, exc.code, exc.message))
                continue
            if retried:
                report.retried.append(session_id)
            if store is not None:
                store.write(annotation)
            report.annotations.append(annotation)

    if store is not None:
        store.compact()
    report.annotations.sort(key=lambda a: a.session_id)
    report.errors.sort(key=lambda e: e.session_id)
    report.retried.sort()
    logger.info("Annotation done: %d annotated, %d failed, %d retried",
                len(report.annotations), len(report.errors), len(report.retried))
    return report
