"""Static, self-contained HTML view of one transcript."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional

import jinja2

from selfplay_lab.persona.criteria import SEVERITY_LEVELS
from selfplay_lab.types import Transcript

TEMPLATE_DIR = Path(__file__).resolve().parent / "templates"
TRANSCRIPT_TEMPLATE = "transcript.html.j2"

_env = jinja2.Environment(
    loader=jinja2.FileSystemLoader(str(TEMPLATE_DIR)),
    autoescape=True,
    undefined=jinja2.StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


def default_summary(transcript: Transcript) -> dict:
    """Header data when the persona file is not at hand."""
    return {
        "persona_id": transcript.persona_id,
        "name": "",
        "age": None,
        "severity": SEVERITY_LEVELS[transcript.severity_rank],
        "severity_rank": transcript.severity_rank,
    }


def render_transcript_html(transcript: Transcript, persona_summary: Optional[Mapping] = None) -> str:
    summary = dict(default_summary(transcript))
    summary.update(persona_summary or {})
    return _env.get_template(TRANSCRIPT_TEMPLATE).render(transcript=transcript, summary=summary)


def write_transcript_html(path: Path, transcript: Transcript, persona_summary: Optional[Mapping] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_transcript_html(transcript, persona_summary), encoding="utf-8")
    return path
