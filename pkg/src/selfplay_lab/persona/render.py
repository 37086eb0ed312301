"""Deterministic system-prompt rendering from vignette data.

Templates are Jinja2 text files under ``templates/``; a caller may point at
a replacement file to swap vignette wording without touching code.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import jinja2

from selfplay_lab.errors import PersonaError
from selfplay_lab.persona.criteria import SeverityProfile
from selfplay_lab.persona.profiles import (
    CLIENT_REFLECTION_LEAD,
    CONTEXT_HEADER,
    GUIDELINES_HEADER,
    PERSONALITY_HEADER,
    STRUGGLES_HEADER,
    THERAPIST_REFLECTION_LEAD,
    TRAITS,
    ClientPersona,
    TherapistProfile,
    validate_persona,
    validate_therapist,
)

TEMPLATE_DIR = Path(__file__).resolve().parent / "templates"
CLIENT_TEMPLATE = "client_prompt.txt.j2"
THERAPIST_TEMPLATE = "therapist_prompt.txt.j2"

_HEADERS = {
    "context": CONTEXT_HEADER,
    "struggles": STRUGGLES_HEADER,
    "personality": PERSONALITY_HEADER,
    "guidelines": GUIDELINES_HEADER,
}

CLIENT_SECTIONS = (
    ("preamble", None),
    ("reflection_questions", CLIENT_REFLECTION_LEAD),
    ("context", CONTEXT_HEADER),
    ("emotional_struggles", STRUGGLES_HEADER),
    ("personality", PERSONALITY_HEADER),
    ("guidelines", GUIDELINES_HEADER),
)
THERAPIST_SECTIONS = (
    ("preamble", None),
    ("reflection_questions", THERAPIST_REFLECTION_LEAD),
    ("guidelines", GUIDELINES_HEADER),
)


@dataclass(frozen=True)
class PromptText:
    text: str
    # section name -> character offset of the section's first line
    section_index: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("Prompt text must be non-empty")
        offsets = list(self.section_index.values())
        if offsets != sorted(offsets) or len(set(offsets)) != len(offsets):
            raise ValueError("Prompt sections must appear in declared order")

    def __str__(self) -> str:
        return self.text


def render_client_prompt(
    persona: ClientPersona,
    template_path: Optional[Path] = None,
    registry: Optional[Sequence[SeverityProfile]] = None,
) -> PromptText:
    result = validate_persona(persona, registry)
    if not result.ok:
        raise PersonaError("INVALID_PERSONA", f"persona {persona.id!r}: {result.describe()}")

    text = _render(
        template_path or TEMPLATE_DIR / CLIENT_TEMPLATE,
        severity_phrase=persona.severity.phrase,
        reflection_lead=CLIENT_REFLECTION_LEAD,
        reflection_questions=list(persona.reflection_questions),
        context_narrative=persona.context_narrative,
        emotional_struggles=list(persona.emotional_struggles),
        personality_lines=personality_lines(persona),
        guidelines=list(persona.guidelines),
        headers=_HEADERS,
    )
    return PromptText(text=text, section_index=_index_sections(text, CLIENT_SECTIONS))


def render_therapist_prompt(
    profile: TherapistProfile,
    template_path: Optional[Path] = None,
) -> PromptText:
    result = validate_therapist(profile)
    if not result.ok:
        raise PersonaError("INVALID_PROFILE", f"therapist {profile.id!r}: {result.describe()}")

    max_words = str(profile.max_words_guideline)
    text = _render(
        template_path or TEMPLATE_DIR / THERAPIST_TEMPLATE,
        preamble=profile.preamble,
        reflection_lead=THERAPIST_REFLECTION_LEAD,
        reflection_questions=list(profile.reflection_questions),
        guidelines=[g.replace("{max_words}", max_words) for g in profile.guidelines],
        headers=_HEADERS,
    )
    return PromptText(text=text, section_index=_index_sections(text, THERAPIST_SECTIONS))


def personality_lines(persona: ClientPersona) -> list[str]:
    """``High agreeableness (doesn't want to be a burden)`` style bullets, fixed trait order."""
    lines = []
    for trait in TRAITS:
        level = persona.personality[trait]
        line = f"{level.capitalize()} {trait.replace('-', ' ')}"
        note = persona.personality_notes.get(trait)
        if note:
            line += f" ({note})"
        lines.append(line)
    return lines


def _render(template_path: Path, **context) -> str:
    template_path = Path(template_path)
    env = jinja2.Environment(
        loader=jinja2.FileSystemLoader(str(template_path.parent)),
        autoescape=False,
        undefined=jinja2.StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
    )
    try:
        text = env.get_template(template_path.name).render(**context)
    except jinja2.TemplateNotFound as exc:
        raise PersonaError("INVALID_TEMPLATE", f"template not found: {template_path}") from exc
    except jinja2.TemplateError as exc:
        raise PersonaError("INVALID_TEMPLATE", f"{template_path}: {exc}") from exc
    return text.rstrip("\n") + "\n"


def _index_sections(text: str, sections) -> dict[str, int]:
    index: dict[str, int] = {}
    cursor = 0
    for name, header in sections:
        if header is None:
            index[name] = 0
            continue
        pos = text.find("\n" + header + "\n", cursor)
        if pos < 0:
            raise PersonaError("INVALID_TEMPLATE", f"rendered prompt lacks section header {header!r}")
        index[name] = pos + 1
        cursor = pos + 1
    return index
