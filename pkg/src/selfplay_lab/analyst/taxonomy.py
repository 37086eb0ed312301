"""Closed label sets for therapeutic approaches and techniques.

Both registries are immutable. Free-text labels coming back from the analyst
model are mapped onto canonical names through ``normalize`` plus an alias
index; anything that does not resolve is rejected rather than guessed.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Tuple

SFBT = "SFBT"
CBT = "CBT"
MI = "MI"
TECHNIQUE_FAMILIES = (SFBT, CBT, MI)


@dataclass(frozen=True)
class ApproachLabel:
    canonical_name: str
    full_name: str
    key_traits: str
    llm_indicators: str
    aliases: Tuple[str, ...] = ()

    @property
    def display_name(self) -> str:
        if self.full_name == self.canonical_name:
            return self.full_name
        return f"{self.full_name} ({self.canonical_name})"


@dataclass(frozen=True)
class TechniqueLabel:
    canonical_name: str
    approach_tags: frozenset
    aliases: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.approach_tags or not set(self.approach_tags) <= set(TECHNIQUE_FAMILIES):
            raise ValueError(f"{self.canonical_name!r}: approach_tags must be a non-empty subset of {TECHNIQUE_FAMILIES}")

    @property
    def tags_text(self) -> str:
        return ", ".join(t for t in TECHNIQUE_FAMILIES if t in self.approach_tags)


_APPROACH_ROWS = (
    ApproachLabel(
        "ACT", "Acceptance and Commitment Therapy",
        "Mindfulness, values-based decision-making, defusion from negative thoughts",
        "Encouraging acceptance rather than control, using metaphors to reframe distress "
        "(e.g., \"Thoughts are like passing clouds.\")",
    ),
    ApproachLabel(
        "CBT", "Cognitive-Behavioral Therapy",
        "Identifying cognitive distortions, structured problem-solving, goal-setting",
        "Challenging irrational thoughts, suggesting behavior experiments, promoting cognitive reframing",
        aliases=("Cognitive Behavioural Therapy", "Cognitive Therapy"),
    ),
    ApproachLabel(
        "DBT", "Dialectical Behavior Therapy",
        "Emotional regulation, distress tolerance, mindfulness, validation plus challenge",
        "Teaching coping strategies, balancing validation with encouraging change",
        aliases=("Dialectical Behaviour Therapy",),
    ),
    ApproachLabel(
        "CTRT", "Choice Theory & Reality Therapy",
        "Focus on personal responsibility, meeting psychological needs, present-focused problem-solving",
        "Encouraging self-evaluation (\"Is what you're doing helping you get what you want?\"), "
        "emphasizing choices and agency, guiding toward realistic action steps",
        aliases=("Reality Therapy", "Choice Theory"),
    ),
    ApproachLabel(
        "Existential Therapy", "Existential Therapy",
        "Exploring meaning, existential anxiety, freedom and responsibility",
        "Discussing purpose, encouraging meaning-making, engaging with existential fears about life and death",
        aliases=("Existential",),
    ),
    ApproachLabel(
        "IPT", "Interpersonal Therapy",
        "Improving communication, addressing relationship conflicts, grief, or life transitions",
        "Asking about social support, exploring past and present relationships, helping navigate conflicts",
        aliases=("Interpersonal Psychotherapy",),
    ),
    ApproachLabel(
        "MI", "Motivational Interviewing",
        "Helping clients resolve ambivalence, open-ended questions, reinforcing change talk, often involves "
        "open questions, affirmation, reflections, and summaries (OARS)",
        "Asking questions like \"What would change if you took this step?\", amplifying the client’s "
        "own motivation",
    ),
    ApproachLabel(
        "Narrative Therapy", "Narrative Therapy",
        "Viewing identity through personal stories, externalizing problems",
        "Reframing distress as a separate entity (e.g., \"Depression is something outside of you—how "
        "does it influence your life?\")",
        aliases=("Narrative",),
    ),
    ApproachLabel(
        "PCT", "Person-Centered Therapy",
        "Empathy, unconditional positive regard, non-directive support",
        "Frequent validation, reflective listening, avoiding advice-giving, encouraging self-exploration",
        aliases=("Person-Centred Therapy", "Client-Centered Therapy", "Client-Centred Therapy", "Rogerian Therapy"),
    ),
    ApproachLabel(
        "Psychodynamic Therapy", "Psychodynamic Therapy",
        "Uncovering unconscious conflicts, exploring early life experiences, transference analysis",
        "Asking about childhood patterns, linking past experiences to current emotions, interpreting "
        "unconscious motivations",
        aliases=("Psychodynamic",),
    ),
    ApproachLabel(
        "Schema Therapy", "Schema Therapy",
        "Identifying deep-rooted schemas (e.g., abandonment, defectiveness), reworking maladaptive patterns",
        "Recognizing recurring negative life themes, using limited reparenting or imagery rescripting",
        aliases=("Schema-Focused Therapy",),
    ),
    ApproachLabel(
        "SFBT", "Solution-Focused Brief Therapy",
        "Focusing on solutions rather than problems, scaling questions, miracle question",
        "Asking \"What small step could you take today?\" or \"If things got better overnight, what would "
        "be different?\"",
        aliases=("Solution-Focused Therapy",),
    ),
)

_TECHNIQUE_ROWS = (
    # SFBT; goal setting is shared with CBT
    TechniqueLabel("goal setting", frozenset({SFBT, CBT}), aliases=("goal-setting",)),
    TechniqueLabel("miracle question", frozenset({SFBT})),
    TechniqueLabel("exception finding questions", frozenset({SFBT}),
                   aliases=("exception finding", "exception questions", "exception-finding questions")),
    TechniqueLabel("scaling questions", frozenset({SFBT}), aliases=("scaling question", "scaling")),
    TechniqueLabel("coping question", frozenset({SFBT}), aliases=("coping questions",)),
    TechniqueLabel("compliments", frozenset({SFBT}), aliases=("complimenting",)),
    TechniqueLabel("reframing the problem in positive ways", frozenset({SFBT}),
                   aliases=("positive reframing", "reframing")),
    # CBT
    TechniqueLabel("cognitive restructuring", frozenset({CBT}),
                   aliases=("Cognitive restructuring / challenging thoughts", "challenging thoughts")),
    TechniqueLabel("interoceptive exposure", frozenset({CBT})),
    TechniqueLabel("exposure and response prevention", frozenset({CBT}), aliases=("ERP",)),
    TechniqueLabel("progressive muscle relaxation", frozenset({CBT}), aliases=("PMR",)),
    TechniqueLabel("behavioral activation", frozenset({CBT}), aliases=("behavioural activation",)),
    TechniqueLabel("de-catastrophizing", frozenset({CBT}),
                   aliases=("De-catastrophizing (e.g., play the script till the end)", "decatastrophizing",
                            "de-catastrophising", "play the script till the end")),
    TechniqueLabel("mood monitoring", frozenset({CBT})),
    # MI
    TechniqueLabel("open questions", frozenset({MI}), aliases=("open-ended questions", "open question")),
    TechniqueLabel("affirmations", frozenset({MI}), aliases=("affirmation",)),
    TechniqueLabel("reflective listening", frozenset({MI}), aliases=("reflections",)),
    TechniqueLabel("summary reflections", frozenset({MI}), aliases=("summaries", "summarizing")),
    TechniqueLabel("eliciting change talk", frozenset({MI}), aliases=("change talk",)),
    TechniqueLabel("readiness ruler", frozenset({MI})),
    TechniqueLabel("enhancing self-efficacy", frozenset({MI}),
                   aliases=("Enhancing self-efficacy / confidence", "enhancing confidence", "self-efficacy")),
)


def approach_taxonomy() -> Tuple[ApproachLabel, ...]:
    return _APPROACH_ROWS


def technique_taxonomy() -> Tuple[TechniqueLabel, ...]:
    return _TECHNIQUE_ROWS


def approach_names() -> Tuple[str, ...]:
    return tuple(a.canonical_name for a in _APPROACH_ROWS)


def technique_names() -> Tuple[str, ...]:
    return tuple(t.canonical_name for t in _TECHNIQUE_ROWS)


# ----------------------------------------------------------------------
# Normalization
# ----------------------------------------------------------------------

_DASHES = "‐‑‒–—―−﹘﹣－-"
_DASH_RE = re.compile(f"[{re.escape(_DASHES)}]")
_SLASH_RE = re.compile(r"\s*/\s*")
_ENUM_RE = re.compile(r"^(?:\d+[.)]|[a-z][.)](?=\s))\s*")
_EDGE_CHARS = " \t\r\n*_`\"'‘’“”•·.,;:!>#"


def normalize(text: str) -> str:
    """Caseless, spacing-insensitive form of a label.

    Dashes and hyphens become spaces, ``&`` becomes ``and`` and surrounding
    bullets, quotes, markdown emphasis and trailing punctuation are dropped.
    """
    s = unicodedata.normalize("NFKC", unicodedata.normalize("NFKC", text).casefold())
    s = s.replace("&", " and ")
    s = _DASH_RE.sub(" ", s)
    s = _SLASH_RE.sub(" / ", s)
    s = " ".join(s.split())
    while True:
        stripped = _ENUM_RE.sub("", s.strip(_EDGE_CHARS)).strip(_EDGE_CHARS)
        stripped = " ".join(stripped.split())
        if stripped == s:
            return s
        s = stripped


_PAREN_RE = re.compile(r"^(?P<head>.*?)\s*\((?P<inner>[^()]*)\)$")


def _split_parenthetical(key: str) -> Optional[Tuple[str, str]]:
    m = _PAREN_RE.match(key)
    if not m:
        return None
    return normalize(m.group("head")), normalize(m.group("inner"))


def _build_index(entries: Iterable[Tuple[str, Iterable[str]]]) -> Mapping[str, str]:
    index: dict[str, str] = {}
    for canonical, names in entries:
        for name in names:
            key = normalize(name)
            owner = index.setdefault(key, canonical)
            if owner != canonical:
                raise ValueError(f"label {name!r} is ambiguous between {owner!r} and {canonical!r}")
    return index


@lru_cache(maxsize=None)
def approach_index() -> Mapping[str, str]:
    return _build_index(
        (a.canonical_name, (a.canonical_name, a.full_name, a.display_name) + a.aliases)
        for a in _APPROACH_ROWS
    )


@lru_cache(maxsize=None)
def technique_index() -> Mapping[str, str]:
    return _build_index((t.canonical_name, (t.canonical_name,) + t.aliases) for t in _TECHNIQUE_ROWS)


def _resolve(text: str, index: Mapping[str, str]) -> Optional[str]:
    """Whole label first. A trailing parenthetical is accepted only when it names
    the same label as the text before it (its abbreviation, full name or alias).
    """
    key = normalize(text)
    if key in index:
        return index[key]
    parts = _split_parenthetical(key)
    if parts is None:
        return None
    head, inner = parts
    owner = index.get(head)
    if owner is None:
        return None
    if inner and index.get(inner) != owner:
        return None
    return owner


def resolve_approach(text: str) -> Optional[str]:
    """Canonical approach name for ``text`` or ``None``."""
    return _resolve(text, approach_index())


def resolve_technique(text: str) -> Optional[str]:
    return _resolve(text, technique_index())
