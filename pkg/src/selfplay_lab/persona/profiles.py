"""Client persona and therapist vignette data, validation and loading."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Optional, Sequence, Tuple, Union

from selfplay_lab.errors import PersonaError
from selfplay_lab.persona.criteria import SeverityProfile, builtin_severity_registry

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent / "data"

TRAITS = ("openness", "extraversion", "agreeableness", "emotional-stability")
TRAIT_LEVELS = ("low", "medium", "high")

CLIENT_REFLECTION_LEAD = (
    "Based on the current stage of the conversation, think slowly through the following "
    "questions before generating your response:"
)
THERAPIST_REFLECTION_LEAD = "Think slowly through the following questions before you respond:"
CONTEXT_HEADER = "Context & Scenario:"
STRUGGLES_HEADER = "Emotional struggles:"
PERSONALITY_HEADER = "Personality:"
GUIDELINES_HEADER = "Guidelines:"
SECTION_HEADERS = (
    CLIENT_REFLECTION_LEAD,
    THERAPIST_REFLECTION_LEAD,
    CONTEXT_HEADER,
    STRUGGLES_HEADER,
    PERSONALITY_HEADER,
    GUIDELINES_HEADER,
)

BUILTIN_PERSONA_IDS = (
    "mild-daniel",
    "mild-moderate-mei",
    "moderate-sarah",
    "moderate-severe-arjun",
    "severe-grace",
)
BUILTIN_THERAPIST_ID = "default"

Source = Union[int, str]


@dataclass(frozen=True)
class ClientPersona:
    id: str
    name: str
    age: int
    locale: str
    context_narrative: str
    emotional_struggles: Tuple[str, ...]
    personality: Mapping[str, str]
    severity: SeverityProfile
    guidelines: Tuple[str, ...]
    reflection_questions: Tuple[str, ...]
    # struggle text -> criterion ids and/or extra-feature names it expresses
    struggle_sources: Mapping[str, Tuple[Source, ...]] = field(default_factory=dict)
    # trait -> parenthetical shown after the level, e.g. "resistant to change, feels stuck"
    personality_notes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "personality", MappingProxyType(dict(self.personality)))
        object.__setattr__(self, "personality_notes", MappingProxyType(dict(self.personality_notes)))
        object.__setattr__(
            self, "struggle_sources",
            MappingProxyType({k: tuple(v) for k, v in dict(self.struggle_sources).items()}),
        )


@dataclass(frozen=True)
class TherapistProfile:
    id: str
    preamble: str
    reflection_questions: Tuple[str, ...]
    guidelines: Tuple[str, ...]
    max_words_guideline: int = 40


@dataclass(frozen=True)
class Violation:
    code: str
    field: str
    message: str


@dataclass(frozen=True)
class ValidationResult:
    violations: Tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def codes(self) -> list[str]:
        return [v.code for v in self.violations]

    def describe(self) -> str:
        return "; ".join(f"{v.code} ({v.field}): {v.message}" for v in self.violations)


def validate_persona(
    persona: ClientPersona,
    registry: Optional[Sequence[SeverityProfile]] = None,
) -> ValidationResult:
    """Check a persona against the severity registry and its own invariants.

    Violations are returned, never raised, so callers can report every
    problem at once.
    """
    registry = list(registry) if registry is not None else builtin_severity_registry()
    out: list[Violation] = []

    def add(code: str, name: str, message: str) -> None:
        out.append(Violation(code=code, field=name, message=message))

    for name in ("id", "name", "locale", "context_narrative"):
        if not str(getattr(persona, name) or "").strip():
            add("EMPTY_FIELD", name, f"{name} must be non-empty")

    if isinstance(persona.age, bool) or not isinstance(persona.age, int) or persona.age < 1:
        add("INVALID_AGE", "age", f"age must be a positive integer, got {persona.age!r}")

    # --- Severity must match a registry entry exactly ---
    reference = next((p for p in registry if p.level == persona.severity.level), None)
    if reference is None:
        add("UNKNOWN_SEVERITY", "severity", f"no registry entry for level {persona.severity.level!r}")
        reference = persona.severity
    else:
        if set(persona.severity.symptom_ids) != set(reference.symptom_ids):
            add(
                "SYMPTOM_SET_MISMATCH",
                "severity.symptom_ids",
                f"{persona.severity.level} expects {sorted(reference.symptom_ids)}, "
                f"got {sorted(persona.severity.symptom_ids)}",
            )
        if set(persona.severity.extra_features) != set(reference.extra_features):
            add(
                "EXTRA_FEATURES_MISMATCH",
                "severity.extra_features",
                f"{persona.severity.level} expects {sorted(reference.extra_features)}, "
                f"got {sorted(persona.severity.extra_features)}",
            )

    # --- Struggles trace back to symptoms ---
    if not persona.emotional_struggles:
        add("EMPTY_STRUGGLES", "emotional_struggles", "at least one emotional struggle is required")
    allowed: set = set(reference.symptom_ids) | set(reference.extra_features)
    covered: set = set()
    for struggle in persona.emotional_struggles:
        sources = tuple(persona.struggle_sources.get(struggle, ()))
        if not sources:
            add("UNTRACEABLE_STRUGGLE", "struggle_sources", f"no source given for {struggle!r}")
            continue
        stray = [s for s in sources if s not in allowed]
        if stray:
            add(
                "UNTRACEABLE_STRUGGLE",
                "struggle_sources",
                f"{struggle!r} cites {stray}, outside the {reference.level} profile",
            )
        covered.update(s for s in sources if isinstance(s, int))
    if persona.emotional_struggles:
        missing = sorted(set(reference.symptom_ids) - covered)
        if missing:
            add("UNCOVERED_SYMPTOM", "emotional_struggles", f"no struggle expresses symptom(s) {missing}")

    # --- Personality: every trait exactly once ---
    traits = dict(persona.personality)
    for trait in TRAITS:
        if trait not in traits:
            add("MISSING_TRAIT", "personality", f"trait {trait!r} is missing")
        elif traits[trait] not in TRAIT_LEVELS:
            add("INVALID_TRAIT_LEVEL", "personality", f"{trait}={traits[trait]!r} is not one of {TRAIT_LEVELS}")
    for trait in sorted(set(traits) - set(TRAITS)):
        add("INVALID_TRAIT_LEVEL", "personality", f"unknown trait {trait!r}")

    # --- Free text must not forge a section header ---
    texts = [("context_narrative", persona.context_narrative)]
    texts += [("emotional_struggles", s) for s in persona.emotional_struggles]
    texts += [("guidelines", g) for g in persona.guidelines]
    texts += [("reflection_questions", q) for q in persona.reflection_questions]
    texts += [("personality_notes", n) for n in persona.personality_notes.values()]
    for name, text in texts:
        if any(line.strip() in SECTION_HEADERS for line in str(text).splitlines()):
            add("RESERVED_HEADER", name, "text contains a prompt section header line")

    return ValidationResult(violations=tuple(out))


def validate_therapist(profile: TherapistProfile) -> ValidationResult:
    out: list[Violation] = []
    if not profile.preamble.strip():
        out.append(Violation("EMPTY_FIELD", "preamble", "preamble must be non-empty"))
    if not [g for g in profile.guidelines if g.strip()]:
        out.append(Violation("EMPTY_FIELD", "guidelines", "at least one guideline is required"))
    if isinstance(profile.max_words_guideline, bool) or profile.max_words_guideline < 1:
        out.append(Violation("INVALID_VALUE", "max_words_guideline", "must be a positive integer"))
    return ValidationResult(violations=tuple(out))


# ----------------------------------------------------------------------
# Loading
# ----------------------------------------------------------------------

_PERSONA_FIELDS = {
    "id", "name", "age", "locale", "context_narrative", "emotional_struggles", "personality",
    "severity", "guidelines", "reflection_questions", "struggle_sources", "personality_notes",
}
_THERAPIST_FIELDS = {"id", "preamble", "reflection_questions", "guidelines", "max_words_guideline"}


def persona_from_dict(
    data: Mapping,
    registry: Optional[Sequence[SeverityProfile]] = None,
) -> ClientPersona:
    unknown = set(data) - _PERSONA_FIELDS
    if unknown:
        raise PersonaError("INVALID_PERSONA", f"unknown persona field(s): {sorted(unknown)}")
    missing = _PERSONA_FIELDS - {"struggle_sources", "personality_notes"} - set(data)
    if missing:
        raise PersonaError("INVALID_PERSONA", f"missing persona field(s): {sorted(missing)}")
    try:
        return ClientPersona(
            id=str(data["id"]),
            name=str(data["name"]),
            age=data["age"],
            locale=str(data["locale"]),
            context_narrative=str(data["context_narrative"]),
            emotional_struggles=tuple(data["emotional_struggles"]),
            personality=dict(data["personality"]),
            severity=_severity_from_json(data["severity"], registry),
            guidelines=tuple(data["guidelines"]),
            reflection_questions=tuple(data["reflection_questions"]),
            struggle_sources={k: tuple(v) for k, v in dict(data.get("struggle_sources", {})).items()},
            personality_notes=dict(data.get("personality_notes", {})),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise PersonaError("INVALID_PERSONA", f"persona {data.get('id')!r}: {exc}") from exc


def therapist_from_dict(data: Mapping) -> TherapistProfile:
    unknown = set(data) - _THERAPIST_FIELDS
    if unknown:
        raise PersonaError("INVALID_PROFILE", f"unknown therapist field(s): {sorted(unknown)}")
    try:
        return TherapistProfile(
            id=str(data["id"]),
            preamble=str(data["preamble"]),
            reflection_questions=tuple(data.get("reflection_questions", ())),
            guidelines=tuple(data["guidelines"]),
            max_words_guideline=int(data.get("max_words_guideline", 40)),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise PersonaError("INVALID_PROFILE", f"therapist profile: {exc}") from exc


def load_persona(path: Path, registry: Optional[Sequence[SeverityProfile]] = None) -> ClientPersona:
    return persona_from_dict(_read_json(path, "INVALID_PERSONA"), registry)


def load_therapist(path: Path) -> TherapistProfile:
    return therapist_from_dict(_read_json(path, "INVALID_PROFILE"))


def builtin_personas() -> list[ClientPersona]:
    """The five bundled client vignettes in ascending severity.

    Only the moderate vignette is canonical; the other four follow its
    structure with struggles chosen to match their severity profile.
    """
    return [load_persona(DATA_DIR / f"{pid}.json") for pid in BUILTIN_PERSONA_IDS]


def builtin_therapist() -> TherapistProfile:
    return load_therapist(DATA_DIR / f"therapist_{BUILTIN_THERAPIST_ID}.json")


def resolve_persona(ref: str, base_dir: Optional[Path] = None) -> ClientPersona:
    """A built-in persona id or a path to a persona JSON file."""
    if ref in BUILTIN_PERSONA_IDS:
        return load_persona(DATA_DIR / f"{ref}.json")
    return load_persona(_resolve_path(ref, base_dir))


def resolve_therapist(ref: str, base_dir: Optional[Path] = None) -> TherapistProfile:
    if ref == BUILTIN_THERAPIST_ID:
        return builtin_therapist()
    return load_therapist(_resolve_path(ref, base_dir))


def _resolve_path(ref: str, base_dir: Optional[Path]) -> Path:
    path = Path(ref)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    return path


def _read_json(path: Path, code: str) -> dict:
    try:
        with Path(path).open("r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise PersonaError(code, f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PersonaError(code, f"{path}:{exc.lineno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise PersonaError(code, f"{path}: expected a JSON object")
    logger.debug("Loaded profile %s from %s", data.get("id"), path)
    return data


def _severity_from_json(value, registry: Optional[Sequence[SeverityProfile]]) -> SeverityProfile:
    if isinstance(value, str):
        for profile in registry if registry is not None else builtin_severity_registry():
            if profile.level == value:
                return profile
        raise ValueError(f"unknown severity level {value!r}")
    if isinstance(value, Mapping):
        extra = value.get("extra_features", ())
        return SeverityProfile(
            level=str(value["level"]),
            symptom_ids=frozenset(value.get("symptom_ids", ())),
            extra_features=frozenset(extra),
        )
    raise ValueError(f"severity must be a level name or an object, got {type(value).__name__}")


def persona_summary(persona: ClientPersona) -> dict:
    """Short header data for transcript views."""
    return {
        "persona_id": persona.id,
        "name": persona.name,
        "age": persona.age,
        "severity": persona.severity.level,
        "severity_rank": persona.severity.rank,
    }

