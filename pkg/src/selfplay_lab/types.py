from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Mapping, Optional, Tuple, TypedDict

ROLES = ("system", "user", "assistant")

THERAPIST = "therapist"
CLIENT = "client"
ANALYST = "analyst"
SPEAKERS = (THERAPIST, CLIENT)

SINGLE = "single"
MULTI = "multi"
MODES = (SINGLE, MULTI)

OPENER_FIXED = "fixed"
OPENER_GENERATED = "generated"

DEFAULT_OPENER = "Hello, how may I help you today?"
DEFAULT_MODEL = "gpt-4o"


class TurnRecord(TypedDict):
    index: int
    speaker: str
    content: str


class TranscriptRecord(TypedDict):
    """One line of ``transcripts.jsonl``. Key names are part of the file format."""

    session_id: str
    persona_id: str
    severity_rank: int
    model: str
    temperature: float
    opener_mode: str
    turns: list
    complete: bool
    created_at: str


class AnnotationRecord(TypedDict):
    """One line of ``annotations.jsonl``."""

    session_id: str
    mode: str
    approach: str
    techniques: list
    flags: list
    raw_response: str


def _finite(value: Optional[float]) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def __post_init__(self) -> None:
        if self.role not in ROLES:
            raise ValueError(f"Unknown chat role: {self.role!r}")
        if not isinstance(self.content, str):
            raise ValueError("Chat message content must be text")

    def to_wire(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class GenerationParams:
    model_name: str = DEFAULT_MODEL
    temperature: float = 0.7
    max_tokens: int = 400
    top_p: float = 1.0

    def __post_init__(self) -> None:
        if not self.model_name:
            raise ValueError("model_name must be non-empty")
        if not _finite(self.temperature) or self.temperature < 0.0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature!r}")
        if isinstance(self.max_tokens, bool) or not isinstance(self.max_tokens, int) or self.max_tokens < 1:
            raise ValueError(f"max_tokens must be a positive integer, got {self.max_tokens!r}")
        if not _finite(self.top_p) or not (0.0 < self.top_p <= 1.0):
            raise ValueError(f"top_p must be in (0, 1], got {self.top_p!r}")


# Actors need variation across sessions; the analyst needs stable labels.
ACTOR_PARAMS = GenerationParams()
ANALYST_PARAMS = GenerationParams(temperature=0.0, max_tokens=300)


@dataclass(frozen=True)
class ChatRequest:
    messages: Tuple[ChatMessage, ...]
    params: GenerationParams = ACTOR_PARAMS
    # Carries the agent tag ("therapist" / "client" / "analyst") and session_id.
    metadata: Mapping[str, str] = field(default_factory=dict)

    @property
    def agent(self) -> str:
        return str(self.metadata.get("agent", ""))

    @property
    def session_id(self) -> str:
        return str(self.metadata.get("session_id", ""))


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: str
    content: str

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError(f"Turn index must be non-negative, got {self.index}")
        if self.speaker not in SPEAKERS:
            raise ValueError(f"Unknown speaker: {self.speaker!r}")
        if not self.content or not self.content.strip():
            raise ValueError(f"Turn {self.index} content must be non-empty")


@dataclass(frozen=True)
class Transcript:
    session_id: str
    persona_id: str
    severity_rank: int
    params: GenerationParams
    opener_mode: str
    turns: Tuple[Turn, ...]
    created_at: datetime
    complete: bool = False

    def __post_init__(self) -> None:
        if not self.session_id:
            raise ValueError("session_id must be non-empty")
        if not 0 <= self.severity_rank <= 4:
            raise ValueError(f"severity_rank must be in 0..4, got {self.severity_rank}")
        if self.opener_mode not in (OPENER_FIXED, OPENER_GENERATED):
            raise ValueError(f"Unknown opener_mode: {self.opener_mode!r}")
        for expected, turn in enumerate(self.turns):
            if turn.index != expected:
                raise ValueError(f"Turn indices must be contiguous from 0; got {turn.index} at {expected}")
            if turn.speaker != SPEAKERS[expected % 2]:
                raise ValueError(f"Turn {expected} must be spoken by {SPEAKERS[expected % 2]}")
        if self.complete and len(self.turns) % 2:
            raise ValueError("A complete transcript has an even number of turns")

    @property
    def turns_per_agent(self) -> int:
        return len(self.turns) // 2

    def speaker_turns(self, speaker: str) -> list[Turn]:
        return [t for t in self.turns if t.speaker == speaker]


@dataclass(frozen=True)
class Annotation:
    session_id: str
    mode: str
    approach: str
    techniques: Tuple[str, ...]
    raw_response: str
    flags: frozenset = frozenset()

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"Unknown annotation mode: {self.mode!r}")
        if not self.techniques:
            raise ValueError("An annotation needs at least one technique")
        if self.mode == SINGLE and len(self.techniques) != 1:
            raise ValueError("Single-mode annotations carry exactly one technique")
        if len(set(self.techniques)) != len(self.techniques):
            raise ValueError("Techniques must be deduplicated")

    @property
    def key(self) -> Tuple[str, str]:
        return (self.session_id, self.mode)
