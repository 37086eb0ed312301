"""Single-session self-play loop between the therapist and client agents."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from statistics import mean
from typing import Callable, Optional

from selfplay_lab.errors import GatewayError, SessionError
from selfplay_lab.gateway.base import ChatBackend, complete
from selfplay_lab.persona.profiles import ClientPersona, TherapistProfile
from selfplay_lab.persona.render import PromptText, render_client_prompt, render_therapist_prompt
from selfplay_lab.types import (
    ACTOR_PARAMS,
    CLIENT,
    DEFAULT_OPENER,
    OPENER_FIXED,
    OPENER_GENERATED,
    SPEAKERS,
    THERAPIST,
    ChatMessage,
    ChatRequest,
    GenerationParams,
    Transcript,
    Turn,
)

logger = logging.getLogger(__name__)

Clock = Callable[[], datetime]


def utc_now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def epoch_clock() -> datetime:
    """Frozen clock for offline runs whose stores must be byte-identical."""
    return datetime(1970, 1, 1, tzinfo=timezone.utc)


@dataclass(frozen=True)
class SessionConfig:
    persona: ClientPersona
    therapist: TherapistProfile
    turns_per_agent: int = 10
    # ``None`` lets the therapist model generate its own first message.
    opener: Optional[str] = DEFAULT_OPENER
    params: GenerationParams = ACTOR_PARAMS

    def __post_init__(self) -> None:
        if isinstance(self.turns_per_agent, bool) or not isinstance(self.turns_per_agent, int) \
                or self.turns_per_agent < 1:
            raise SessionError("INVALID_TURNS", f"turns_per_agent must be >= 1, got {self.turns_per_agent!r}",
                               session_id=self.persona.id)
        if self.opener is not None and not self.opener.strip():
            raise SessionError("INVALID_OPENER", "a fixed opener must be non-empty", session_id=self.persona.id)

    @property
    def opener_mode(self) -> str:
        return OPENER_FIXED if self.opener is not None else OPENER_GENERATED


def agent_view(transcript: Transcript, agent: str, system_prompt: PromptText) -> list[ChatMessage]:
    """The conversation as ``agent`` sees it: its own turns are assistant history."""
    if agent not in SPEAKERS:
        raise ValueError(f"Unknown agent: {agent!r}")
    messages = [ChatMessage(role="system", content=system_prompt.text)]
    for turn in transcript.turns:
        role = "assistant" if turn.speaker == agent else "user"
        messages.append(ChatMessage(role=role, content=turn.content))
    return messages


def run_session(
    config: SessionConfig,
    backend: ChatBackend,
    session_id: Optional[str] = None,
    clock: Clock = utc_now,
) -> Transcript:
    session_id = session_id or f"{config.persona.id}-001"
    prompts = {
        THERAPIST: render_therapist_prompt(config.therapist),
        CLIENT: render_client_prompt(config.persona),
    }
    created_at = clock()
    total_turns = 2 * config.turns_per_agent
    turns: list[Turn] = []

    def snapshot(complete_flag: bool = False) -> Transcript:
        return Transcript(
            session_id=session_id,
            persona_id=config.persona.id,
            severity_rank=config.persona.severity.rank,
            params=config.params,
            opener_mode=config.opener_mode,
            turns=tuple(turns),
            created_at=created_at,
            complete=complete_flag,
        )

    backend.begin_session(session_id)
    if config.opener is not None:
        turns.append(Turn(index=0, speaker=THERAPIST, content=config.opener))

    while len(turns) < total_turns:
        index = len(turns)
        speaker = SPEAKERS[index % 2]
        request = ChatRequest(
            messages=tuple(agent_view(snapshot(), speaker, prompts[speaker])),
            params=config.params,
            metadata={"agent": speaker, "session_id": session_id},
        )
        try:
            reply = complete(backend, request)
        except GatewayError as exc:
            raise SessionError(exc.code, exc.message, session_id=session_id, turn_index=index) from exc
        # "<break>" and other markup is kept verbatim inside the one turn.
        content = reply.content.strip()
        if not content:
            raise SessionError("EMPTY_TURN", f"{speaker} produced an empty message",
                               session_id=session_id, turn_index=index)
        turns.append(Turn(index=index, speaker=speaker, content=content))

    logger.debug("Session %s finished with %d turns", session_id, len(turns))
    return snapshot(complete_flag=True)


# ----------------------------------------------------------------------
# Guideline adherence
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class WordStats:
    violations: int
    max_words: int
    mean_words: float
    total_words: int = 0


@dataclass(frozen=True)
class QuestionStats:
    multi_question_turns: int
    max_questions: int


def therapist_word_stats(transcript: Transcript, limit: int) -> WordStats:
    """Word counts of therapist turns against the "keep them within N words" guideline."""
    if limit < 1:
        raise ValueError(f"limit must be positive, got {limit}")
    counts = [len(t.content.split()) for t in transcript.speaker_turns(THERAPIST)]
    if not counts:
        return WordStats(violations=0, max_words=0, mean_words=0.0)
    return WordStats(
        violations=sum(1 for c in counts if c > limit),
        max_words=max(counts),
        mean_words=float(mean(counts)),
        total_words=sum(counts),
    )


def therapist_question_stats(transcript: Transcript) -> QuestionStats:
    """Therapist turns asking more than one question (counted by question marks)."""
    counts = [t.content.count("?") for t in transcript.speaker_turns(THERAPIST)]
    return QuestionStats(
        multi_question_turns=sum(1 for c in counts if c > 1),
        max_questions=max(counts, default=0),
    )
