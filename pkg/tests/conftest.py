from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
SRC = ROOT / "src"
SCRIPTS = ROOT / "scripts"
CONFIGS = ROOT / "configs"
if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))
if str(SCRIPTS) not in sys.path:
    sys.path.insert(0, str(SCRIPTS))

from selfplay_lab.types import ACTOR_PARAMS, SPEAKERS, Transcript, Turn  # noqa: E402

EPOCH = datetime(1970, 1, 1, tzinfo=timezone.utc)


def make_transcript(
    session_id: str = "moderate-sarah-001",
    severity_rank: int = 2,
    contents=("Hello, how may I help you today?", "I feel stuck."),
    complete: bool = True,
    persona_id: str = "",
) -> Transcript:
    turns = tuple(Turn(index=i, speaker=SPEAKERS[i % 2], content=c) for i, c in enumerate(contents))
    return Transcript(
        session_id=session_id,
        persona_id=persona_id or session_id.rsplit("-", 1)[0],
        severity_rank=severity_rank,
        params=ACTOR_PARAMS,
        opener_mode="fixed",
        turns=turns,
        created_at=EPOCH,
        complete=complete,
    )


@pytest.fixture
def offline_script_path() -> Path:
    return CONFIGS / "scripts" / "offline_replies.json"


@pytest.fixture
def pilot_manifest_path() -> Path:
    return CONFIGS / "pilot_offline.json"


@pytest.fixture
def short_script() -> dict:
    return {
        "therapist": [f"Therapist reply {i}. How does that feel?" for i in range(12)],
        "client": [f"Client reply {i}." for i in range(12)],
        "analyst": ["APPROACH: PCT\nTECHNIQUES: reflective listening"],
    }
