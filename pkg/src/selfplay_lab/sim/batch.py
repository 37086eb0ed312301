"""Resumable batches of self-play sessions across personas."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Optional, Tuple

from selfplay_lab.errors import LabError, SessionError
from selfplay_lab.gateway.base import ChatBackend
from selfplay_lab.persona.profiles import ClientPersona, TherapistProfile
from selfplay_lab.sim.engine import Clock, SessionConfig, run_session, utc_now
from selfplay_lab.types import ACTOR_PARAMS, DEFAULT_OPENER, GenerationParams, Transcript

if TYPE_CHECKING:
    from selfplay_lab.workbench.store import TranscriptStore

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunManifest:
    personas: Tuple[ClientPersona, ...]
    therapist: TherapistProfile
    sessions_per_persona: int = 100
    turns_per_agent: int = 10
    opener: Optional[str] = DEFAULT_OPENER
    params: GenerationParams = ACTOR_PARAMS
    concurrency_limit: int = 1
    output_dir: Path = Path("outputs")
    # Failed sessions are rerun from scratch, never resumed mid-dialogue.
    session_retries: int = 1

    def __post_init__(self) -> None:
        if not self.personas:
            raise ValueError("A manifest needs at least one persona")
        ids = [p.id for p in self.personas]
        if len(set(ids)) != len(ids):
            raise ValueError(f"Duplicate persona ids in manifest: {ids}")
        if self.sessions_per_persona < 1:
            raise ValueError("sessions_per_persona must be >= 1")
        if self.concurrency_limit < 1:
            raise ValueError("concurrency_limit must be >= 1")
        if self.session_retries < 0:
            raise ValueError("session_retries must be >= 0")

    def session_config(self, persona: ClientPersona) -> SessionConfig:
        return SessionConfig(
            persona=persona,
            therapist=self.therapist,
            turns_per_agent=self.turns_per_agent,
            opener=self.opener,
            params=self.params,
        )

    def session_ids(self, persona: ClientPersona) -> list[str]:
        width = max(3, len(str(self.sessions_per_persona)))
        return [f"{persona.id}-{n:0{width}d}" for n in range(1, self.sessions_per_persona + 1)]


@dataclass
class PersonaCounts:
    completed: int = 0
    failed: int = 0
    skipped: int = 0

    @property
    def total(self) -> int:
        return self.completed + self.failed + self.skipped


@dataclass(frozen=True)
class FailedSession:
    session_id: str
    code: str
    message: str


@dataclass
class BatchSummary:
    per_persona: dict[str, PersonaCounts] = field(default_factory=dict)
    failures: list[FailedSession] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return sum(c.completed for c in self.per_persona.values())

    @property
    def failed(self) -> int:
        return sum(c.failed for c in self.per_persona.values())

    @property
    def skipped(self) -> int:
        return sum(c.skipped for c in self.per_persona.values())

    def to_dict(self) -> dict:
        return {
            "completed": self.completed,
            "failed": self.failed,
            "skipped": self.skipped,
            "per_persona": {
                pid: {"completed": c.completed, "failed": c.failed, "skipped": c.skipped}
                for pid, c in sorted(self.per_persona.items())
            },
            "failures": [
                {"session_id": f.session_id, "code": f.code, "message": f.message}
                for f in sorted(self.failures, key=lambda f: f.session_id)
            ],
        }

    def format_text(self) -> str:
        lines = ["=== Self-Play Batch Summary ==="]
        for key in ("completed", "failed", "skipped"):
            lines.append(f"{key:>28s}: {getattr(self, key)}")
        for pid, c in sorted(self.per_persona.items()):
            lines.append(f"{pid:>28s}: completed={c.completed} failed={c.failed} skipped={c.skipped}")
        for f in sorted(self.failures, key=lambda f: f.session_id):
            lines.append(f"{'failed ' + f.session_id:>28s}: {f.code} {f.message}")
        return "\n".join(lines)

    def write_json(self, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")
        return path


def run_batch(
    manifest: RunManifest,
    backend: ChatBackend,
    store: "TranscriptStore",
    clock: Clock = utc_now,
) -> BatchSummary:
    """Run every missing session of the manifest and append it to the store.

    Sessions already in the store are skipped, so rerunning a manifest
    resumes it. Per-session failures are counted, never raised.
    """
    summary = BatchSummary(per_persona={p.id: PersonaCounts() for p in manifest.personas})
    existing = store.session_ids()

    jobs: list[tuple[str, str, SessionConfig]] = []
    for persona in manifest.personas:
        config = manifest.session_config(persona)
        for session_id in manifest.session_ids(persona):
            if session_id in existing:
                summary.per_persona[persona.id].skipped += 1
            else:
                jobs.append((persona.id, session_id, config))

    logger.info(
        "Batch: %d session(s) to run, %d already stored, concurrency=%d",
        len(jobs), summary.skipped, manifest.concurrency_limit,
    )

    with ThreadPoolExecutor(max_workers=manifest.concurrency_limit) as pool:
        futures = {
            pool.submit(_run_with_retries, config, backend, session_id, manifest.session_retries, clock):
                (persona_id, session_id)
            for persona_id, session_id, config in jobs
        }
        for future in as_completed(futures):
            persona_id, session_id = futures[future]
            counts = summary.per_persona[persona_id]
            try:
                transcript = future.result()
            except LabError as exc:
                counts.failed += 1
                summary.failures.append(FailedSession(session_id=session_id, code=exc.code, message=exc.message))
                logger.warning("Session %s failed: %s", session_id, exc)
                continue
            store.write(transcript)
            counts.completed += 1

    store.compact()
    logger.info("Batch done: %d completed, %d failed, %d skipped",
                summary.completed, summary.failed, summary.skipped)
    return summary


def _run_with_retries(
    config: SessionConfig,
    backend: ChatBackend,
    session_id: str,
    retries: int,
    clock: Clock,
) -> Transcript:
    attempt = 0
    while True:
        try:
            return run_session(config, backend, session_id=session_id, clock=clock)
        except SessionError as exc:
            if attempt >= retries:
                raise
            attempt += 1
            logger.warning("Session %s failed (%s); rerunning from the start (%d/%d)",
                           session_id, exc.code, attempt, retries)
