"""Append-only JSON Lines stores for transcripts and annotations.

One record per line. Appends are serialized per store instance and written
with a single ``write`` call, so a reader sees either the whole line or an
unterminated tail, which it skips.
"""
from __future__ import annotations

import json
import logging
import os
import tempfile
import threading
from datetime import datetime
from pathlib import Path
from typing import Generic, Hashable, Iterable, Optional, TypeVar

from selfplay_lab.errors import StoreError
from selfplay_lab.types import (
    Annotation,
    AnnotationRecord,
    GenerationParams,
    Transcript,
    TranscriptRecord,
    Turn,
)

logger = logging.getLogger(__name__)

TRANSCRIPTS_FILE = "transcripts.jsonl"
ANNOTATIONS_FILE = "annotations.jsonl"

T = TypeVar("T")


class JsonlStore(Generic[T]):
    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    # -- subclass hooks -------------------------------------------------

    def encode(self, item: T) -> dict:
        raise NotImplementedError

    def decode(self, record: dict) -> T:
        raise NotImplementedError

    def key(self, item: T) -> Hashable:
        raise NotImplementedError

    # -- public API -----------------------------------------------------

    def write(self, item: T) -> None:
        line = json.dumps(self.encode(item), ensure_ascii=False) + "\n"
        with self._lock:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as f:
                    f.write(line)
                    f.flush()
            except OSError as exc:
                raise StoreError("IO_ERROR", str(exc), path=str(self.path)) from exc

    def read_all(self) -> list[T]:
        """All records sorted by key; the first record wins on duplicate keys."""
        items: dict = {}
        for line_no, record in self._records():
            try:
                item = self.decode(record)
            except (KeyError, TypeError, ValueError) as exc:
                raise StoreError("MALFORMED_RECORD", f"invalid record: {exc}",
                                 path=str(self.path), line=line_no) from exc
            k = self.key(item)
            if k in items:
                logger.warning("%s:%d duplicates key %r; keeping the first record", self.path, line_no, k)
                continue
            items[k] = item
        return [items[k] for k in sorted(items)]

    def keys(self) -> set:
        return {self.key(item) for item in self.read_all()}

    def compact(self) -> None:
        """Rewrite the file sorted by key so on-disk order is schedule-independent."""
        with self._lock:
            if not self.path.exists():
                return
            items = self.read_all()
            fd, tmp = tempfile.mkstemp(prefix=self.path.name, suffix=".tmp", dir=str(self.path.parent))
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as f:
                    for item in items:
                        f.write(json.dumps(self.encode(item), ensure_ascii=False) + "\n")
                os.replace(tmp, self.path)
            except OSError as exc:
                Path(tmp).unlink(missing_ok=True)
                raise StoreError("IO_ERROR", str(exc), path=str(self.path)) from exc

    def _records(self) -> Iterable[tuple[int, dict]]:
        if not self.path.exists():
            return
        try:
            with self.path.open("r", encoding="utf-8") as f:
                lines = f.read().split("\n")
        except (OSError, UnicodeDecodeError) as exc:
            raise StoreError("IO_ERROR", str(exc), path=str(self.path)) from exc

        # The final element is "" when the file ends with a newline; anything
        # else there is a record still being appended.
        tail = lines.pop()
        if tail.strip():
            logger.warning("%s: skipping unterminated last line %d", self.path, len(lines) + 1)
        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise StoreError("MALFORMED_RECORD", exc.msg, path=str(self.path), line=line_no) from exc
            if not isinstance(record, dict):
                raise StoreError("MALFORMED_RECORD", "record is not an object", path=str(self.path), line=line_no)
            yield line_no, record


class TranscriptStore(JsonlStore[Transcript]):
    """Transcripts keyed by session id.

    Only ``model`` and ``temperature`` of the generation params are stored;
    ``max_tokens`` and ``top_p`` read back as the ``GenerationParams`` defaults.
    """

    @classmethod
    def in_dir(cls, directory: Path) -> "TranscriptStore":
        return cls(Path(directory) / TRANSCRIPTS_FILE)

    def encode(self, item: Transcript) -> dict:
        record: TranscriptRecord = {
            "session_id": item.session_id,
            "persona_id": item.persona_id,
            "severity_rank": item.severity_rank,
            "model": item.params.model_name,
            "temperature": item.params.temperature,
            "opener_mode": item.opener_mode,
            "turns": [{"index": t.index, "speaker": t.speaker, "content": t.content} for t in item.turns],
            "complete": item.complete,
            "created_at": item.created_at.isoformat(),
        }
        return dict(record)

    def decode(self, record: dict) -> Transcript:
        return Transcript(
            session_id=str(record["session_id"]),
            persona_id=str(record["persona_id"]),
            severity_rank=int(record["severity_rank"]),
            params=GenerationParams(model_name=str(record["model"]), temperature=float(record["temperature"])),
            opener_mode=str(record["opener_mode"]),
            turns=tuple(
                Turn(index=int(t["index"]), speaker=str(t["speaker"]), content=str(t["content"]))
                for t in record["turns"]
            ),
            created_at=datetime.fromisoformat(record["created_at"]),
            complete=bool(record["complete"]),
        )

    def key(self, item: Transcript) -> str:
        return item.session_id

    def session_ids(self) -> set:
        return self.keys()

    def get(self, session_id: str) -> Optional[Transcript]:
        for transcript in self.read_all():
            if transcript.session_id == session_id:
                return transcript
        return None


class AnnotationStore(JsonlStore[Annotation]):
    @classmethod
    def in_dir(cls, directory: Path) -> "AnnotationStore":
        return cls(Path(directory) / ANNOTATIONS_FILE)

    def encode(self, item: Annotation) -> dict:
        record: AnnotationRecord = {
            "session_id": item.session_id,
            "mode": item.mode,
            "approach": item.approach,
            "techniques": list(item.techniques),
            "flags": sorted(item.flags),
            "raw_response": item.raw_response,
        }
        return dict(record)

    def decode(self, record: dict) -> Annotation:
        return Annotation(
            session_id=str(record["session_id"]),
            mode=str(record["mode"]),
            approach=str(record["approach"]),
            techniques=tuple(str(t) for t in record["techniques"]),
            raw_response=str(record["raw_response"]),
            flags=frozenset(str(f) for f in record["flags"]),
        )

    def key(self, item: Annotation) -> tuple:
        return item.key


def write_transcript(store: TranscriptStore, transcript: Transcript) -> None:
    store.write(transcript)


def read_all(store: JsonlStore) -> list:
    return store.read_all()
